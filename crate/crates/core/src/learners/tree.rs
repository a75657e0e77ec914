//! CART with the Gini criterion, and an exhaustive single-split stump.

use serde::{Deserialize, Serialize};

use super::TreeParams;
use crate::dataset::ClassId;
use crate::matrix::Matrix;
use crate::scalar::{self, Scalar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum Node<T> {
    Leaf {
        /// Weighted class totals `[w0, w1]` reaching this leaf.
        weights: [T; 2],
        n_samples: usize,
    },
    Split {
        feature: usize,
        /// Samples with `x[feature] <= threshold` go left.
        threshold: T,
        left: usize,
        right: usize,
        weights: [T; 2],
        n_samples: usize,
        /// `W_node * gini(node) - W_left * gini(left) - W_right * gini(right)`.
        impurity_decrease: T,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Tree<T> {
    pub nodes: Vec<Node<T>>,
    pub n_features: usize,
}

/// `W * gini` for class weights `w0, w1`, i.e. `W - (w0^2 + w1^2) / W`.
#[inline]
pub(crate) fn weighted_gini<T: Scalar>(w0: T, w1: T) -> T {
    let w = w0 + w1;
    if w > T::zero() {
        w - (w0 * w0 + w1 * w1) / w
    } else {
        T::zero()
    }
}

impl<T: Scalar> Tree<T> {
    fn leaf_of(&self, x: &[T]) -> &Node<T> {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if x[*feature] <= *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    /// Weighted class frequency at the reached leaf.
    pub fn proba(&self, x: &[T]) -> [T; 2] {
        match self.leaf_of(x) {
            Node::Leaf { weights, .. } => {
                let w = weights[0] + weights[1];
                if w > T::zero() {
                    let p1 = weights[1] / w;
                    [T::one() - p1, p1]
                } else {
                    [T::lit(0.5), T::lit(0.5)]
                }
            }
            Node::Split { .. } => unreachable!("leaf_of returns leaves"),
        }
    }

    pub fn depth(&self) -> usize {
        fn rec<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + rec(nodes, *left).max(rec(nodes, *right)),
            }
        }
        rec(&self.nodes, 0)
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }

    /// Summed impurity decrease per feature, normalized to one. All zeros
    /// when no split reduced impurity.
    pub fn importances(&self) -> Vec<T> {
        let mut imp = vec![T::zero(); self.n_features];
        for n in &self.nodes {
            if let Node::Split {
                feature,
                impurity_decrease,
                ..
            } = n
            {
                imp[*feature] = imp[*feature] + impurity_decrease.max(T::zero());
            }
        }
        let total: T = imp.iter().copied().sum();
        if total > T::zero() {
            imp.iter_mut().for_each(|v| *v = *v / total);
        }
        imp
    }
}

struct Candidate<T> {
    feature: usize,
    threshold: T,
    child_cost: T,
}

fn class_weights<T: Scalar>(idx: &[usize], y: &[ClassId], w: &[T]) -> [T; 2] {
    idx.iter().fold([T::zero(); 2], |mut acc, &i| {
        acc[y[i] as usize] = acc[y[i] as usize] + w[i];
        acc
    })
}

/// Best split of `idx` by sorted sweep. Ties keep the earliest feature and
/// the lowest threshold.
fn best_split<T: Scalar>(
    x: &Matrix<T>,
    y: &[ClassId],
    w: &[T],
    idx: &[usize],
    totals: [T; 2],
    min_leaf: usize,
) -> Option<Candidate<T>> {
    let mut best: Option<Candidate<T>> = None;
    let mut order = idx.to_vec();
    for f in 0..x.n_cols() {
        order.sort_by(|&a, &b| scalar::cmp(x.get(a, f), x.get(b, f)).then(a.cmp(&b)));
        let mut left = [T::zero(); 2];
        for p in 0..order.len() - 1 {
            let i = order[p];
            left[y[i] as usize] = left[y[i] as usize] + w[i];
            let (lo, hi) = (x.get(i, f), x.get(order[p + 1], f));
            if !(lo < hi) || p + 1 < min_leaf || order.len() - p - 1 < min_leaf {
                continue;
            }
            let right = [totals[0] - left[0], totals[1] - left[1]];
            let cost = weighted_gini(left[0], left[1]) + weighted_gini(right[0], right[1]);
            if best.as_ref().is_none_or(|b| cost < b.child_cost) {
                best = Some(Candidate {
                    feature: f,
                    threshold: (lo + hi) / T::lit(2.0),
                    child_cost: cost,
                });
            }
        }
    }
    best
}

pub(crate) fn fit_tree<T: Scalar>(x: &Matrix<T>, y: &[ClassId], w: &[T], params: &TreeParams) -> Tree<T> {
    let idx: Vec<usize> = (0..y.len()).collect();
    let root_weight = {
        let t = class_weights(&idx, y, w);
        t[0] + t[1]
    };
    let mut tree = Tree {
        nodes: Vec::new(),
        n_features: x.n_cols(),
    };
    let builder = Builder {
        x,
        y,
        w,
        params,
        root_weight,
    };
    builder.grow(&mut tree.nodes, idx, 0);
    tree
}

struct Builder<'a, T> {
    x: &'a Matrix<T>,
    y: &'a [ClassId],
    w: &'a [T],
    params: &'a TreeParams,
    root_weight: T,
}

impl<T: Scalar> Builder<'_, T> {
    fn grow(&self, nodes: &mut Vec<Node<T>>, idx: Vec<usize>, depth: usize) -> usize {
        let at = nodes.len();
        let weights = class_weights(&idx, self.y, self.w);
        let n_samples = idx.len();
        nodes.push(Node::Leaf { weights, n_samples });

        let impure = weights[0] > T::zero() && weights[1] > T::zero();
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let min_leaf = self.params.min_samples_leaf.max(1);
        if !impure || !depth_ok || n_samples < 2 * min_leaf {
            return at;
        }
        let Some(c) = best_split(self.x, self.y, self.w, &idx, weights, min_leaf) else {
            return at;
        };
        let decrease = weighted_gini(weights[0], weights[1]) - c.child_cost;
        if decrease / self.root_weight < T::lit(self.params.min_impurity_decrease) {
            return at;
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .into_iter()
            .partition(|&i| self.x.get(i, c.feature) <= c.threshold);
        let left = self.grow(nodes, l, depth + 1);
        let right = self.grow(nodes, r, depth + 1);
        nodes[at] = Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            left,
            right,
            weights,
            n_samples,
            impurity_decrease: decrease,
        };
        at
    }
}

/// Exhaustive one-split search: every feature, every midpoint between
/// distinct sorted values, child weights recounted from scratch.
pub(crate) fn fit_stump<T: Scalar>(x: &Matrix<T>, y: &[ClassId], w: &[T]) -> Tree<T> {
    let n = y.len();
    let all: Vec<usize> = (0..n).collect();
    let totals = class_weights(&all, y, w);
    let leaf = |weights: [T; 2], n_samples| Node::Leaf { weights, n_samples };
    let root_leaf = Tree {
        nodes: vec![leaf(totals, n)],
        n_features: x.n_cols(),
    };
    if !(totals[0] > T::zero() && totals[1] > T::zero()) {
        return root_leaf;
    }

    let mut best: Option<(usize, T, T)> = None;
    for f in 0..x.n_cols() {
        let mut values: Vec<T> = x.column(f).collect();
        values.sort_by(|a, b| scalar::cmp(*a, *b));
        values.dedup();
        for pair in values.windows(2) {
            let thr = (pair[0] + pair[1]) / T::lit(2.0);
            let mut left = [T::zero(); 2];
            let mut right = [T::zero(); 2];
            for i in 0..n {
                let side = if x.get(i, f) <= thr { &mut left } else { &mut right };
                side[y[i] as usize] = side[y[i] as usize] + w[i];
            }
            let cost = weighted_gini(left[0], left[1]) + weighted_gini(right[0], right[1]);
            if best.is_none_or(|(_, _, c)| cost < c) {
                best = Some((f, thr, cost));
            }
        }
    }
    let Some((feature, threshold, cost)) = best else {
        return root_leaf;
    };
    let decrease = weighted_gini(totals[0], totals[1]) - cost;
    if decrease < T::zero() {
        return root_leaf;
    }
    let (mut lw, mut rw) = ([T::zero(); 2], [T::zero(); 2]);
    let (mut ln, mut rn) = (0, 0);
    for i in 0..n {
        if x.get(i, feature) <= threshold {
            lw[y[i] as usize] = lw[y[i] as usize] + w[i];
            ln += 1;
        } else {
            rw[y[i] as usize] = rw[y[i] as usize] + w[i];
            rn += 1;
        }
    }
    Tree {
        nodes: vec![
            Node::Split {
                feature,
                threshold,
                left: 1,
                right: 2,
                weights: totals,
                n_samples: n,
                impurity_decrease: decrease,
            },
            leaf(lw, ln),
            leaf(rw, rn),
        ],
        n_features: x.n_cols(),
    }
}
