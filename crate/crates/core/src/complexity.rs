//! Local data-complexity measures over a sample's neighborhood.
//!
//! Twelve measures are assembled, in this fixed order, into the meta-feature
//! vector: feature overlap (F3, F4), linearity (L2, L3), neighborhood
//! (N1, N2, N3, N4, LSC), network density (Den) and class balance (C1, C2).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{class_counts, ClassId, Dataset};
use crate::error::{Error, Result};
use crate::learners::{self, ModelKind, ModelSpec};
use crate::matrix::Matrix;
use crate::neighbors;
use crate::scalar::{self, Scalar};
use crate::seed;

pub const N_META_FEATURES: usize = 12;

pub const META_FEATURE_NAMES: [&str; N_META_FEATURES] = [
    "F3", "F4", "L2", "L3", "N1", "N2", "N3", "N4", "LSC", "Den", "C1", "C2",
];

/// Edges whose max-normalized length is below this join the density graph.
pub const DENSITY_THRESHOLD: f64 = 0.15;

const N2_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MetaFeatureVector<T>(pub [T; N_META_FEATURES]);

impl<T: Scalar> MetaFeatureVector<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn get(&self, name: &str) -> Option<T> {
        META_FEATURE_NAMES.iter().position(|&n| n == name).map(|i| self.0[i])
    }
}

/// Points around one query, in a canonical order (ascending source index)
/// so every measure is invariant to the order rows were supplied in.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighborhood<T> {
    pub x: Matrix<T>,
    pub y: Vec<ClassId>,
    pub source_indices: Vec<usize>,
}

impl<T: Scalar> Neighborhood<T> {
    pub fn new(x: Matrix<T>, y: Vec<ClassId>, source_indices: Vec<usize>) -> Result<Self> {
        if y.len() != x.n_rows() || source_indices.len() != x.n_rows() {
            return Err(Error::Shape {
                expected: x.n_rows(),
                got: y.len().min(source_indices.len()),
            });
        }
        if x.n_rows() < 2 {
            return Err(Error::InsufficientNeighbors {
                requested: 2,
                available: x.n_rows(),
            });
        }
        let mut order: Vec<usize> = (0..y.len()).collect();
        order.sort_by_key(|&i| source_indices[i]);
        Ok(Self {
            x: x.select_rows(&order),
            y: order.iter().map(|&i| y[i]).collect(),
            source_indices: order.iter().map(|&i| source_indices[i]).collect(),
        })
    }

    /// Rows `indices` of `ds`, keyed by those indices.
    pub fn from_dataset(ds: &Dataset<T>, indices: &[usize]) -> Result<Self> {
        Self::new(
            ds.features.select_rows(indices),
            indices.iter().map(|&i| ds.labels[i]).collect(),
            indices.to_vec(),
        )
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn is_single_class(&self) -> bool {
        let c = class_counts(&self.y);
        c[0] == 0 || c[1] == 0
    }

    fn draw_key(&self, seed: u64) -> u64 {
        let ids: Vec<u64> = self.source_indices.iter().map(|&i| i as u64).collect();
        seed::derive(seed, &ids)
    }

    /// Pairwise squared distances.
    fn sq_distances(&self) -> Vec<Vec<T>> {
        let n = self.len();
        let mut d = vec![vec![T::zero(); n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = scalar::sq_dist(self.x.row(i), self.x.row(j));
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        d
    }
}

fn ratio<T: Scalar>(num: usize, den: usize) -> T {
    T::from_count(num) / T::from_count(den)
}

/// Per-feature overlap interval `[max of class minima, min of class maxima]`
/// over the rows in `active`; `None` when the interval is empty or a class is
/// missing.
fn overlap_interval<T: Scalar>(nb: &Neighborhood<T>, active: &[usize], f: usize) -> Option<(T, T)> {
    let mut lo = [T::infinity(); 2];
    let mut hi = [T::neg_infinity(); 2];
    for &i in active {
        let c = nb.y[i] as usize;
        let v = nb.x.get(i, f);
        lo[c] = lo[c].min(v);
        hi[c] = hi[c].max(v);
    }
    if !lo[0].is_finite() || !lo[1].is_finite() {
        return None;
    }
    let (a, b) = (lo[0].max(lo[1]), hi[0].min(hi[1]));
    (a <= b).then_some((a, b))
}

fn in_overlap<T: Scalar>(nb: &Neighborhood<T>, active: &[usize], f: usize) -> Vec<usize> {
    match overlap_interval(nb, active, f) {
        Some((a, b)) => active
            .iter()
            .copied()
            .filter(|&i| {
                let v = nb.x.get(i, f);
                v >= a && v <= b
            })
            .collect(),
        None => Vec::new(),
    }
}

/// (F3, F4). Single-class neighborhoods give `(0, 0)`.
pub fn feature_measures<T: Scalar>(nb: &Neighborhood<T>) -> (T, T) {
    if nb.is_single_class() {
        return (T::zero(), T::zero());
    }
    let n = nb.len();
    let all: Vec<usize> = (0..n).collect();
    let d = nb.x.n_cols();
    let f3 = (0..d)
        .map(|f| in_overlap(nb, &all, f).len())
        .min()
        .map_or(T::zero(), |c| ratio(c, n));

    let mut remaining = all;
    let mut features: Vec<usize> = (0..d).collect();
    while !remaining.is_empty() && !features.is_empty() {
        let (pos, kept) = features
            .iter()
            .enumerate()
            .map(|(p, &f)| (p, in_overlap(nb, &remaining, f)))
            .min_by_key(|(p, kept)| (kept.len(), *p))
            .expect("features is non-empty");
        remaining = kept;
        features.remove(pos);
    }
    (f3, ratio(remaining.len(), n))
}

fn prototypes<T: Scalar>(nb: &Neighborhood<T>, rng: &mut ChaCha8Rng) -> (Vec<Vec<T>>, Vec<ClassId>) {
    let members: [Vec<usize>; 2] =
        [0u8, 1].map(|c| (0..nb.len()).filter(|&i| nb.y[i] == c).collect());
    let mut points = Vec::with_capacity(nb.len());
    let mut labels = Vec::with_capacity(nb.len());
    for i in 0..nb.len() {
        let pool = &members[nb.y[i] as usize];
        let a = nb.x.row(pool[rng.gen_range(0..pool.len())]);
        let b = nb.x.row(pool[rng.gen_range(0..pool.len())]);
        let t = T::lit(rng.gen::<f64>());
        points.push(a.iter().zip(b).map(|(&u, &v)| u + t * (v - u)).collect());
        labels.push(nb.y[i]);
    }
    (points, labels)
}

/// Interpolation prototypes, one per neighborhood row, each between two
/// random rows of the same class. `stream` separates independent draws.
pub fn interpolation_prototypes<T: Scalar>(
    nb: &Neighborhood<T>,
    seed: u64,
    stream: u64,
) -> (Vec<Vec<T>>, Vec<ClassId>) {
    let mut rng = ChaCha8Rng::seed_from_u64(nb.draw_key(seed));
    rng.set_stream(stream);
    prototypes(nb, &mut rng)
}

/// (L2, L3): training error of a linear SVM on the neighborhood and its
/// error on interpolated prototypes.
pub fn linearity_measures<T: Scalar>(nb: &Neighborhood<T>, seed: u64) -> Result<(T, T)> {
    if nb.is_single_class() {
        return Ok((T::zero(), T::zero()));
    }
    let svm = learners::fit(&ModelSpec::new(ModelKind::LinearSvm, seed), &nb.x, &nb.y, None)?;
    let n = nb.len();
    let train_err = (0..n)
        .filter(|&i| svm.predict(nb.x.row(i)).ok() != Some(nb.y[i]))
        .count();
    let (protos, labels) = interpolation_prototypes(nb, seed, 0);
    let proto_err = protos
        .iter()
        .zip(&labels)
        .filter(|(p, &c)| svm.predict(p).ok() != Some(c))
        .count();
    Ok((ratio(train_err, n), ratio(proto_err, protos.len())))
}

/// Minimum spanning tree by Prim's algorithm over squared Euclidean
/// distances. Equal weights are ordered by the edge's `(min, max)` endpoint
/// pair, which makes the tree unique. Edges come back as `(i, j)` with `i < j`.
pub fn mst_prim<T: Scalar>(x: &Matrix<T>) -> Vec<(usize, usize)> {
    let n = x.n_rows();
    if n < 2 {
        return Vec::new();
    }
    type Key<T> = (T, usize, usize);
    let less = |a: &Key<T>, b: &Key<T>| scalar::cmp(a.0, b.0).then((a.1, a.2).cmp(&(b.1, b.2))).is_lt();
    let mut in_tree = vec![false; n];
    let mut best: Vec<Option<Key<T>>> = vec![None; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut u = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let key = (scalar::sq_dist(x.row(u), x.row(v)), u.min(v), u.max(v));
            if best[v].as_ref().is_none_or(|b| less(&key, b)) {
                best[v] = Some(key);
            }
        }
        let next = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| {
                let (ka, kb) = (best[a].as_ref().unwrap(), best[b].as_ref().unwrap());
                if less(ka, kb) {
                    std::cmp::Ordering::Less
                } else if less(kb, ka) {
                    std::cmp::Ordering::Greater
                } else {
                    a.cmp(&b)
                }
            })
            .expect("a vertex remains outside the tree");
        let (_, i, j) = best[next].unwrap();
        edges.push((i, j));
        in_tree[next] = true;
        u = next;
    }
    edges
}

/// N1 from an MST edge list.
pub fn borderline_fraction(y: &[ClassId], mst: &[(usize, usize)]) -> f64 {
    let mut flagged = vec![false; y.len()];
    for &(i, j) in mst {
        if y[i] != y[j] {
            flagged[i] = true;
            flagged[j] = true;
        }
    }
    flagged.iter().filter(|&&f| f).count() as f64 / y.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborMeasures<T> {
    pub n1: T,
    pub n2: T,
    pub n3: T,
    pub n4: T,
    pub lsc: T,
}

/// Nearest row to `i` among `candidates` (ties to the lower index).
fn nearest<T: Scalar>(d: &[Vec<T>], i: usize, mut candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let first = candidates.next()?;
    Some(candidates.fold(first, |best, j| if d[i][j] < d[i][best] { j } else { best }))
}

/// (N1, N2, N3, N4, LSC). Single-class neighborhoods give `(0, 0, 0, 0, 1)`.
pub fn neighbor_measures<T: Scalar>(nb: &Neighborhood<T>, seed: u64) -> NeighborMeasures<T> {
    if nb.is_single_class() {
        return NeighborMeasures {
            n1: T::zero(),
            n2: T::zero(),
            n3: T::zero(),
            n4: T::zero(),
            lsc: T::one(),
        };
    }
    let n = nb.len();
    let y = &nb.y;
    let d2 = nb.sq_distances();

    let n1 = T::lit(borderline_fraction(y, &mst_prim(&nb.x)));

    let (mut intra, mut extra) = (T::zero(), T::zero());
    let mut loo_err = 0;
    let mut local_sets = 0usize;
    for i in 0..n {
        let others = (0..n).filter(|&j| j != i);
        if let Some(j) = nearest(&d2, i, others.clone().filter(|&j| y[j] == y[i])) {
            intra = intra + d2[i][j].sqrt();
        }
        let enemy = nearest(&d2, i, others.clone().filter(|&j| y[j] != y[i]))
            .expect("both classes present");
        extra = extra + d2[i][enemy].sqrt();
        let nn = nearest(&d2, i, others).expect("n >= 2");
        if y[nn] != y[i] {
            loo_err += 1;
        }
        let radius = d2[i][enemy];
        local_sets += (0..n).filter(|&j| y[j] == y[i] && d2[i][j] < radius).count();
    }
    let r = intra / extra.max(T::lit(N2_GUARD));
    let n2 = r / (T::one() + r);

    let (protos, labels) = interpolation_prototypes(nb, seed, 1);
    let n4_err = protos
        .iter()
        .zip(&labels)
        .filter(|(p, &c)| {
            let nn = (0..n)
                .map(|j| (scalar::sq_dist(p, nb.x.row(j)), j))
                .min_by(|a, b| scalar::cmp(a.0, b.0).then(a.1.cmp(&b.1)))
                .expect("n >= 2")
                .1;
            y[nn] != c
        })
        .count();

    NeighborMeasures {
        n1,
        n2,
        n3: ratio(loo_err, n),
        n4: ratio(n4_err, protos.len()),
        lsc: ratio(local_sets, n * n),
    }
}

/// (Den, C1, C2).
pub fn balance_network_measures<T: Scalar>(nb: &Neighborhood<T>) -> (T, T, T) {
    let n = nb.len();
    let d2 = nb.sq_distances();
    let max = d2.iter().flatten().copied().fold(T::zero(), T::max).sqrt();
    let thr = T::lit(DENSITY_THRESHOLD);
    let mut edges = 0usize;
    for i in 0..n {
        for j in i + 1..n {
            if nb.y[i] != nb.y[j] {
                continue;
            }
            let norm = if max > T::zero() { d2[i][j].sqrt() / max } else { T::zero() };
            if norm < thr {
                edges += 1;
            }
        }
    }
    let den = if n > 1 { ratio(2 * edges, n * (n - 1)) } else { T::zero() };

    let counts = class_counts(&nb.y);
    let c1 = -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p: T = ratio(c, n);
            p * p.ln()
        })
        .sum::<T>()
        / T::lit(2.0f64.ln());
    let (maj, min) = (counts[0].max(counts[1]), counts[0].min(counts[1]));
    let c2 = if min == 0 {
        T::from_count(n)
    } else {
        ratio::<T>(maj, min).min(T::from_count(n))
    };
    (den, c1.max(T::zero()), c2)
}

/// All twelve measures over one neighborhood.
pub fn measure<T: Scalar>(nb: &Neighborhood<T>, seed: u64) -> Result<MetaFeatureVector<T>> {
    let (f3, f4) = feature_measures(nb);
    let (l2, l3) = linearity_measures(nb, seed)?;
    let nm = neighbor_measures(nb, seed);
    let (den, c1, c2) = balance_network_measures(nb);
    Ok(MetaFeatureVector([
        f3, f4, l2, l3, nm.n1, nm.n2, nm.n3, nm.n4, nm.lsc, den, c1, c2,
    ]))
}

/// Meta-features of query `x` over its `k_prime` nearest training samples.
/// `k_prime` is clamped to the training size.
pub fn extract_meta_features<T: Scalar>(
    x: &[T],
    train: &Dataset<T>,
    k_prime: usize,
    seed: u64,
) -> Result<MetaFeatureVector<T>> {
    let k = k_prime.min(train.n_samples());
    let nb = neighbors::knn(x, &train.features, k)?;
    measure(&Neighborhood::from_dataset(train, &nb.indices)?, seed)
}
