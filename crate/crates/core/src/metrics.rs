//! Two-class and multi-label evaluation metrics, plus the Wilcoxon
//! signed-rank test. Class 1 is the positive (minority) class.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::ClassId;
use crate::scalar::Scalar;

/// Largest number of non-zero pairs for which the Wilcoxon p-value is
/// computed by enumerating every sign pattern.
pub const WILCOXON_EXACT_MAX: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn n(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }
}

/// A metric value that may come from a degenerate input (a class missing
/// from the ground truth).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub degenerate: bool,
}

impl Score {
    fn ok(value: f64) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }

    fn degenerate(value: f64) -> Self {
        Self {
            value,
            degenerate: true,
        }
    }
}

pub fn confusion(y_true: &[ClassId], y_pred: &[ClassId]) -> ConfusionCounts {
    assert_eq!(y_true.len(), y_pred.len(), "label vectors differ in length");
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fn_ += 1,
            (_, 1) => c.fp += 1,
            _ => c.tn += 1,
        }
    }
    c
}

pub fn accuracy(c: &ConfusionCounts) -> f64 {
    if c.n() == 0 {
        return 0.0;
    }
    (c.tp + c.tn) as f64 / c.n() as f64
}

/// `2Tp / (2Tp + Fp + Fn)`.
pub fn fmeasure(c: &ConfusionCounts) -> Score {
    if c.positives() == 0 || c.negatives() == 0 {
        return Score::degenerate(0.0);
    }
    let num = 2 * c.tp;
    Score::ok(num as f64 / (num + c.fp + c.fn_) as f64)
}

/// Geometric mean of the two class recalls.
pub fn gmean(c: &ConfusionCounts) -> Score {
    if c.positives() == 0 || c.negatives() == 0 {
        return Score::degenerate(0.0);
    }
    let tpr = c.tp as f64 / c.positives() as f64;
    let tnr = c.tn as f64 / c.negatives() as f64;
    Score::ok((tpr * tnr).sqrt())
}

/// Mann-Whitney AUC with ties counted as one half.
pub fn auc<T: Scalar>(y_true: &[ClassId], scores: &[T]) -> Score {
    assert_eq!(y_true.len(), scores.len(), "label and score vectors differ in length");
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| crate::scalar::cmp(scores[a], scores[b]));
    // Rank-sum form: mid-ranks for tied groups.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        pos_rank_sum += mid * order[i..=j].iter().filter(|&&k| y_true[k] == 1).count() as f64;
        i = j + 1;
    }
    let n_pos = y_true.iter().filter(|&&y| y == 1).count() as f64;
    let n_neg = y_true.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Score::degenerate(0.5);
    }
    Score::ok((pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

/// Example-based precision: mean over samples of `|U and P| / |P|`, where an
/// empty prediction scores 0.
pub fn multilabel_precision<L: AsRef<[bool]>>(truth: &[L], predicted: &[L]) -> f64 {
    assert_eq!(truth.len(), predicted.len(), "labelset lists differ in length");
    if truth.is_empty() {
        return 0.0;
    }
    let total: f64 = truth
        .iter()
        .zip(predicted)
        .map(|(u, p)| {
            let (u, p) = (u.as_ref(), p.as_ref());
            let n_pred = p.iter().filter(|&&b| b).count();
            if n_pred == 0 {
                return 0.0;
            }
            let hits = u.iter().zip(p).filter(|(&a, &b)| a && b).count();
            hits as f64 / n_pred as f64
        })
        .sum();
    total / truth.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// First sample tends to be larger.
    Plus,
    Minus,
    None,
}

impl Direction {
    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Plus => "+",
            Direction::Minus => "-",
            Direction::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    pub direction: Direction,
}

/// Average ranks of `values` (1-based), ties sharing their mean rank.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        order[i..=j].iter().for_each(|&k| ranks[k] = mid);
        i = j + 1;
    }
    ranks
}

/// Paired two-sided Wilcoxon signed-rank test on `a - b`.
pub fn wilcoxon(a: &[f64], b: &[f64], alpha: f64) -> TestVerdict {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return TestVerdict {
            statistic: 0.0,
            p_value: 1.0,
            significant: false,
            direction: Direction::None,
        };
    }
    let ranks = average_ranks(&diffs.iter().map(|d| d.abs()).collect::<Vec<_>>());
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let mean = total / 2.0;
    let deviation = (w_plus - mean).abs();

    let p_value = if n <= WILCOXON_EXACT_MAX {
        let extreme = (0u32..1 << n)
            .filter(|mask| {
                let w: f64 = (0..n).filter(|&i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
                (w - mean).abs() >= deviation - 1e-9
            })
            .count();
        extreme as f64 / (1u64 << n) as f64
    } else {
        let mut tie_term = 0.0;
        let mut sorted = ranks.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let nf = n as f64;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        if var <= 0.0 {
            1.0
        } else {
            let z = deviation / var.sqrt();
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            2.0 * (1.0 - normal.cdf(z))
        }
    }
    .min(1.0);

    let direction = if w_plus > w_minus {
        Direction::Plus
    } else if w_plus < w_minus {
        Direction::Minus
    } else {
        Direction::None
    };
    TestVerdict {
        statistic: w_plus.min(w_minus),
        p_value,
        significant: p_value < alpha,
        direction,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let c = ConfusionCounts {
            tp: 8,
            fp: 2,
            tn: 85,
            fn_: 5,
        };
        assert!((fmeasure(&c).value - 16.0 / 23.0).abs() < 1e-12);
        assert!((gmean(&c).value - 0.7754).abs() < 1e-4);
        assert!((accuracy(&c) - 0.93).abs() < 1e-12);
    }

    #[test]
    fn confusion_edges() {
        let c = confusion(&[1, 0, 1, 0], &[1, 0, 1, 0]);
        assert_eq!((c.fp, c.fn_), (0, 0));
        assert_eq!(accuracy(&c), 1.0);
        assert_eq!(fmeasure(&c).value, 1.0);
        assert_eq!(gmean(&c).value, 1.0);
        let c = confusion(&[1, 0, 0, 1, 0], &[1, 1, 1, 1, 1]);
        assert_eq!((c.tn, c.fp), (0, 3));
        let c = confusion(&[1, 0, 0], &[0, 0, 0]);
        assert_eq!(fmeasure(&c).value, 0.0);
        assert_eq!(gmean(&c).value, 0.0);
        assert!(gmean(&confusion(&[0, 0], &[0, 1])).degenerate);
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[1, 1, 0, 0], &[0.9, 0.8, 0.7, 0.1]).value, 1.0);
        assert_eq!(auc(&[1, 1, 0, 0], &[0.8, 0.3, 0.5, 0.1]).value, 0.75);
        assert_eq!(auc(&[1, 0, 1, 0], &[0.4; 4]).value, 0.5);
        let single = auc(&[1, 1], &[0.1, 0.2]);
        assert!(single.degenerate && single.value == 0.5);
    }

    #[test]
    fn precision_examples() {
        let u = [[true, false, false, false, false]];
        let p = [[true, true, false, false, false]];
        assert_eq!(multilabel_precision(&u, &p), 0.5);
        let u = vec![vec![true, false], vec![true, false], vec![false, true]];
        let p = vec![vec![true, false], vec![true, true], vec![false, false]];
        assert_eq!(multilabel_precision(&u, &p), 0.5);
    }

    #[test]
    fn wilcoxon_exact() {
        let zero = [0.0; 6];
        let v = wilcoxon(&[1.0, 2.0, 3.0, 4.0, 5.0], &zero[..5], 0.05);
        assert_eq!(v.p_value, 0.0625);
        assert!(!v.significant);
        let v = wilcoxon(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &zero, 0.05);
        assert_eq!(v.p_value, 0.03125);
        assert!(v.significant);
        assert_eq!(v.direction, Direction::Plus);
        let same = wilcoxon(&[0.3, 0.4], &[0.3, 0.4], 0.05);
        assert_eq!((same.p_value, same.direction), (1.0, Direction::None));
    }

    #[test]
    fn wilcoxon_normal_branch_is_symmetric() {
        let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.11).cos() * 0.5).collect();
        let ab = wilcoxon(&a, &b, 0.05);
        let ba = wilcoxon(&b, &a, 0.05);
        assert_eq!(ab.p_value, ba.p_value);
        assert_ne!(ab.direction, ba.direction);
        assert!((0.0..=1.0).contains(&ab.p_value));
    }
}
