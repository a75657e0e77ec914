//! Seeded synthetic problems: two-class sets with known border shapes and a
//! meta-corpus whose labels follow known rules.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::complexity::{MetaFeatureVector, N_META_FEATURES};
use crate::dataset::{ClassId, Dataset};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::metarec::{filter_indistinctive, MetaDataset, MetaInstance, Origin};
use crate::learners::PORTFOLIO_SIZE;

/// Shape of the class border in the first two features.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Border {
    /// `x0 + 0.5 x1 = offset`.
    Linear { offset: f64 },
    /// Checkerboard with `cells` cells per axis.
    Checkerboard { cells: usize },
    /// Disc of the given radius around the center.
    Disc { radius: f64 },
    /// `x1 = 0.5 + amplitude * sin(2 pi * periods * x0)`.
    Wave { amplitude: f64, periods: f64 },
}

impl Border {
    /// Signed score; positive inside the class-1 region.
    pub fn score(&self, p: &[f64]) -> f64 {
        let (a, b) = (p[0], p[1]);
        match *self {
            Border::Linear { offset } => a + 0.5 * b - offset,
            Border::Checkerboard { cells } => {
                let c = cells as f64;
                let ia = (a * c).floor().min(c - 1.0) as i64;
                let ib = (b * c).floor().min(c - 1.0) as i64;
                let da = ((a * c).fract() - 0.5).abs();
                let db = ((b * c).fract() - 0.5).abs();
                // Distance to the nearest cell edge.
                let edge = (0.5 - da.max(db)).max(0.0) / c;
                if (ia + ib) % 2 == 0 {
                    edge
                } else {
                    -edge
                }
            }
            Border::Disc { radius } => radius - ((a - 0.5).powi(2) + (b - 0.5).powi(2)).sqrt(),
            Border::Wave { amplitude, periods } => {
                b - 0.5 - amplitude * (2.0 * std::f64::consts::PI * periods * a).sin()
            }
        }
    }
}

/// Recipe for one synthetic two-class problem in the unit cube.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub n: usize,
    /// Majority-to-minority ratio.
    pub imbalance: f64,
    pub border: Border,
    /// Each class may spill this far (in score units) past the border.
    pub overlap: f64,
    /// Total features; features beyond the first two are uniform noise.
    pub n_features: usize,
}

/// Draws a problem: exact class sizes, each point rejection-sampled from its
/// class region widened by `overlap`.
pub fn generate(spec: &ProblemSpec, seed: u64) -> Result<Dataset<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n1 = ((spec.n as f64) / (1.0 + spec.imbalance)).round().max(2.0) as usize;
    let n0 = spec.n.saturating_sub(n1).max(2);
    let d = spec.n_features.max(2);
    let mut rows = Vec::with_capacity(n0 + n1);
    let mut labels: Vec<ClassId> = Vec::with_capacity(n0 + n1);
    for (class, count) in [(0u8, n0), (1u8, n1)] {
        let mut drawn = 0;
        while drawn < count {
            let p: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let s = spec.border.score(&p);
            let inside = if class == 1 { s > -spec.overlap } else { s < spec.overlap };
            if inside {
                rows.push(p);
                labels.push(class);
                drawn += 1;
            }
        }
    }
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new(spec.name.clone(), Matrix::from_rows(&rows)?, labels, names)
}

/// Six problems with mixed local structure: linear borders, XOR patches, a
/// disc, a wave, and two sets at 9:1 imbalance or beyond.
pub fn heterogeneous_specs(n: usize) -> Vec<ProblemSpec> {
    let spec = |name: &str, imbalance: f64, border: Border, overlap: f64, n_features: usize| ProblemSpec {
        name: name.to_string(),
        n,
        imbalance,
        border,
        overlap,
        n_features,
    };
    vec![
        spec("linear", 1.5, Border::Linear { offset: 0.75 }, 0.06, 2),
        spec("xor", 1.0, Border::Checkerboard { cells: 2 }, 0.04, 2),
        spec("linear_ir9", 9.0, Border::Linear { offset: 1.1 }, 0.05, 3),
        spec("disc", 3.0, Border::Disc { radius: 0.25 }, 0.04, 2),
        spec("checker3_ir9", 9.0, Border::Checkerboard { cells: 3 }, 0.03, 2),
        spec("wave", 2.0, Border::Wave { amplitude: 0.2, periods: 1.5 }, 0.05, 2),
    ]
}

pub fn heterogeneous_corpus(n: usize, seed: u64) -> Result<Vec<Dataset<f64>>> {
    heterogeneous_specs(n)
        .iter()
        .enumerate()
        .map(|(i, s)| generate(s, crate::seed::derive(seed, &[i as u64])))
        .collect()
}

/// Rule behind one synthetic meta-label: relevant iff feature `feature` is
/// above (or below) `threshold`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelRule {
    pub feature: usize,
    pub threshold: f64,
    pub above: bool,
}

impl LabelRule {
    pub fn relevant(&self, v: &[f64]) -> bool {
        (v[self.feature] > self.threshold) == self.above
    }
}

/// One rule per portfolio label, each on a different meta-feature.
pub fn default_label_rules() -> [LabelRule; PORTFOLIO_SIZE] {
    // Indices into F3 F4 L2 L3 N1 N2 N3 N4 LSC Den C1 C2.
    [
        LabelRule { feature: 4, threshold: 0.5, above: false },
        LabelRule { feature: 0, threshold: 0.4, above: true },
        LabelRule { feature: 11, threshold: 2.0, above: true },
        LabelRule { feature: 2, threshold: 0.6, above: false },
        LabelRule { feature: 8, threshold: 0.5, above: true },
    ]
}

/// Meta-instances with uniform features (C2 spans `[0, 4]`, the rest
/// `[0, 1]`) labelled by `rules`, after indistinctive filtering.
pub fn meta_corpus(n: usize, rules: &[LabelRule; PORTFOLIO_SIZE], seed: u64) -> MetaDataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..n)
        .map(|i| {
            let v: [f64; N_META_FEATURES] =
                std::array::from_fn(|k| if k == 11 { 4.0 * rng.gen::<f64>() } else { rng.gen::<f64>() });
            MetaInstance {
                v: MetaFeatureVector(v),
                u: std::array::from_fn(|j| rules[j].relevant(&v)),
                origin: Origin {
                    dataset: "synthetic".into(),
                    fold: 0,
                    sample: i,
                },
            }
        })
        .collect();
    filter_indistinctive(MetaDataset::new(instances))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_sizes_follow_imbalance() {
        let ds = generate(
            &ProblemSpec {
                name: "t".into(),
                n: 200,
                imbalance: 9.0,
                border: Border::Linear { offset: 1.1 },
                overlap: 0.02,
                n_features: 2,
            },
            1,
        )
        .unwrap();
        assert_eq!(ds.class_counts(), [180, 20]);
        assert!(ds.imbalance_ratio() >= 9.0);
    }

    #[test]
    fn checkerboard_alternates() {
        let b = Border::Checkerboard { cells: 2 };
        assert!(b.score(&[0.25, 0.25]) > 0.0);
        assert!(b.score(&[0.75, 0.25]) < 0.0);
        assert!(b.score(&[0.75, 0.75]) > 0.0);
        assert!(b.score(&[0.5, 0.25]).abs() < 1e-9);
    }

    #[test]
    fn corpus_is_deterministic() {
        assert_eq!(heterogeneous_corpus(80, 3).unwrap(), heterogeneous_corpus(80, 3).unwrap());
    }

    #[test]
    fn meta_corpus_follows_rules() {
        let rules = default_label_rules();
        let md = meta_corpus(300, &rules, 2);
        assert!(md.len() > 200);
        for inst in &md.instances {
            for j in 0..PORTFOLIO_SIZE {
                assert_eq!(inst.u[j], rules[j].relevant(&inst.v.0));
            }
        }
    }
}
