use olprec::complexity::{self, MetaFeatureVector, Neighborhood};
use olprec::dataset::{parse_keel, stratified_kfold_labels};
use olprec::metarec::{filter_indistinctive, MetaDataset, MetaInstance, Origin, Recommendation};
use olprec::metrics::{self, ConfusionCounts, Direction};
use olprec::{neighbors, sgh, Dataset, Matrix, Scaler};
use proptest::prelude::*;

/// Labelled points on a grid of `levels` values per axis, both classes present.
fn labelled_points(
    n: std::ops::RangeInclusive<usize>,
    d: std::ops::RangeInclusive<usize>,
    levels: u32,
) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (n, d).prop_flat_map(move |(n, d)| {
        (
            prop::collection::vec(prop::collection::vec((0..levels).prop_map(move |v| v as f64 / levels as f64), d), n),
            prop::collection::vec(0u8..2, n),
        )
            .prop_map(|(x, mut y)| {
                y[0] = 0;
                y[1] = 1;
                (x, y)
            })
    })
}

fn has_contradiction(x: &[Vec<f64>], y: &[u8]) -> bool {
    (0..y.len()).any(|i| (i + 1..y.len()).any(|j| x[i] == x[j] && y[i] != y[j]))
}

fn meta_dataset(bits: Vec<[bool; 5]>) -> MetaDataset<f64> {
    MetaDataset::new(
        bits.into_iter()
            .enumerate()
            .map(|(i, u)| MetaInstance {
                v: MetaFeatureVector([i as f64; 12]),
                u,
                origin: Origin {
                    dataset: "p".into(),
                    fold: 0,
                    sample: i,
                },
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn meta_features_stay_in_range((x, y) in labelled_points(2..=60, 1..=5, 1000), seed in any::<u64>()) {
        let n = y.len() as f64;
        let nb = Neighborhood::new(Matrix::from_rows(&x).unwrap(), y, (0..x.len()).collect()).unwrap();
        let v = complexity::measure(&nb, seed).unwrap();
        for (k, m) in v.0.iter().enumerate() {
            prop_assert!(m.is_finite());
            if k == 11 {
                prop_assert!((1.0..=n).contains(m), "C2 = {m}");
            } else {
                prop_assert!((0.0..=1.0).contains(m), "{} = {m}", complexity::META_FEATURE_NAMES[k]);
            }
        }
    }

    #[test]
    fn fmeasure_forms_agree(tp in 1usize..50, fp in 0usize..50, tn in 0usize..50, fn_ in 0usize..50) {
        let c = ConfusionCounts { tp, fp, tn, fn_ };
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / (tp + fn_) as f64;
        let harmonic = 2.0 * precision * recall / (precision + recall);
        let f = metrics::fmeasure(&c);
        if tn + fp == 0 {
            prop_assert!(f.degenerate);
        } else {
            prop_assert!((f.value - harmonic).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_ignores_monotone_rescaling(
        pairs in prop::collection::vec((0u8..2, 0u32..20), 2..80)
    ) {
        let mut y: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        y[0] = 0;
        y[1] = 1;
        let s: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 20.0).collect();
        let warped: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(metrics::auc(&y, &s).value, metrics::auc(&y, &warped).value);
        let flipped: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((metrics::auc(&y, &s).value + metrics::auc(&y, &flipped).value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_is_symmetric(pairs in prop::collection::vec((0u32..10, 0u32..10), 1..30)) {
        let a: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 10.0).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.1 as f64 / 10.0).collect();
        let ab = metrics::wilcoxon(&a, &b, 0.05);
        let ba = metrics::wilcoxon(&b, &a, 0.05);
        prop_assert_eq!(ab.statistic, ba.statistic);
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        let expected = match ab.direction {
            Direction::Plus => Direction::Minus,
            Direction::Minus => Direction::Plus,
            Direction::None => Direction::None,
        };
        prop_assert_eq!(ba.direction, expected);
    }

    #[test]
    fn indistinctive_filter_is_idempotent(bits in prop::collection::vec(prop::array::uniform5(any::<bool>()), 0..60)) {
        let once = filter_indistinctive(meta_dataset(bits));
        prop_assert!(once.instances.iter().all(|i| i.u.iter().any(|&b| b) && !i.u.iter().all(|&b| b)));
        let twice = filter_indistinctive(once.clone());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn recommendation_survives_monotone_rescaling(
        p in prop::array::uniform5(0u32..20),
        relevant in prop::array::uniform5(any::<bool>()),
    ) {
        let probs = p.map(|v| v as f64 / 20.0);
        let warped = probs.map(|v| v * v * 0.5 + 0.25);
        let a = Recommendation::from_scores(probs, relevant);
        let b = Recommendation::from_scores(warped, relevant);
        prop_assert_eq!(a.chosen, b.chosen);
        prop_assert_eq!(a.fallback_used, !relevant.iter().any(|&r| r));
        if !a.fallback_used {
            prop_assert!(relevant[a.chosen]);
        }
        let best = (0..5).filter(|&j| a.fallback_used || relevant[j]).map(|j| probs[j]).fold(f64::MIN, f64::max);
        prop_assert_eq!(probs[a.chosen], best);
        prop_assert!((0..a.chosen).all(|j| !(a.fallback_used || relevant[j]) || probs[j] < best));
    }

    #[test]
    fn sgh_pool_covers_its_region((x, y) in labelled_points(2..=60, 1..=4, 6)) {
        let m = Matrix::from_rows(&x).unwrap();
        match sgh::generate(&m, &y) {
            Ok(pool) => {
                prop_assert!(!has_contradiction(&x, &y));
                prop_assert!(pool.covers(&m, &y));
                prop_assert!(!pool.is_empty() && pool.len() <= y.len());
                prop_assert_eq!(pool, sgh::generate(&m, &y).unwrap());
            }
            Err(olprec::Error::ContradictoryData(_)) => prop_assert!(has_contradiction(&x, &y)),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn knne_takes_half_from_each_class(
        (x, y) in labelled_points(2..=40, 1..=3, 50),
        k in 1usize..20,
        q in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let d = x[0].len();
        let m = Matrix::from_rows(&x).unwrap();
        let set = neighbors::knne(&q[..d], &m, &y, k).unwrap();
        let per_class = k.div_ceil(2);
        let counts = olprec::dataset::class_counts(&y);
        for c in 0..2u8 {
            let got = set.indices.iter().filter(|&&i| y[i] == c).count();
            prop_assert_eq!(got, per_class.min(counts[c as usize]));
        }
        prop_assert!(set.distances.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn scaler_maps_training_into_unit_cube(rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 3), 1..40)) {
        let m = Matrix::from_rows(&rows).unwrap();
        let scaled = Scaler::fit(&m).apply(&m);
        prop_assert!(scaled.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
        for j in 0..3 {
            let col: Vec<f64> = scaled.column(j).collect();
            let constant = rows.iter().all(|r| r[j] == rows[0][j]);
            if constant {
                prop_assert!(col.iter().all(|&v| v == 0.0));
            } else {
                prop_assert!(col.contains(&0.0) && col.contains(&1.0));
            }
        }
    }

    #[test]
    fn keel_text_round_trips(
        rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 2), 2..30),
        labels in prop::collection::vec(0u8..2, 30),
    ) {
        let mut y = labels[..rows.len()].to_vec();
        y[0] = 0;
        y[1] = 1;
        let ds = Dataset::from_parts("roundtrip", Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let back: Dataset = parse_keel(&ds.to_keel()).unwrap();
        prop_assert_eq!(back.features, ds.features);
        prop_assert_eq!(back.labels, ds.labels);
        prop_assert_eq!(back.name, ds.name);
    }

    #[test]
    fn folds_partition_and_stratify(labels in prop::collection::vec(0u8..2, 10..120), k in 2usize..6, seed in any::<u64>()) {
        let counts = olprec::dataset::class_counts(&labels);
        prop_assume!(counts[0] >= k && counts[1] >= k);
        let folds = stratified_kfold_labels(&labels, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0usize; labels.len()];
        for f in &folds {
            for &i in &f.test_indices {
                seen[i] += 1;
            }
            let mut all: Vec<usize> = f.train_indices.iter().chain(&f.test_indices).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        for c in 0..2u8 {
            let per_fold: Vec<usize> = folds
                .iter()
                .map(|f| f.test_indices.iter().filter(|&&i| labels[i] == c).count())
                .collect();
            prop_assert!(per_fold.iter().max().unwrap() - per_fold.iter().min().unwrap() <= 1);
        }
        let sizes: Vec<usize> = folds.iter().map(|f| f.test_indices.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
