//! Meta-learning layer: per-sample meta-labels, the multi-label meta-dataset,
//! the binary-relevance tree ensemble and per-query model recommendation.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{self, MetaFeatureVector, META_FEATURE_NAMES, N_META_FEATURES};
use crate::dataset::{stratified_kfold, ClassId, Dataset, Scaler};
use crate::error::{Error, Result};
use crate::learners::{self, FittedClassifier, ModelKind, ModelSpec, TreeParams, PORTFOLIO_SIZE};
use crate::matrix::Matrix;
use crate::metrics;
use crate::olp::{self, OlpConfig, OlpOutput, OlpState};
use crate::scalar::Scalar;
use crate::seed;

/// Folds used for the meta-classifier grid search.
pub const META_CV_FOLDS: usize = 10;

/// Settings shared by meta-data construction and evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub olp: OlpConfig,
    /// Neighborhood size for meta-feature extraction.
    pub k_prime: usize,
    /// Probability threshold for meta-label relevance.
    pub t: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            olp: OlpConfig::default(),
            k_prime: 50,
            t: 0.7,
            folds: 5,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Seed of one evaluation query, independent of scheduling.
    pub fn query_seed(&self, dataset: &str, fold: usize, sample: usize) -> u64 {
        seed::derive(self.seed, &[seed::hash_str(dataset), fold as u64, sample as u64])
    }

    /// Model spec used for portfolio member `j` on a query.
    pub fn model_spec(&self, query_seed: u64, j: usize) -> ModelSpec {
        let kind = ModelKind::PORTFOLIO[j];
        ModelSpec::new(kind, seed::derive(query_seed, &[j as u64]))
    }
}

/// `u_j` is set iff output `j` is correct with true-class probability above `t`.
pub fn label_relevance<T: Scalar>(results: &[OlpOutput<T>], y_true: ClassId, t: f64) -> [bool; PORTFOLIO_SIZE] {
    assert_eq!(results.len(), PORTFOLIO_SIZE, "one output per portfolio model");
    std::array::from_fn(|j| {
        let r = &results[j];
        r.label == y_true && r.proba[y_true as usize].as_f64() > t
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Origin {
    pub dataset: String,
    pub fold: usize,
    pub sample: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MetaInstance<T> {
    pub v: MetaFeatureVector<T>,
    pub u: [bool; PORTFOLIO_SIZE],
    pub origin: Origin,
}

impl<T> MetaInstance<T> {
    pub fn is_indistinctive(&self) -> bool {
        self.u.iter().all(|&b| b) || self.u.iter().all(|&b| !b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MetaDataset<T> {
    pub instances: Vec<MetaInstance<T>>,
    pub portfolio: [ModelKind; PORTFOLIO_SIZE],
}

impl<T: Scalar> Default for MetaDataset<T> {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = ["dataset", "fold", "sample"].iter().map(|s| s.to_string()).collect();
    h.extend(META_FEATURE_NAMES.iter().map(|s| s.to_string()));
    h.extend(ModelKind::PORTFOLIO.iter().map(|k| format!("u_{}", k.short_name())));
    h
}

impl<T: Scalar> MetaDataset<T> {
    pub fn new(instances: Vec<MetaInstance<T>>) -> Self {
        Self {
            instances,
            portfolio: ModelKind::PORTFOLIO,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Number of relevant instances per label.
    pub fn positive_counts(&self) -> [usize; PORTFOLIO_SIZE] {
        std::array::from_fn(|j| self.instances.iter().filter(|i| i.u[j]).count())
    }

    pub fn features(&self) -> Matrix<T> {
        let rows: Vec<&[T]> = self.instances.iter().map(|i| i.v.as_slice()).collect();
        Matrix::from_rows(&rows).unwrap_or_else(|_| Matrix::zeros(0, N_META_FEATURES))
    }

    pub fn label_column(&self, j: usize) -> Vec<ClassId> {
        self.instances.iter().map(|i| u8::from(i.u[j])).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self::new(indices.iter().map(|&i| self.instances[i].clone()).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(csv_header())?;
        for inst in &self.instances {
            let mut rec = vec![
                inst.origin.dataset.clone(),
                inst.origin.fold.to_string(),
                inst.origin.sample.to_string(),
            ];
            rec.extend(inst.v.0.iter().map(|v| v.to_string()));
            rec.extend(inst.u.iter().map(|&b| u8::from(b).to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let header: Vec<String> = input.headers()?.iter().map(str::to_string).collect();
        if header != csv_header() {
            return Err(Error::Parse {
                line: 1,
                msg: "unexpected meta-dataset header".into(),
            });
        }
        let mut instances = Vec::new();
        for (row, rec) in input.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let bad = |what: &str| Error::Parse {
                line,
                msg: format!("invalid {what}"),
            };
            let int = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(&csv_header()[i]));
            let mut v = [T::zero(); N_META_FEATURES];
            for (k, slot) in v.iter_mut().enumerate() {
                *slot = rec[3 + k].parse::<T>().map_err(|_| bad(META_FEATURE_NAMES[k]))?;
            }
            let mut u = [false; PORTFOLIO_SIZE];
            for (j, slot) in u.iter_mut().enumerate() {
                *slot = match &rec[3 + N_META_FEATURES + j] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("relevance bit")),
                };
            }
            instances.push(MetaInstance {
                v: MetaFeatureVector(v),
                u,
                origin: Origin {
                    dataset: rec[0].to_string(),
                    fold: int(1)?,
                    sample: int(2)?,
                },
            });
        }
        Ok(Self::new(instances))
    }
}

/// Drops instances whose labels are all relevant or all irrelevant.
pub fn filter_indistinctive<T: Scalar>(md: MetaDataset<T>) -> MetaDataset<T> {
    MetaDataset {
        instances: md.instances.into_iter().filter(|i| !i.is_indistinctive()).collect(),
        portfolio: md.portfolio,
    }
}

/// One cross-validation fold, scaled to the unit cube of its training split.
#[derive(Clone, Debug)]
pub struct FoldContext<T> {
    pub fold: usize,
    pub state: OlpState<T>,
    pub test_x: Matrix<T>,
    pub test_y: Vec<ClassId>,
    /// Row index in the original dataset of each test row.
    pub test_indices: Vec<usize>,
}

/// Stratified folds, min-max scaling fit on each training split, and the
/// offline OLP phase per fold.
pub fn prepare_folds<T: Scalar>(ds: &Dataset<T>, cfg: &PipelineConfig) -> Result<Vec<FoldContext<T>>> {
    let splits = stratified_kfold(ds, cfg.folds, seed::derive(cfg.seed, &[seed::hash_str(&ds.name)]))?;
    prepare_split_folds(ds, &splits, cfg)
}

/// Like [`prepare_folds`] but with caller-supplied splits.
pub fn prepare_split_folds<T: Scalar>(
    ds: &Dataset<T>,
    splits: &[crate::dataset::FoldSplit],
    cfg: &PipelineConfig,
) -> Result<Vec<FoldContext<T>>> {
    splits
        .iter()
        .map(|split| {
            let mut train = ds.subset(&split.train_indices);
            let scaler = Scaler::fit(&train.features);
            train.features = scaler.apply(&train.features);
            let test_x = scaler.apply(&ds.features.select_rows(&split.test_indices));
            Ok(FoldContext {
                fold: split.fold_id,
                state: olp::offline(train, &cfg.olp)?,
                test_x,
                test_y: split.test_indices.iter().map(|&i| ds.labels[i]).collect(),
                test_indices: split.test_indices.clone(),
            })
        })
        .collect()
}

/// Everything the pipeline computes for one evaluation sample with the five
/// portfolio models. Pools are not retained.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleEvaluation<T> {
    pub fold: usize,
    pub sample: usize,
    pub y_true: ClassId,
    pub query_seed: u64,
    pub borderline: bool,
    /// Meta-features; present for borderline samples only.
    pub v: Option<MetaFeatureVector<T>>,
    /// Output of each portfolio model, in portfolio order.
    pub outputs: Vec<OlpOutput<T>>,
}

impl<T: Scalar> SampleEvaluation<T> {
    pub fn relevance(&self, t: f64) -> [bool; PORTFOLIO_SIZE] {
        label_relevance(&self.outputs, self.y_true, t)
    }
}

/// Evaluates row `row` of a fold with every portfolio model.
pub fn evaluate_sample<T: Scalar>(
    ctx: &FoldContext<T>,
    dataset: &str,
    row: usize,
    cfg: &PipelineConfig,
) -> Result<SampleEvaluation<T>> {
    let x = ctx.test_x.row(row);
    let sample = ctx.test_indices[row];
    let query_seed = cfg.query_seed(dataset, ctx.fold, sample);
    let borderline = ctx.state.is_borderline(x)?;
    let (v, outputs) = if borderline {
        let v = complexity::extract_meta_features(x, &ctx.state.train, cfg.k_prime, query_seed)?;
        let outputs = (0..PORTFOLIO_SIZE)
            .map(|j| olp::classify_with_model(&ctx.state, x, &cfg.model_spec(query_seed, j)).map(OlpOutput::without_pool))
            .collect::<Result<Vec<_>>>()?;
        (Some(v), outputs)
    } else {
        (None, vec![ctx.state.knn_output(x)?; PORTFOLIO_SIZE])
    };
    Ok(SampleEvaluation {
        fold: ctx.fold,
        sample,
        y_true: ctx.test_y[row],
        query_seed,
        borderline,
        v,
        outputs,
    })
}

/// Portfolio evaluation of every sample of `ds`, ordered by fold then row.
pub fn evaluate_portfolio<T: Scalar>(ds: &Dataset<T>, cfg: &PipelineConfig) -> Result<Vec<SampleEvaluation<T>>> {
    let folds = prepare_folds(ds, cfg)?;
    evaluate_folds(&folds, &ds.name, cfg)
}

pub fn evaluate_folds<T: Scalar>(
    folds: &[FoldContext<T>],
    dataset: &str,
    cfg: &PipelineConfig,
) -> Result<Vec<SampleEvaluation<T>>> {
    let jobs: Vec<(usize, usize)> = folds
        .iter()
        .enumerate()
        .flat_map(|(f, ctx)| (0..ctx.test_y.len()).map(move |r| (f, r)))
        .collect();
    jobs.par_iter()
        .map(|&(f, r)| evaluate_sample(&folds[f], dataset, r, cfg))
        .collect()
}

/// Meta-instances of the borderline samples of one evaluated dataset,
/// before indistinctive filtering.
pub fn meta_instances<T: Scalar>(dataset: &str, evals: &[SampleEvaluation<T>], t: f64) -> Vec<MetaInstance<T>> {
    evals
        .iter()
        .filter_map(|e| {
            e.v.map(|v| MetaInstance {
                v,
                u: e.relevance(t),
                origin: Origin {
                    dataset: dataset.to_string(),
                    fold: e.fold,
                    sample: e.sample,
                },
            })
        })
        .collect()
}

/// Meta-dataset over several problems. Datasets that cannot be folded are
/// skipped with a warning.
pub fn build_meta_dataset<T: Scalar>(datasets: &[Dataset<T>], cfg: &PipelineConfig) -> Result<MetaDataset<T>> {
    if datasets.is_empty() {
        return Err(Error::Config("meta-dataset needs at least one dataset".into()));
    }
    let mut instances = Vec::new();
    for ds in datasets {
        match evaluate_portfolio(ds, cfg) {
            Ok(evals) => instances.extend(meta_instances(&ds.name, &evals, cfg.t)),
            Err(e @ Error::Stratification(_)) => log::warn!("skipping {}: {e}", ds.name),
            Err(e) => return Err(e),
        }
    }
    Ok(filter_indistinctive(MetaDataset::new(instances)))
}

/// The 36 grid points, ordered from least to most complex: shallow before
/// deep, large leaves before small, strong pruning before weak.
pub fn meta_grid() -> Vec<TreeParams> {
    let mut grid = Vec::with_capacity(36);
    for max_depth in [Some(3), Some(5), Some(7), None] {
        for min_samples_leaf in [10, 5, 1] {
            for min_impurity_decrease in [0.01, 0.001, 0.0] {
                grid.push(TreeParams {
                    max_depth,
                    min_impurity_decrease,
                    min_samples_leaf,
                });
            }
        }
    }
    grid
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub positives: usize,
    pub negatives: usize,
    /// The label had a single class, so its tree is a constant predictor.
    pub constant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MetaClassifier<T> {
    pub portfolio: [ModelKind; PORTFOLIO_SIZE],
    pub trees: Vec<FittedClassifier<T>>,
    pub grid_choice: TreeParams,
    /// Mean cross-validated precision of the winning grid point.
    pub cv_precision: f64,
    pub training_stats: Vec<LabelStats>,
}

fn fit_label_trees<T: Scalar>(x: &Matrix<T>, labels: &[Vec<ClassId>], params: &TreeParams) -> Vec<FittedClassifier<T>> {
    labels
        .iter()
        .map(|y| {
            let cw = learners::balanced_class_weights(y);
            let w: Vec<T> = y.iter().map(|&c| T::lit(cw[c as usize])).collect();
            learners::fit_tree_unchecked(x, y, &w, params)
        })
        .collect()
}

fn predict_sets<T: Scalar>(trees: &[FittedClassifier<T>], x: &Matrix<T>) -> Vec<Vec<bool>> {
    x.rows()
        .map(|r| {
            trees
                .iter()
                .map(|t| t.predict(r).expect("meta-feature width matches") == 1)
                .collect()
        })
        .collect()
}

/// Mean example-based precision of `params` over `folds` folds of `md`.
fn cv_precision<T: Scalar>(
    x: &Matrix<T>,
    labels: &[Vec<ClassId>],
    truth: &[Vec<bool>],
    folds: &[Vec<usize>],
    params: &TreeParams,
) -> f64 {
    let n = truth.len();
    let mut total = 0.0;
    for test in folds {
        let mut is_test = vec![false; n];
        test.iter().for_each(|&i| is_test[i] = true);
        let train: Vec<usize> = (0..n).filter(|&i| !is_test[i]).collect();
        let tx = x.select_rows(&train);
        let tl: Vec<Vec<ClassId>> = labels.iter().map(|y| train.iter().map(|&i| y[i]).collect()).collect();
        let trees = fit_label_trees(&tx, &tl, params);
        let pred = predict_sets(&trees, &x.select_rows(test));
        let held: Vec<Vec<bool>> = test.iter().map(|&i| truth[i].clone()).collect();
        total += metrics::multilabel_precision(&held, &pred);
    }
    total / folds.len() as f64
}

/// Shuffled, near-equal folds over `n` items.
fn meta_folds(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    order.iter().enumerate().for_each(|(p, &i)| folds[p % k].push(i));
    folds
}

/// Trains the binary-relevance ensemble. The tree hyperparameters are shared
/// by all labels and picked by 10-fold cross-validated precision; ties go to
/// the least complex grid point.
pub fn train_meta<T: Scalar>(md: &MetaDataset<T>, seed: u64) -> Result<MetaClassifier<T>> {
    if md.is_empty() {
        return Err(Error::Config("cannot train on an empty meta-dataset".into()));
    }
    let x = md.features();
    let labels: Vec<Vec<ClassId>> = (0..PORTFOLIO_SIZE).map(|j| md.label_column(j)).collect();
    let truth: Vec<Vec<bool>> = md.instances.iter().map(|i| i.u.to_vec()).collect();
    let grid = meta_grid();
    let k = META_CV_FOLDS.min(md.len());
    let (choice, score) = if k < 2 {
        (grid[0], f64::NAN)
    } else {
        let folds = meta_folds(md.len(), k, seed);
        let scores: Vec<f64> = grid
            .par_iter()
            .map(|p| cv_precision(&x, &labels, &truth, &folds, p))
            .collect();
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let at = scores.iter().position(|&s| s >= best - 1e-12).expect("grid is non-empty");
        (grid[at], scores[at])
    };
    let training_stats = labels
        .iter()
        .map(|y| {
            let positives = y.iter().filter(|&&c| c == 1).count();
            let negatives = y.len() - positives;
            LabelStats {
                positives,
                negatives,
                constant: positives == 0 || negatives == 0,
            }
        })
        .collect();
    Ok(MetaClassifier {
        portfolio: md.portfolio,
        trees: fit_label_trees(&x, &labels, &choice),
        grid_choice: choice,
        cv_precision: score,
        training_stats,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub chosen: usize,
    pub relevant_set: [bool; PORTFOLIO_SIZE],
    pub probabilities: [f64; PORTFOLIO_SIZE],
    pub fallback_used: bool,
}

impl Recommendation {
    /// Highest probability among the relevant labels, or among all labels
    /// when none is relevant. Ties go to the lowest index.
    pub fn from_scores(probabilities: [f64; PORTFOLIO_SIZE], relevant_set: [bool; PORTFOLIO_SIZE]) -> Self {
        let fallback_used = !relevant_set.iter().any(|&b| b);
        let mut chosen = None::<usize>;
        for j in 0..PORTFOLIO_SIZE {
            if !(fallback_used || relevant_set[j]) {
                continue;
            }
            if chosen.map_or(true, |c| probabilities[j] > probabilities[c]) {
                chosen = Some(j);
            }
        }
        Self {
            chosen: chosen.expect("at least one candidate"),
            relevant_set,
            probabilities,
            fallback_used,
        }
    }

    pub fn chosen_kind(&self) -> ModelKind {
        ModelKind::PORTFOLIO[self.chosen]
    }
}

impl<T: Scalar> MetaClassifier<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mc: Self = serde_json::from_str(text)?;
        if mc.trees.len() != PORTFOLIO_SIZE {
            return Err(Error::Config(format!(
                "meta-classifier has {} trees, expected {PORTFOLIO_SIZE}",
                mc.trees.len()
            )));
        }
        Ok(mc)
    }

    /// Relevant set per tree plus each tree's positive-class probability.
    pub fn predict_labels(&self, v: &MetaFeatureVector<T>) -> ([bool; PORTFOLIO_SIZE], [f64; PORTFOLIO_SIZE]) {
        let mut relevant = [false; PORTFOLIO_SIZE];
        let mut probs = [0.0; PORTFOLIO_SIZE];
        for (j, tree) in self.trees.iter().enumerate() {
            let p = tree.predict_proba(v.as_slice()).expect("meta-feature width matches");
            relevant[j] = learners::decide(p) == 1;
            probs[j] = p[1].as_f64();
        }
        (relevant, probs)
    }

    /// Gini importances of each label's tree, one row per portfolio model.
    pub fn feature_importances(&self) -> Vec<[f64; N_META_FEATURES]> {
        self.trees
            .iter()
            .map(|t| {
                let imp = t.gini_importances().unwrap_or_else(|_| vec![T::zero(); N_META_FEATURES]);
                std::array::from_fn(|k| imp[k].as_f64())
            })
            .collect()
    }
}

pub fn recommend<T: Scalar>(mc: &MetaClassifier<T>, v: &MetaFeatureVector<T>) -> Recommendation {
    let (relevant, probs) = mc.predict_labels(v);
    Recommendation::from_scores(probs, relevant)
}

/// Full generalization step for one scaled query. Easy queries get the k-NN
/// answer and no recommendation.
pub fn classify_recommended<T: Scalar>(
    state: &OlpState<T>,
    mc: &MetaClassifier<T>,
    x: &[T],
    cfg: &PipelineConfig,
    query_seed: u64,
) -> Result<(OlpOutput<T>, Option<Recommendation>)> {
    if !state.is_borderline(x)? {
        return Ok((state.knn_output(x)?, None));
    }
    let v = complexity::extract_meta_features(x, &state.train, cfg.k_prime, query_seed)?;
    let rec = recommend(mc, &v);
    let out = olp::classify_with_model(state, x, &cfg.model_spec(query_seed, rec.chosen))?;
    Ok((out, Some(rec)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn out(label: u8, p1: f64) -> OlpOutput<f64> {
        OlpOutput {
            label,
            proba: [1.0 - p1, p1],
            pool_used: true,
            pool: None,
        }
    }

    #[test]
    fn relevance_threshold() {
        let outs = [out(1, 0.8), out(1, 0.6), out(0, 0.0), out(1, 0.7), out(0, 0.4)];
        assert_eq!(label_relevance(&outs, 1, 0.7), [true, false, false, false, false]);
        assert_eq!(label_relevance(&outs, 0, 0.7), [false, false, true, false, false]);
    }

    fn inst(u: [bool; 5]) -> MetaInstance<f64> {
        MetaInstance {
            v: MetaFeatureVector([0.5; N_META_FEATURES]),
            u,
            origin: Origin {
                dataset: "d".into(),
                fold: 0,
                sample: 0,
            },
        }
    }

    #[test]
    fn filter_drops_uniform_labelsets() {
        let md = MetaDataset::new(vec![inst([true; 5]), inst([false; 5]), inst([false, true, false, true, false])]);
        let f = filter_indistinctive(md);
        assert_eq!(f.len(), 1);
        assert_eq!(filter_indistinctive(f.clone()), f);
    }

    #[test]
    fn recommendation_rules() {
        let r = Recommendation::from_scores([0.2, 0.9, 0.4, 0.6, 0.3], [false, true, false, true, false]);
        assert_eq!((r.chosen, r.fallback_used), (1, false));
        let r = Recommendation::from_scores([0.2, 0.1, 0.7, 0.6, 0.3], [false; 5]);
        assert_eq!((r.chosen, r.fallback_used), (2, true));
        let r = Recommendation::from_scores([0.8, 0.8, 0.1, 0.1, 0.1], [true, true, false, false, false]);
        assert_eq!(r.chosen, 0);
    }

    #[test]
    fn csv_round_trip() {
        let mut a = inst([false, true, false, true, true]);
        a.v.0[3] = 0.1 + 0.2;
        a.origin.sample = 17;
        let md = MetaDataset::new(vec![a, inst([true, false, false, false, false])]);
        let mut buf = Vec::new();
        md.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "dataset,fold,sample,F3,F4,L2,L3,N1,N2,N3,N4,LSC,Den,C1,C2,u_perceptron,u_ds,u_dt,u_lsvm,u_gsvm\n"
        ));
        assert_eq!(MetaDataset::<f64>::read_csv(&buf[..]).unwrap(), md);
    }

    #[test]
    fn grid_has_36_points_simplest_first() {
        let g = meta_grid();
        assert_eq!(g.len(), 36);
        assert_eq!(g[0].max_depth, Some(3));
        assert_eq!(g[0].min_samples_leaf, 10);
        assert_eq!(g[35].max_depth, None);
    }

    #[test]
    fn constant_scores_pick_simplest_triple() {
        // Every label is always relevant except the last: nothing to learn.
        let md = MetaDataset::new((0..30).map(|_| inst([true, true, true, true, false])).collect());
        let mc = train_meta(&md, 1).unwrap();
        assert_eq!(mc.grid_choice, meta_grid()[0]);
        assert!(mc.training_stats.iter().all(|s| s.constant));
    }
}
