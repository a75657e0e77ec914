//! Leave-one-dataset-out experiment driver and CSV reports.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::complexity::{META_FEATURE_NAMES, N_META_FEATURES};
use crate::dataset::{read_keel, read_keel_partitions, ClassId, Dataset, FoldSplit};
use crate::error::{Error, Result};
use crate::learners::{ModelKind, PORTFOLIO_SIZE};
use crate::metarec::{
    self, filter_indistinctive, prepare_folds, prepare_split_folds, MetaClassifier, MetaDataset, PipelineConfig,
    Recommendation, SampleEvaluation,
};
use crate::metrics;
use crate::olp::{self, OlpConfig, OlpOutput};
use crate::seed;

/// Environment variable that replaces the configured seed list.
pub const SEED_ENV: &str = "RUN_SEED";

/// Report files written by [`emit_reports`].
pub const REPORT_FILES: [&str; 7] = [
    "per_sample.csv",
    "per_dataset.csv",
    "summary.csv",
    "feature_importances.csv",
    "selection_frequency.csv",
    "meta_precision_per_dataset.csv",
    "wilcoxon.csv",
];

/// Metrics aggregated per dataset and compared across modes.
pub const METRICS: [&str; 4] = ["accuracy", "auc", "fmeasure", "gmean"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    /// Meta-recommended model per query.
    Proposed,
    /// Original OLP with SGH subpools and MCB selection.
    SghMcb,
    Fixed(ModelKind),
    /// Oracle choice among the portfolio models; uses the true label.
    Ideal,
}

impl Mode {
    pub fn all() -> Vec<Mode> {
        let mut modes = vec![Mode::Proposed, Mode::SghMcb];
        modes.extend(ModelKind::PORTFOLIO.iter().map(|&k| Mode::Fixed(k)));
        modes.push(Mode::Ideal);
        modes
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Proposed => f.write_str("proposed"),
            Mode::SghMcb => f.write_str("sgh_mcb"),
            Mode::Fixed(k) => write!(f, "fixed:{k}"),
            Mode::Ideal => f.write_str("ideal"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Mode::Proposed),
            "sgh_mcb" => Ok(Mode::SghMcb),
            "ideal" => Ok(Mode::Ideal),
            _ => {
                let kind: ModelKind = s
                    .strip_prefix("fixed:")
                    .ok_or_else(|| Error::Config(format!("unknown mode '{s}'")))?
                    .parse()?;
                if kind.portfolio_index().is_none() {
                    return Err(Error::Config(format!("fixed mode needs a portfolio model, got '{kind}'")));
                }
                Ok(Mode::Fixed(kind))
            }
        }
    }
}

impl Serialize for Mode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `"all"` or an explicit list of dataset names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetSelection {
    All,
    Names(Vec<String>),
}

impl Serialize for DatasetSelection {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DatasetSelection::All => s.serialize_str("all"),
            DatasetSelection::Names(n) => n.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for DatasetSelection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            List(Vec<String>),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "all" => Ok(DatasetSelection::All),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("expected \"all\" or a list, got \"{w}\""))),
            Raw::List(l) => Ok(DatasetSelection::Names(l)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub datasets: DatasetSelection,
    pub seeds: Vec<u64>,
    pub m: usize,
    pub k_s: usize,
    pub k_h: usize,
    pub k_prime: usize,
    pub t: f64,
    pub sim_thr: f64,
    pub comp_thr: f64,
    pub folds: usize,
    pub modes: Vec<Mode>,
    pub output_dir: PathBuf,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
    /// Significance level of the Wilcoxon tests.
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let olp = OlpConfig::default();
        let pipe = PipelineConfig::default();
        Self {
            data_dir: PathBuf::from("data"),
            datasets: DatasetSelection::All,
            seeds: vec![0],
            m: olp.m,
            k_s: olp.k_s,
            k_h: olp.k_h,
            k_prime: pipe.k_prime,
            t: pipe.t,
            sim_thr: olp.sim_thr,
            comp_thr: olp.comp_thr,
            folds: pipe.folds,
            modes: Mode::all(),
            output_dir: PathBuf::from("runs/latest"),
            workers: None,
            alpha: 0.05,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&fs::read_to_string(path)?)?;
        cfg.apply_env()?;
        Ok(cfg)
    }

    /// Applies the `RUN_SEED` override, if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let s = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got '{v}'")))?;
            self.seeds = vec![s];
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("at least one mode is required".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.t) || !(0.0..=1.0).contains(&self.sim_thr) {
            return Err(Error::Config("t and sim_thr must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn pipeline(&self, seed: u64) -> PipelineConfig {
        PipelineConfig {
            olp: OlpConfig {
                k_s: self.k_s,
                k_h: self.k_h,
                m: self.m,
                sim_thr: self.sim_thr,
                comp_thr: self.comp_thr,
            },
            k_prime: self.k_prime,
            t: self.t,
            folds: self.folds,
            seed,
        }
    }
}

/// A dataset plus optional fixed fold assignment.
#[derive(Clone, Debug)]
pub struct DatasetSource {
    pub dataset: Dataset<f64>,
    pub splits: Option<Vec<FoldSplit>>,
}

impl From<Dataset<f64>> for DatasetSource {
    fn from(dataset: Dataset<f64>) -> Self {
        Self { dataset, splits: None }
    }
}

fn is_partition_file(stem: &str) -> bool {
    let mut parts = stem.rsplitn(3, '-');
    let last = parts.next().unwrap_or("");
    let middle = parts.next().unwrap_or("");
    parts.next().is_some()
        && middle.chars().all(|c| c.is_ascii_digit())
        && !middle.is_empty()
        && (last.ends_with("tra") || last.ends_with("tst"))
        && last[..last.len() - 3].chars().all(|c| c.is_ascii_digit())
}

/// Dataset names available under `dir`: every `<name>.dat`, every
/// `<name>/` directory and every set of `<name>-<k>-<i>tst.dat` partitions.
pub fn discover_datasets(dir: &Path, folds: usize) -> Result<Vec<String>> {
    let mut names = std::collections::BTreeSet::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(stem) = path.file_stem().map(|s| s.to_string_lossy().into_owned()) else {
            continue;
        };
        if path.is_dir() {
            names.insert(stem);
        } else if path.extension().is_some_and(|e| e == "dat") {
            if is_partition_file(&stem) {
                let suffix = format!("-{folds}-1tst");
                if let Some(base) = stem.strip_suffix(&suffix) {
                    names.insert(base.to_string());
                }
            } else {
                names.insert(stem);
            }
        }
    }
    Ok(names.into_iter().collect())
}

/// Loads `name` from `dir`, trying `<name>.dat`, `<name>/<name>.dat`, then
/// KEEL partition files in `dir` or `dir/<name>`.
pub fn load_dataset(dir: &Path, name: &str, folds: usize) -> Result<DatasetSource> {
    let sub = dir.join(name);
    for candidate in [dir.join(format!("{name}.dat")), sub.join(format!("{name}.dat"))] {
        if candidate.is_file() {
            let mut ds: Dataset<f64> = read_keel(&candidate)?;
            ds.name = name.to_string();
            return Ok(ds.into());
        }
    }
    for d in [dir, sub.as_path()] {
        if let Some((mut dataset, splits)) = read_keel_partitions::<f64>(d, name, folds)? {
            dataset.name = name.to_string();
            return Ok(DatasetSource {
                dataset,
                splits: Some(splits),
            });
        }
    }
    Err(Error::Config(format!("dataset '{name}' not found in {}", dir.display())))
}

/// Loads the configured datasets, skipping unreadable ones with a warning.
pub fn load_sources(cfg: &RunConfig) -> Result<Vec<DatasetSource>> {
    let names = match &cfg.datasets {
        DatasetSelection::All => discover_datasets(&cfg.data_dir, cfg.folds)?,
        DatasetSelection::Names(n) => n.clone(),
    };
    let mut sources = Vec::with_capacity(names.len());
    for name in names {
        match load_dataset(&cfg.data_dir, &name, cfg.folds) {
            Ok(s) => sources.push(s),
            Err(e) => log::warn!("skipping dataset {name}: {e}"),
        }
    }
    Ok(sources)
}

/// One evaluated query in one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub seed: u64,
    pub dataset: String,
    pub fold: usize,
    pub sample: usize,
    pub mode: Mode,
    pub y_true: ClassId,
    pub prediction: ClassId,
    pub proba_pos: f64,
    pub borderline: bool,
    /// Recommended model; proposed mode on borderline samples only.
    pub recommended: Option<ModelKind>,
    pub fallback_used: Option<bool>,
    /// Relevance bits predicted by the meta-classifier, e.g. `01001`.
    pub relevant_set: Option<String>,
    /// Relevance bits observed for the portfolio models.
    pub true_relevance: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub seed: u64,
    pub dataset: String,
    pub mode: Mode,
    pub n_samples: usize,
    pub accuracy: f64,
    pub accuracy_std: f64,
    pub auc: f64,
    pub auc_std: f64,
    pub fmeasure: f64,
    pub fmeasure_std: f64,
    pub gmean: f64,
    pub gmean_std: f64,
    pub meta_precision: Option<f64>,
}

impl DatasetRecord {
    pub fn metric(&self, name: &str) -> f64 {
        match name {
            "accuracy" => self.accuracy,
            "auc" => self.auc,
            "fmeasure" => self.fmeasure,
            "gmean" => self.gmean,
            _ => panic!("unknown metric {name}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub metric: String,
    pub mode: Mode,
    pub reference: Mode,
    /// Mean over datasets of the per-dataset value (seeds averaged first).
    pub mean: f64,
    /// Datasets where the reference beats this mode at two decimals.
    pub wins: Option<usize>,
    pub ties: Option<usize>,
    pub losses: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonRecord {
    pub metric: String,
    pub mode: Mode,
    pub reference: Mode,
    pub n_datasets: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    /// `+` when the reference scores higher.
    pub direction: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub seed: u64,
    pub dataset: String,
    pub n_borderline: usize,
    pub perceptron: f64,
    pub ds: f64,
    pub dt: f64,
    pub lsvm: f64,
    pub gsvm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaPrecisionRecord {
    pub seed: u64,
    pub dataset: String,
    pub n_borderline: usize,
    pub meta_precision: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunReport {
    pub samples: Vec<SampleRecord>,
    pub datasets: Vec<DatasetRecord>,
    pub summary: Vec<SummaryRecord>,
    pub wilcoxon: Vec<WilcoxonRecord>,
    /// Mean Gini importances, one row per portfolio model; empty when no
    /// meta-classifier was trained.
    pub feature_importances: Vec<[f64; N_META_FEATURES]>,
    pub selection: Vec<SelectionRecord>,
    pub meta_precision: Vec<MetaPrecisionRecord>,
}

fn bits(u: &[bool]) -> String {
    u.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str) -> Vec<bool> {
    s.chars().map(|c| c == '1').collect()
}

/// Cached per-dataset work shared by every mode and every held-out round.
struct Evaluated {
    name: String,
    evals: Vec<SampleEvaluation<f64>>,
    sgh: Option<Vec<OlpOutput<f64>>>,
}

fn evaluate_source(src: &DatasetSource, pipe: &PipelineConfig, with_sgh: bool) -> Result<Evaluated> {
    let name = &src.dataset.name;
    let folds = match &src.splits {
        Some(s) => prepare_split_folds(&src.dataset, s, pipe)?,
        None => prepare_folds(&src.dataset, pipe)?,
    };
    let evals = metarec::evaluate_folds(&folds, name, pipe)?;
    let sgh = if with_sgh {
        let jobs: Vec<(usize, usize)> = folds
            .iter()
            .enumerate()
            .flat_map(|(f, ctx)| (0..ctx.test_y.len()).map(move |r| (f, r)))
            .collect();
        let outs = jobs
            .par_iter()
            .map(|&(f, r)| {
                let ctx = &folds[f];
                olp::classify_sgh_mcb(&ctx.state, ctx.test_x.row(r), pipe.olp.sim_thr, pipe.olp.comp_thr)
                    .map(OlpOutput::without_pool)
            })
            .collect::<Result<Vec<_>>>()?;
        Some(outs)
    } else {
        None
    };
    Ok(Evaluated {
        name: name.clone(),
        evals,
        sgh,
    })
}

/// Records of one held-out dataset for every requested mode.
fn held_out_records(
    seed: u64,
    held: &Evaluated,
    mc: Option<&MetaClassifier<f64>>,
    cfg: &RunConfig,
) -> Vec<SampleRecord> {
    let mut out = Vec::with_capacity(held.evals.len() * cfg.modes.len());
    for &mode in &cfg.modes {
        for (i, e) in held.evals.iter().enumerate() {
            let mut rec: Option<Recommendation> = None;
            let output = match mode {
                Mode::Fixed(k) => &e.outputs[k.portfolio_index().expect("validated portfolio model")],
                Mode::Ideal => &e.outputs[olp::ideal_index(&e.outputs, e.y_true)],
                Mode::SghMcb => &held.sgh.as_ref().expect("sgh outputs computed")[i],
                Mode::Proposed => match (&e.v, mc) {
                    (Some(v), Some(mc)) => {
                        let r = metarec::recommend(mc, v);
                        rec = Some(r);
                        &e.outputs[r.chosen]
                    }
                    _ => &e.outputs[0],
                },
            };
            out.push(SampleRecord {
                seed,
                dataset: held.name.clone(),
                fold: e.fold,
                sample: e.sample,
                mode,
                y_true: e.y_true,
                prediction: output.label,
                proba_pos: output.proba[1],
                borderline: e.borderline,
                recommended: rec.map(|r| r.chosen_kind()),
                fallback_used: rec.map(|r| r.fallback_used),
                relevant_set: rec.map(|r| bits(&r.relevant_set)),
                true_relevance: rec.map(|_| bits(&e.relevance(cfg.t))),
            });
        }
    }
    out
}

/// Runs the full protocol on already loaded datasets.
pub fn run_lodo_on(sources: &[DatasetSource], cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    if sources.len() < 2 {
        return Err(Error::Config(format!(
            "leave-one-dataset-out needs at least 2 datasets, got {}",
            sources.len()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(sources, cfg))
}

fn run_inner(sources: &[DatasetSource], cfg: &RunConfig) -> Result<RunReport> {
    let with_sgh = cfg.modes.contains(&Mode::SghMcb);
    let with_meta = cfg.modes.contains(&Mode::Proposed);
    let mut samples = Vec::new();
    let mut importances: Vec<[f64; N_META_FEATURES]> = Vec::new();
    let mut n_classifiers = 0usize;

    for &run_seed in &cfg.seeds {
        let pipe = cfg.pipeline(run_seed);
        let evaluated: Vec<Evaluated> = sources
            .par_iter()
            .map(|s| evaluate_source(s, &pipe, with_sgh))
            .collect::<Vec<_>>()
            .into_iter()
            .zip(sources)
            .filter_map(|(r, s)| {
                r.map_err(|e| log::warn!("skipping dataset {}: {e}", s.dataset.name)).ok()
            })
            .collect();
        if evaluated.len() < 2 {
            return Err(Error::Config("fewer than 2 datasets could be evaluated".into()));
        }
        let instances: Vec<Vec<metarec::MetaInstance<f64>>> = evaluated
            .iter()
            .map(|e| metarec::meta_instances(&e.name, &e.evals, cfg.t))
            .collect();

        let rounds: Vec<(Vec<SampleRecord>, Option<MetaClassifier<f64>>)> = (0..evaluated.len())
            .into_par_iter()
            .map(|h| {
                let mc = if with_meta {
                    let md = filter_indistinctive(MetaDataset::new(
                        instances
                            .iter()
                            .enumerate()
                            .filter(|&(i, _)| i != h)
                            .flat_map(|(_, v)| v.iter().cloned())
                            .collect(),
                    ));
                    let train_seed = seed::derive(run_seed, &[seed::hash_str(&evaluated[h].name)]);
                    match metarec::train_meta(&md, train_seed) {
                        Ok(mc) => Some(mc),
                        Err(e) => {
                            log::warn!("no meta-classifier for held-out {}: {e}", evaluated[h].name);
                            None
                        }
                    }
                } else {
                    None
                };
                (held_out_records(run_seed, &evaluated[h], mc.as_ref(), cfg), mc)
            })
            .collect();

        for (recs, mc) in rounds {
            samples.extend(recs);
            if let Some(mc) = mc {
                let rows = mc.feature_importances();
                if importances.is_empty() {
                    importances = vec![[0.0; N_META_FEATURES]; PORTFOLIO_SIZE];
                }
                for (acc, row) in importances.iter_mut().zip(&rows) {
                    acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                }
                n_classifiers += 1;
            }
        }
    }
    importances
        .iter_mut()
        .for_each(|row| row.iter_mut().for_each(|v| *v /= n_classifiers as f64));
    Ok(assemble(samples, importances, cfg.alpha))
}

/// Loads the configured datasets and runs the protocol.
pub fn run_lodo(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    run_lodo_on(&load_sources(cfg)?, cfg)
}

/// Derives every aggregate from the per-sample records.
pub fn assemble(samples: Vec<SampleRecord>, feature_importances: Vec<[f64; N_META_FEATURES]>, alpha: f64) -> RunReport {
    let datasets = aggregate_datasets(&samples);
    let (summary, wilcoxon) = summarize(&datasets, alpha);
    let selection = selection_frequency(&samples);
    let meta_precision = meta_precision_per_dataset(&samples);
    RunReport {
        samples,
        datasets,
        summary,
        wilcoxon,
        feature_importances,
        selection,
        meta_precision,
    }
}

/// Groups by key, keeping first-appearance order.
fn group_by<'a, T, K: Ord + Clone>(items: &'a [T], key: impl Fn(&T) -> K) -> Vec<(K, Vec<&'a T>)> {
    let mut order: Vec<K> = Vec::new();
    let mut groups: BTreeMap<K, Vec<&T>> = BTreeMap::new();
    for it in items {
        let k = key(it);
        groups
            .entry(k.clone())
            .or_insert_with(|| {
                order.push(k);
                Vec::new()
            })
            .push(it);
    }
    order
        .into_iter()
        .map(|k| {
            let v = groups.remove(&k).expect("group exists");
            (k, v)
        })
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Labelset the recommender commits to: its relevant set, or the chosen
/// model alone when the set is empty.
fn committed_set(r: &SampleRecord) -> Option<(Vec<bool>, Vec<bool>)> {
    let truth = parse_bits(r.true_relevance.as_ref()?);
    let mut pred = parse_bits(r.relevant_set.as_ref()?);
    if !pred.iter().any(|&b| b) {
        if let Some(j) = r.recommended.and_then(ModelKind::portfolio_index) {
            pred[j] = true;
        }
    }
    Some((truth, pred))
}

fn precision_of(records: &[&SampleRecord]) -> (usize, Option<f64>) {
    let (truth, pred): (Vec<_>, Vec<_>) = records.iter().filter_map(|r| committed_set(r)).unzip();
    let n = truth.len();
    (n, (n > 0).then(|| metrics::multilabel_precision(&truth, &pred)))
}

/// Per (seed, dataset, mode): mean and sample standard deviation over folds
/// of each metric; meta-precision for the proposed mode.
pub fn aggregate_datasets(samples: &[SampleRecord]) -> Vec<DatasetRecord> {
    group_by(samples, |r| (r.seed, r.dataset.clone(), r.mode))
        .into_iter()
        .map(|((seed, dataset, mode), recs)| {
            let folds = group_by(&recs, |r| r.fold);
            let mut per_metric: [Vec<f64>; 4] = Default::default();
            for (_, fr) in &folds {
                let y: Vec<ClassId> = fr.iter().map(|r| r.y_true).collect();
                let p: Vec<ClassId> = fr.iter().map(|r| r.prediction).collect();
                let s: Vec<f64> = fr.iter().map(|r| r.proba_pos).collect();
                let c = metrics::confusion(&y, &p);
                per_metric[0].push(metrics::accuracy(&c));
                per_metric[1].push(metrics::auc(&y, &s).value);
                per_metric[2].push(metrics::fmeasure(&c).value);
                per_metric[3].push(metrics::gmean(&c).value);
            }
            let [acc, auc, fm, gm] = per_metric.map(|v| mean_std(&v));
            let meta_precision = if mode == Mode::Proposed {
                precision_of(&recs).1
            } else {
                None
            };
            DatasetRecord {
                seed,
                dataset,
                mode,
                n_samples: recs.len(),
                accuracy: acc.0,
                accuracy_std: acc.1,
                auc: auc.0,
                auc_std: auc.1,
                fmeasure: fm.0,
                fmeasure_std: fm.1,
                gmean: gm.0,
                gmean_std: gm.1,
                meta_precision,
            }
        })
        .collect()
}

fn round2(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

/// Mean per mode, win-tie-loss counts and Wilcoxon verdicts against the
/// reference mode (proposed when present, otherwise the first mode).
pub fn summarize(datasets: &[DatasetRecord], alpha: f64) -> (Vec<SummaryRecord>, Vec<WilcoxonRecord>) {
    let modes: Vec<Mode> = group_by(datasets, |r| r.mode).into_iter().map(|(m, _)| m).collect();
    let Some(&first) = modes.first() else {
        return (Vec::new(), Vec::new());
    };
    let reference = if modes.contains(&Mode::Proposed) { Mode::Proposed } else { first };
    let names: Vec<String> = group_by(datasets, |r| r.dataset.clone()).into_iter().map(|(d, _)| d).collect();

    let mut summary = Vec::new();
    let mut wilcoxon = Vec::new();
    for metric in METRICS {
        // Seed-averaged value per (mode, dataset).
        let per_mode: BTreeMap<Mode, BTreeMap<&str, f64>> = modes
            .iter()
            .map(|&m| {
                let by_ds = names
                    .iter()
                    .filter_map(|d| {
                        let vals: Vec<f64> = datasets
                            .iter()
                            .filter(|r| r.mode == m && &r.dataset == d)
                            .map(|r| r.metric(metric))
                            .collect();
                        (!vals.is_empty()).then(|| (d.as_str(), vals.iter().sum::<f64>() / vals.len() as f64))
                    })
                    .collect();
                (m, by_ds)
            })
            .collect();
        let ref_vals = &per_mode[&reference];
        for &mode in &modes {
            let vals = &per_mode[&mode];
            let mean = vals.values().sum::<f64>() / vals.len() as f64;
            let paired: Vec<(f64, f64)> = names
                .iter()
                .filter_map(|d| Some((*ref_vals.get(d.as_str())?, *vals.get(d.as_str())?)))
                .collect();
            let (wins, ties, losses) = if mode == reference {
                (None, None, None)
            } else {
                let w = paired.iter().filter(|(a, b)| round2(*a) > round2(*b)).count();
                let t = paired.iter().filter(|(a, b)| round2(*a) == round2(*b)).count();
                (Some(w), Some(t), Some(paired.len() - w - t))
            };
            summary.push(SummaryRecord {
                metric: metric.to_string(),
                mode,
                reference,
                mean,
                wins,
                ties,
                losses,
            });
            if mode != reference {
                let (a, b): (Vec<f64>, Vec<f64>) = paired.iter().copied().unzip();
                let v = metrics::wilcoxon(&a, &b, alpha);
                wilcoxon.push(WilcoxonRecord {
                    metric: metric.to_string(),
                    mode,
                    reference,
                    n_datasets: paired.len(),
                    statistic: v.statistic,
                    p_value: v.p_value,
                    significant: v.significant,
                    direction: v.direction.symbol().to_string(),
                });
            }
        }
    }
    (summary, wilcoxon)
}

fn proposed_borderline(samples: &[SampleRecord]) -> Vec<((u64, String), Vec<&SampleRecord>)> {
    let proposed: Vec<&SampleRecord> = samples.iter().filter(|r| r.mode == Mode::Proposed).collect();
    group_by(&proposed, |r| (r.seed, r.dataset.clone()))
        .into_iter()
        .map(|(k, v)| (k, v.into_iter().copied().filter(|r| r.recommended.is_some()).collect()))
        .collect()
}

/// Share of borderline samples for which each model was recommended.
pub fn selection_frequency(samples: &[SampleRecord]) -> Vec<SelectionRecord> {
    proposed_borderline(samples)
        .into_iter()
        .map(|((seed, dataset), recs)| {
            let n = recs.len();
            let freq = |k: ModelKind| {
                if n == 0 {
                    0.0
                } else {
                    recs.iter().filter(|r| r.recommended == Some(k)).count() as f64 / n as f64
                }
            };
            SelectionRecord {
                seed,
                dataset,
                n_borderline: n,
                perceptron: freq(ModelKind::Perceptron),
                ds: freq(ModelKind::DecisionStump),
                dt: freq(ModelKind::DecisionTree),
                lsvm: freq(ModelKind::LinearSvm),
                gsvm: freq(ModelKind::GaussianSvm),
            }
        })
        .collect()
}

pub fn meta_precision_per_dataset(samples: &[SampleRecord]) -> Vec<MetaPrecisionRecord> {
    proposed_borderline(samples)
        .into_iter()
        .map(|((seed, dataset), recs)| {
            let (n_borderline, meta_precision) = precision_of(&recs);
            MetaPrecisionRecord {
                seed,
                dataset,
                n_borderline,
                meta_precision,
            }
        })
        .collect()
}

fn headers<T: serde::Serialize + Default>() -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(T::default()).expect("in-memory write");
    let data = w.into_inner().expect("in-memory flush");
    let end = data.iter().position(|&b| b == b'\n').map_or(data.len(), |p| p + 1);
    data[..end].to_vec()
}

fn csv_bytes<T: Serialize + Default>(rows: &[T]) -> Result<Vec<u8>> {
    if rows.is_empty() {
        return Ok(headers::<T>());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

impl Default for SampleRecord {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: String::new(),
            fold: 0,
            sample: 0,
            mode: Mode::Proposed,
            y_true: 0,
            prediction: 0,
            proba_pos: 0.0,
            borderline: false,
            recommended: None,
            fallback_used: None,
            relevant_set: None,
            true_relevance: None,
        }
    }
}

impl Default for DatasetRecord {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: String::new(),
            mode: Mode::Proposed,
            n_samples: 0,
            accuracy: 0.0,
            accuracy_std: 0.0,
            auc: 0.0,
            auc_std: 0.0,
            fmeasure: 0.0,
            fmeasure_std: 0.0,
            gmean: 0.0,
            gmean_std: 0.0,
            meta_precision: None,
        }
    }
}

impl Default for SummaryRecord {
    fn default() -> Self {
        Self {
            metric: String::new(),
            mode: Mode::Proposed,
            reference: Mode::Proposed,
            mean: 0.0,
            wins: None,
            ties: None,
            losses: None,
        }
    }
}

impl Default for WilcoxonRecord {
    fn default() -> Self {
        Self {
            metric: String::new(),
            mode: Mode::Proposed,
            reference: Mode::Proposed,
            n_datasets: 0,
            statistic: 0.0,
            p_value: 0.0,
            significant: false,
            direction: String::new(),
        }
    }
}

impl Default for SelectionRecord {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: String::new(),
            n_borderline: 0,
            perceptron: 0.0,
            ds: 0.0,
            dt: 0.0,
            lsvm: 0.0,
            gsvm: 0.0,
        }
    }
}

impl Default for MetaPrecisionRecord {
    fn default() -> Self {
        Self {
            seed: 0,
            dataset: String::new(),
            n_borderline: 0,
            meta_precision: None,
        }
    }
}

fn importances_bytes(rows: &[[f64; N_META_FEATURES]]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model".to_string()];
    header.extend(META_FEATURE_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for (kind, row) in ModelKind::PORTFOLIO.iter().zip(rows) {
        let mut rec = vec![kind.short_name().to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Serialized contents of every report file, in [`REPORT_FILES`] order.
pub fn render_reports(report: &RunReport) -> Result<Vec<(&'static str, Vec<u8>)>> {
    Ok(vec![
        (REPORT_FILES[0], csv_bytes(&report.samples)?),
        (REPORT_FILES[1], csv_bytes(&report.datasets)?),
        (REPORT_FILES[2], csv_bytes(&report.summary)?),
        (REPORT_FILES[3], importances_bytes(&report.feature_importances)?),
        (REPORT_FILES[4], csv_bytes(&report.selection)?),
        (REPORT_FILES[5], csv_bytes(&report.meta_precision)?),
        (REPORT_FILES[6], csv_bytes(&report.wilcoxon)?),
    ])
}

/// Writes the seven report files into `dir`, creating it if needed.
pub fn emit_reports(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    render_reports(report)?
        .into_iter()
        .map(|(name, bytes)| {
            let path = dir.join(name);
            fs::write(&path, bytes)?;
            Ok(path)
        })
        .collect()
}

pub fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Outcome of re-deriving a run directory's aggregates from its records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Verification {
    pub checked: Vec<&'static str>,
    pub mismatched: Vec<&'static str>,
}

impl Verification {
    pub fn ok(&self) -> bool {
        self.mismatched.is_empty()
    }
}

/// Recomputes `per_dataset.csv`, `selection_frequency.csv` and
/// `meta_precision_per_dataset.csv` from `per_sample.csv`, and `summary.csv`
/// and `wilcoxon.csv` from `per_dataset.csv`, comparing byte for byte.
pub fn verify_run_dir(dir: &Path, alpha: f64) -> Result<Verification> {
    let samples: Vec<SampleRecord> = read_records(&dir.join("per_sample.csv"))?;
    let datasets: Vec<DatasetRecord> = read_records(&dir.join("per_dataset.csv"))?;
    let (summary, wilcoxon) = summarize(&datasets, alpha);
    let expected: [(&'static str, Vec<u8>); 5] = [
        ("per_dataset.csv", csv_bytes(&aggregate_datasets(&samples))?),
        ("selection_frequency.csv", csv_bytes(&selection_frequency(&samples))?),
        ("meta_precision_per_dataset.csv", csv_bytes(&meta_precision_per_dataset(&samples))?),
        ("summary.csv", csv_bytes(&summary)?),
        ("wilcoxon.csv", csv_bytes(&wilcoxon)?),
    ];
    let mut v = Verification::default();
    for (name, bytes) in expected {
        v.checked.push(name);
        if fs::read(dir.join(name))? != bytes {
            v.mismatched.push(name);
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_parse_and_print() {
        for m in Mode::all() {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
        assert!("fixed:knn".parse::<Mode>().is_err());
        assert!("bogus".parse::<Mode>().is_err());
    }

    #[test]
    fn config_defaults_and_selection() {
        let cfg = RunConfig::from_json(r#"{"datasets": ["a", "b"], "seeds": [3]}"#).unwrap();
        assert_eq!(cfg.datasets, DatasetSelection::Names(vec!["a".into(), "b".into()]));
        assert_eq!((cfg.m, cfg.k_s, cfg.k_h, cfg.k_prime, cfg.folds), (5, 7, 7, 50, 5));
        assert_eq!((cfg.t, cfg.sim_thr, cfg.comp_thr), (0.7, 0.7, 0.1));
        let all = RunConfig::from_json(r#"{"datasets": "all", "modes": ["ideal", "fixed:dt"]}"#).unwrap();
        assert_eq!(all.datasets, DatasetSelection::All);
        assert_eq!(all.modes, vec![Mode::Ideal, Mode::Fixed(ModelKind::DecisionTree)]);
        assert!(RunConfig::from_json(r#"{"datasets": "some"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"unknown": 1}"#).is_err());
    }

    #[test]
    fn partition_names() {
        assert!(is_partition_file("glass1-5-1tst"));
        assert!(is_partition_file("ecoli-0-1_vs_5-5-3tra"));
        assert!(!is_partition_file("glass1"));
        assert!(!is_partition_file("ecoli-0-1"));
    }

    #[test]
    fn empty_report_has_headers_only() {
        let files = render_reports(&RunReport::default()).unwrap();
        assert_eq!(files.len(), 7);
        for (_, bytes) in &files {
            assert_eq!(bytes.iter().filter(|&&b| b == b'\n').count(), 1);
        }
        let text = String::from_utf8(files[0].1.clone()).unwrap();
        assert_eq!(
            text.trim_end(),
            "seed,dataset,fold,sample,mode,y_true,prediction,proba_pos,borderline,recommended,fallback_used,relevant_set,true_relevance"
        );
    }

    #[test]
    fn win_tie_loss_rounds_to_two_decimals() {
        let rec = |dataset: &str, mode: Mode, acc: f64| DatasetRecord {
            dataset: dataset.into(),
            mode,
            accuracy: acc,
            ..DatasetRecord::default()
        };
        let fixed = Mode::Fixed(ModelKind::Perceptron);
        let rows = vec![
            rec("a", Mode::Proposed, 0.901),
            rec("b", Mode::Proposed, 0.80),
            rec("c", Mode::Proposed, 0.70),
            rec("a", fixed, 0.899),
            rec("b", fixed, 0.85),
            rec("c", fixed, 0.60),
        ];
        let (summary, wil) = summarize(&rows, 0.05);
        let row = summary.iter().find(|s| s.metric == "accuracy" && s.mode == fixed).unwrap();
        assert_eq!((row.wins, row.ties, row.losses), (Some(1), Some(1), Some(1)));
        assert!(wil.iter().all(|w| w.reference == Mode::Proposed));
    }
}
