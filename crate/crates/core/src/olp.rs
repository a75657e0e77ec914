//! Online local pools.
//!
//! Training samples get a KDN hardness score offline. A query whose `k_s`
//! nearest training neighbors are all easy is answered by plain k-NN. Any
//! other query gets a pool of `m` classifiers, each trained on a K-NNE
//! neighborhood two samples wider than the last, combined by majority vote.

use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, Dataset};
use crate::error::{Error, Result};
use crate::learners::{self, FittedClassifier, ModelSpec};
use crate::matrix::Matrix;
use crate::neighbors::{self, KdnTable};
use crate::scalar::Scalar;
use crate::seed;
use crate::sgh::{self, Hyperplane, Subpool};

/// Serialization format version of [`OlpState`].
pub const STATE_VERSION: u32 = 1;

/// Slack used when comparing competence scores against the threshold.
const COMPETENCE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OlpConfig {
    pub k_s: usize,
    pub k_h: usize,
    pub m: usize,
    pub sim_thr: f64,
    pub comp_thr: f64,
}

impl Default for OlpConfig {
    fn default() -> Self {
        Self {
            k_s: 7,
            k_h: 7,
            m: 5,
            sim_thr: 0.7,
            comp_thr: 0.1,
        }
    }
}

/// Immutable state built once per training fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OlpState<T> {
    pub version: u32,
    pub train: Dataset<T>,
    pub kdn: KdnTable<T>,
    pub k_s: usize,
    pub m: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum PoolMember<T> {
    Hyperplane(Hyperplane<T>),
    Model(FittedClassifier<T>),
}

impl<T: Scalar> PoolMember<T> {
    pub fn predict(&self, x: &[T]) -> Result<ClassId> {
        match self {
            PoolMember::Hyperplane(h) => Ok(h.predict(x)),
            PoolMember::Model(c) => c.predict(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LocalPool<T> {
    pub members: Vec<PoolMember<T>>,
    pub k_schedule: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OlpOutput<T> {
    pub label: ClassId,
    pub proba: [T; 2],
    pub pool_used: bool,
    pub pool: Option<LocalPool<T>>,
}

impl<T: Scalar> OlpOutput<T> {
    /// Number of pool members voting for `class`, recovered from the vote
    /// fraction. `None` for k-NN routed outputs.
    pub fn votes_for(&self, class: ClassId, m: usize) -> Option<usize> {
        self.pool_used
            .then(|| (self.proba[class as usize].as_f64() * m as f64).round() as usize)
    }

    /// Same output without the pool, for compact storage.
    pub fn without_pool(mut self) -> Self {
        self.pool = None;
        self
    }
}

/// `[k_s, k_s + 2, ..., k_s + 2(m - 1)]`.
pub fn k_schedule(k_s: usize, m: usize) -> Vec<usize> {
    (0..m).map(|i| k_s + 2 * i).collect()
}

/// Offline phase: KDN scores of every training sample.
pub fn offline<T: Scalar>(train: Dataset<T>, cfg: &OlpConfig) -> Result<OlpState<T>> {
    if cfg.k_s == 0 || cfg.k_s % 2 == 0 {
        return Err(Error::Config(format!("k_s must be odd and positive, got {}", cfg.k_s)));
    }
    if cfg.m == 0 {
        return Err(Error::Config("pool size must be at least 1".into()));
    }
    let kdn = neighbors::kdn(&train, cfg.k_h)?;
    Ok(OlpState {
        version: STATE_VERSION,
        train,
        kdn,
        k_s: cfg.k_s,
        m: cfg.m,
    })
}

impl<T: Scalar> OlpState<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let state: Self = serde_json::from_str(text)?;
        if state.version != STATE_VERSION {
            return Err(Error::Config(format!(
                "unsupported state version {} (expected {STATE_VERSION})",
                state.version
            )));
        }
        Ok(state)
    }

    /// Region of competence: the `k_s` nearest training samples (fewer if the
    /// training set is smaller).
    pub fn region(&self, x: &[T]) -> Result<Vec<usize>> {
        let k = self.k_s.min(self.train.n_samples());
        Ok(neighbors::knn(x, &self.train.features, k)?.indices)
    }

    pub fn is_borderline(&self, x: &[T]) -> Result<bool> {
        Ok(self.region(x)?.iter().any(|&i| self.kdn.is_hard(i)))
    }

    /// Plain k-NN answer over the region of competence.
    pub fn knn_output(&self, x: &[T]) -> Result<OlpOutput<T>> {
        let region = self.region(x)?;
        let ones = region.iter().filter(|&&i| self.train.labels[i] == 1).count();
        let p1 = T::from_count(ones) / T::from_count(region.len());
        let proba = [T::one() - p1, p1];
        Ok(OlpOutput {
            label: learners::decide(proba),
            proba,
            pool_used: false,
            pool: None,
        })
    }

    pub fn k_schedule(&self) -> Vec<usize> {
        k_schedule(self.k_s, self.m)
    }

    /// Rows and labels of the K-NNE neighborhood of size `k`.
    fn local_set(&self, x: &[T], k: usize) -> Result<(Matrix<T>, Vec<ClassId>)> {
        let nb = neighbors::knne(x, &self.train.features, &self.train.labels, k)?;
        let xs = self.train.features.select_rows(&nb.indices);
        let ys = nb.indices.iter().map(|&i| self.train.labels[i]).collect();
        Ok((xs, ys))
    }
}

fn vote<T: Scalar>(members: Vec<PoolMember<T>>, k_schedule: Vec<usize>, x: &[T]) -> Result<OlpOutput<T>> {
    let mut ones = 0usize;
    for m in &members {
        ones += usize::from(m.predict(x)? == 1);
    }
    let p1 = T::from_count(ones) / T::from_count(members.len());
    let proba = [T::one() - p1, p1];
    Ok(OlpOutput {
        label: learners::decide(proba),
        proba,
        pool_used: true,
        pool: Some(LocalPool { members, k_schedule }),
    })
}

/// Drops later rows that duplicate an earlier row with a different label.
fn drop_contradictions<T: Scalar>(x: &Matrix<T>, y: &[ClassId]) -> Vec<usize> {
    let mut keep: Vec<usize> = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        if !keep.iter().any(|&j| y[j] != y[i] && x.row(j) == x.row(i)) {
            keep.push(i);
        }
    }
    keep
}

/// Subpool for one local set. Contradictory duplicates are dropped first;
/// if that empties a class the subpool is the single centroid bisector of
/// the original set.
fn local_subpool<T: Scalar>(x: &Matrix<T>, y: &[ClassId]) -> Result<Subpool<T>> {
    let keep = drop_contradictions(x, y);
    if keep.len() == y.len() {
        return sgh::generate(x, y);
    }
    let xk = x.select_rows(&keep);
    let yk: Vec<ClassId> = keep.iter().map(|&i| y[i]).collect();
    if yk.contains(&0) && yk.contains(&1) {
        return sgh::generate(&xk, &yk);
    }
    let centroid = |c: ClassId| {
        let rows: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        let n = T::from_count(rows.len());
        (0..x.n_cols())
            .map(|j| rows.iter().map(|&i| x.get(i, j)).sum::<T>() / n)
            .collect::<Vec<T>>()
    };
    let (c1, c0) = (centroid(1), centroid(0));
    if c1 == c0 {
        return Err(Error::ContradictoryData("local set has coincident class centroids".into()));
    }
    Ok(Subpool {
        classifiers: vec![Hyperplane::bisector(&c1, &c0, 1)],
    })
}

/// Multiple Classifier Behavior selection.
///
/// Neighbors whose behavior vector agrees with the query's on at least
/// `sim_thr` of the members form the validation set (all of `region` when
/// none qualify). The most accurate member wins outright if it leads the
/// runner-up by at least `comp_thr`; otherwise the member with the largest
/// absolute normalized margin on `x` within `comp_thr` of the best wins,
/// lowest index on ties.
pub fn mcb_select<T: Scalar>(
    pool: &Subpool<T>,
    x: &[T],
    region_x: &Matrix<T>,
    region_y: &[ClassId],
    sim_thr: f64,
    comp_thr: f64,
) -> usize {
    let members = &pool.classifiers;
    let n_members = members.len();
    if n_members == 1 {
        return 0;
    }
    let behavior = |p: &[T]| members.iter().map(|h| h.predict(p)).collect::<Vec<_>>();
    let query_behavior = behavior(x);
    let mut kept: Vec<usize> = (0..region_y.len())
        .filter(|&i| {
            let b = behavior(region_x.row(i));
            let agree = b.iter().zip(&query_behavior).filter(|(a, q)| a == q).count();
            agree as f64 / n_members as f64 >= sim_thr - COMPETENCE_EPS
        })
        .collect();
    if kept.is_empty() {
        kept = (0..region_y.len()).collect();
    }
    let scores: Vec<f64> = members
        .iter()
        .map(|h| {
            let hits = kept
                .iter()
                .filter(|&&i| h.predict(region_x.row(i)) == region_y[i])
                .count();
            hits as f64 / kept.len() as f64
        })
        .collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let leader = scores.iter().position(|&s| s == best).expect("pool is non-empty");
    let runner_up = scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != leader)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    if best - runner_up >= comp_thr - COMPETENCE_EPS {
        return leader;
    }
    let mut chosen = leader;
    let mut chosen_margin = f64::NEG_INFINITY;
    for (j, h) in members.iter().enumerate() {
        if best - scores[j] >= comp_thr - COMPETENCE_EPS {
            continue;
        }
        let m = h.margin(x).abs().as_f64();
        if m > chosen_margin {
            chosen = j;
            chosen_margin = m;
        }
    }
    chosen
}

/// Original OLP: one SGH subpool per neighborhood size, one member picked
/// from each by MCB.
pub fn classify_sgh_mcb<T: Scalar>(
    state: &OlpState<T>,
    x: &[T],
    sim_thr: f64,
    comp_thr: f64,
) -> Result<OlpOutput<T>> {
    if !state.is_borderline(x)? {
        return state.knn_output(x);
    }
    let region = state.region(x)?;
    let region_x = state.train.features.select_rows(&region);
    let region_y: Vec<ClassId> = region.iter().map(|&i| state.train.labels[i]).collect();
    let schedule = state.k_schedule();
    let mut members = Vec::with_capacity(state.m);
    for &k in &schedule {
        let (lx, ly) = state.local_set(x, k)?;
        let mut pool = local_subpool(&lx, &ly)?;
        let j = mcb_select(&pool, x, &region_x, &region_y, sim_thr, comp_thr);
        members.push(PoolMember::Hyperplane(pool.classifiers.swap_remove(j)));
    }
    vote(members, schedule, x)
}

/// OLP with a fixed model family: one classifier of `spec.kind` trained
/// directly on each neighborhood. Member `i` is seeded from `spec.seed`.
pub fn classify_with_model<T: Scalar>(state: &OlpState<T>, x: &[T], spec: &ModelSpec) -> Result<OlpOutput<T>> {
    if !state.is_borderline(x)? {
        return state.knn_output(x);
    }
    let schedule = state.k_schedule();
    let mut members = Vec::with_capacity(state.m);
    for (i, &k) in schedule.iter().enumerate() {
        let (lx, ly) = state.local_set(x, k)?;
        let member_spec = spec.with_seed(seed::derive(spec.seed, &[i as u64]));
        members.push(PoolMember::Model(learners::fit(&member_spec, &lx, &ly, None)?));
    }
    vote(members, schedule, x)
}

/// Index of the output an oracle selector would keep: among correct outputs
/// the one with the highest true-class probability, otherwise the most
/// confident one. Ties go to the lowest index.
pub fn ideal_index<T: Scalar>(outputs: &[OlpOutput<T>], y_true: ClassId) -> usize {
    let correct = outputs.iter().enumerate().filter(|(_, o)| o.label == y_true);
    let best_by = |it: &mut dyn Iterator<Item = (usize, T)>| {
        it.fold(None::<(usize, T)>, |acc, (j, v)| match acc {
            Some((_, a)) if a >= v => acc,
            _ => Some((j, v)),
        })
    };
    if let Some((j, _)) = best_by(&mut correct.map(|(j, o)| (j, o.proba[y_true as usize]))) {
        return j;
    }
    let confidence = outputs.iter().enumerate().map(|(j, o)| (j, o.proba[0].max(o.proba[1])));
    best_by(&mut { confidence }).map_or(0, |(j, _)| j)
}

/// Oracle-style selector over every spec. Needs the true label, so it is
/// only meaningful in evaluation.
pub fn classify_ideal<T: Scalar>(
    state: &OlpState<T>,
    x: &[T],
    y_true: ClassId,
    specs: &[ModelSpec],
) -> Result<OlpOutput<T>> {
    let outputs = specs
        .iter()
        .map(|s| classify_with_model(state, x, s))
        .collect::<Result<Vec<_>>>()?;
    if outputs.is_empty() {
        return Err(Error::Config("ideal selection needs at least one model".into()));
    }
    let j = ideal_index(&outputs, y_true);
    Ok(outputs.into_iter().nth(j).expect("index in range"))
}
