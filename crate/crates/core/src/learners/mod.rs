//! The classifier portfolio and the meta-learner's decision tree, behind a
//! single fit / predict / predict_proba interface.

mod knn;
mod linear;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

pub use knn::KnnModel;
pub use linear::{KernelModel, LinearModel, MarginLink};
pub use tree::{Node, Tree};

/// Number of base-classifier models the recommender chooses between.
pub const PORTFOLIO_SIZE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "perceptron")]
    Perceptron,
    #[serde(rename = "ds")]
    DecisionStump,
    #[serde(rename = "dt")]
    DecisionTree,
    #[serde(rename = "lsvm")]
    LinearSvm,
    #[serde(rename = "gsvm")]
    GaussianSvm,
    #[serde(rename = "knn")]
    Knn,
}

impl ModelKind {
    /// Fixed portfolio order used by every meta-label vector.
    pub const PORTFOLIO: [ModelKind; PORTFOLIO_SIZE] = [
        ModelKind::Perceptron,
        ModelKind::DecisionStump,
        ModelKind::DecisionTree,
        ModelKind::LinearSvm,
        ModelKind::GaussianSvm,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::Perceptron => "perceptron",
            ModelKind::DecisionStump => "ds",
            ModelKind::DecisionTree => "dt",
            ModelKind::LinearSvm => "lsvm",
            ModelKind::GaussianSvm => "gsvm",
            ModelKind::Knn => "knn",
        }
    }

    /// Position in [`ModelKind::PORTFOLIO`], if this kind is part of it.
    pub fn portfolio_index(self) -> Option<usize> {
        Self::PORTFOLIO.iter().position(|&k| k == self)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "perceptron" => ModelKind::Perceptron,
            "ds" | "stump" | "decisionstump" => ModelKind::DecisionStump,
            "dt" | "tree" | "decisiontree" => ModelKind::DecisionTree,
            "lsvm" | "linearsvm" => ModelKind::LinearSvm,
            "gsvm" | "gaussiansvm" => ModelKind::GaussianSvm,
            "knn" => ModelKind::Knn,
            other => return Err(Error::Config(format!("unknown model kind '{other}'"))),
        })
    }
}

/// CART hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    /// Minimum weighted impurity decrease, as a fraction of the root weight.
    pub min_impurity_decrease: f64,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_impurity_decrease: 0.0,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
    /// RBF width; `None` uses `1 / (d * mean feature variance)`.
    pub gamma: Option<f64>,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            epochs: 200,
            gamma: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub seed: u64,
    #[serde(default)]
    pub tree: TreeParams,
    #[serde(default)]
    pub svm: SvmParams,
    /// Reweight samples by `n / (2 * n_class)`.
    #[serde(default)]
    pub class_weighted: bool,
    /// Neighborhood size for [`ModelKind::Knn`].
    #[serde(default = "default_knn_k")]
    pub knn_k: usize,
}

fn default_knn_k() -> usize {
    7
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            tree: TreeParams::default(),
            svm: SvmParams::default(),
            class_weighted: false,
            knn_k: default_knn_k(),
        }
    }

    pub fn portfolio(seed: u64) -> [ModelSpec; PORTFOLIO_SIZE] {
        ModelKind::PORTFOLIO.map(|k| ModelSpec::new(k, seed))
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Learned state of each model family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum Model<T> {
    Linear(LinearModel<T>),
    Tree(Tree<T>),
    Kernel(KernelModel<T>),
    Knn(KnnModel<T>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FittedClassifier<T> {
    pub kind: ModelKind,
    pub model: Model<T>,
    pub n_features: usize,
    pub training_class_counts: [usize; 2],
}

/// Per-class weights `n / (2 * n_c)`, returned as `[w_0, w_1]`.
pub fn balanced_class_weights(labels: &[ClassId]) -> [f64; 2] {
    let n = labels.len() as f64;
    let n1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n0 = n - n1;
    let w = |c: f64| if c > 0.0 { n / (2.0 * c) } else { 0.0 };
    [w(n0), w(n1)]
}

/// Trains one classifier.
pub fn fit<T: Scalar>(
    spec: &ModelSpec,
    x: &Matrix<T>,
    y: &[ClassId],
    sample_weights: Option<&[T]>,
) -> Result<FittedClassifier<T>> {
    if y.len() != x.n_rows() {
        return Err(Error::Shape {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    let counts = crate::dataset::class_counts(y);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClassTrainingSet);
    }
    let mut weights: Vec<T> = match sample_weights {
        Some(w) => {
            if w.len() != y.len() {
                return Err(Error::Shape {
                    expected: y.len(),
                    got: w.len(),
                });
            }
            if w.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
                return Err(Error::Config("sample weights must be positive and finite".into()));
            }
            w.to_vec()
        }
        None => vec![T::one(); y.len()],
    };
    if spec.class_weighted {
        let cw = balanced_class_weights(y).map(T::lit);
        weights.iter_mut().zip(y).for_each(|(w, &c)| *w = *w * cw[c as usize]);
    }
    let model = match spec.kind {
        ModelKind::Perceptron => Model::Linear(linear::fit_perceptron(x, y, &weights, spec.seed)),
        ModelKind::LinearSvm => Model::Linear(linear::fit_linear_svm(x, y, &weights, &spec.svm).0),
        ModelKind::GaussianSvm => Model::Kernel(linear::fit_gaussian_svm(x, y, &weights, &spec.svm).0),
        ModelKind::DecisionStump => Model::Tree(tree::fit_stump(x, y, &weights)),
        ModelKind::DecisionTree => Model::Tree(tree::fit_tree(x, y, &weights, &spec.tree)),
        ModelKind::Knn => Model::Knn(KnnModel::fit(x, y, spec.knn_k)),
    };
    Ok(FittedClassifier {
        kind: spec.kind,
        model,
        n_features: x.n_cols(),
        training_class_counts: counts,
    })
}

/// Decision from a probability pair; ties go to class 0.
#[inline]
pub fn decide<T: Scalar>(proba: [T; 2]) -> ClassId {
    u8::from(proba[1] > proba[0])
}

impl<T: Scalar> FittedClassifier<T> {
    pub fn predict_proba(&self, x: &[T]) -> Result<[T; 2]> {
        if x.len() != self.n_features {
            return Err(Error::Shape {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(match &self.model {
            Model::Linear(m) => m.proba(x),
            Model::Tree(t) => t.proba(x),
            Model::Kernel(m) => m.proba(x),
            Model::Knn(m) => m.proba(x),
        })
    }

    pub fn predict(&self, x: &[T]) -> Result<ClassId> {
        self.predict_proba(x).map(decide)
    }

    /// Signed decision value (positive favours class 1). Trees and k-NN use
    /// `p1 - p0`.
    pub fn margin(&self, x: &[T]) -> Result<T> {
        if let Model::Linear(m) = &self.model {
            return Ok(m.margin(x));
        }
        if let Model::Kernel(m) = &self.model {
            return Ok(m.decision(x));
        }
        let p = self.predict_proba(x)?;
        Ok(p[1] - p[0])
    }

    /// Normalized total Gini decrease per feature.
    pub fn gini_importances(&self) -> Result<Vec<T>> {
        match &self.model {
            Model::Tree(t) => Ok(t.importances()),
            _ => Err(Error::WrongModelKind),
        }
    }

    pub fn as_tree(&self) -> Option<&Tree<T>> {
        match &self.model {
            Model::Tree(t) => Some(t),
            _ => None,
        }
    }
}

/// Objective trace of the linear SVM solver, one value per epoch.
pub fn linear_svm_objective_trace<T: Scalar>(
    x: &Matrix<T>,
    y: &[ClassId],
    params: &SvmParams,
) -> Vec<T> {
    let w = vec![T::one(); y.len()];
    linear::fit_linear_svm(x, y, &w, params).1
}

/// Builds a tree directly, without the both-classes precondition of [`fit`].
/// A single-class input yields one constant leaf.
pub fn fit_tree_unchecked<T: Scalar>(
    x: &Matrix<T>,
    y: &[ClassId],
    weights: &[T],
    params: &TreeParams,
) -> FittedClassifier<T> {
    FittedClassifier {
        kind: ModelKind::DecisionTree,
        model: Model::Tree(tree::fit_tree(x, y, weights, params)),
        n_features: x.n_cols(),
        training_class_counts: crate::dataset::class_counts(y),
    }
}
