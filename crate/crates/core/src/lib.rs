//! Per-sample base-classifier recommendation for online local pools.
//!
//! For every borderline test sample the library measures the data complexity
//! of its neighborhood, asks a binary-relevance meta-classifier which model
//! families are likely to succeed there, and grows a small local pool of the
//! chosen family around the sample.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, which the experiment harness
//! uses throughout.

pub mod complexity;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod learners;
pub mod matrix;
pub mod metarec;
pub mod metrics;
pub mod neighbors;
pub mod olp;
pub mod scalar;
pub mod seed;
pub mod sgh;
pub mod synth;

pub use dataset::{parse_keel, stratified_kfold, ClassId, FoldSplit, Scaler};
pub use error::{Error, Result};
pub use learners::{fit, ModelKind, ModelSpec, TreeParams, PORTFOLIO_SIZE};
pub use matrix::Matrix;
pub use scalar::Scalar;

pub type Dataset = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type Matrix64 = matrix::Matrix<f64>;
pub type FittedClassifier = learners::FittedClassifier<f64>;
pub type MetaFeatureVector = complexity::MetaFeatureVector<f64>;
pub type Neighborhood = complexity::Neighborhood<f64>;
pub type Hyperplane = sgh::Hyperplane<f64>;
pub type OlpState = olp::OlpState<f64>;
pub type OlpState32 = olp::OlpState<f32>;
pub type OlpOutput = olp::OlpOutput<f64>;
pub type MetaDataset = metarec::MetaDataset<f64>;
pub type MetaClassifier = metarec::MetaClassifier<f64>;
