//! Ordinal prediction of household outcomes (water-consumption tier, income
//! bracket) from survey attributes, street-view segmentation summaries, image
//! embeddings and geospatial covariates.
//!
//! The crate is organised bottom-up:
//!
//! * [`dataset`] – record schemas, target binning, feature matrices, CSV I/O
//!   and a synthetic city generator.
//! * [`learners`] – binary probabilistic learners (logistic regression,
//!   random forest, histogram GBDT with level-wise or leaf-wise growth).
//! * [`ordinal`] – K-1 threshold decomposition and probability reconstruction.
//! * [`resampling`] – SMOTE.
//! * [`evaluation`] – stratified k-fold CV, accuracy, ROC-AUC, confusion
//!   matrices, misclassification profiles.
//! * [`tuning`] – exhaustive grid search.
//! * [`geoimagery`] – tile math, imagery fetching, raster sampling and
//!   segmentation summaries.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod geoimagery;
pub mod learners;
pub mod matrix;
pub mod ordinal;
pub mod resampling;
pub mod seed;
pub mod tuning;

pub use dataset::{FeatureMatrix, HouseholdRecord, JoinPolicy, LabeledDataset, OrdinalBinning, Target};
pub use error::{Error, Result};
pub use evaluation::EvalReport;
pub use geoimagery::GeoPoint;
pub use learners::{BinaryLearnerSpec, Growth, LearnerKind};
pub use matrix::DenseMatrix;
pub use ordinal::OrdinalModel;
pub use resampling::SmoteSpec;
pub use tuning::GridSpec;
