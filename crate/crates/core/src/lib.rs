//! Zero-shot and generalized zero-shot classification.
//!
//! The crate covers the whole experimental loop: ingesting precomputed
//! features and class embeddings ([`dataset`], [`features`]), multiclass
//! linear classifiers over the seen classes ([`classifiers`]), the ConSE,
//! SynC and LatEm/SJE transfer methods ([`zsl`]), and the seen/unseen
//! evaluation protocol with calibrated stacking and AUSUC ([`eval`]).

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod linalg;
pub mod zsl;

pub use classifiers::{LinearModel, LossKind, TrainConfig};
pub use dataset::{
    ClassEmbeddingTable, Dataset, FeatureMatrix, LabelVector, SplitOptions, SplitSpec, SynthSpec,
};
pub use error::{Error, Result};
pub use eval::{AccuracyReport, Restriction, ScoreMatrix, SuCurve};
pub use linalg::Matrix;
pub use zsl::{ConseModel, JointScorer, LatemModel, Method, SyncModel, TrainedModel};
