//! Survival-model evaluation built around a decomposition of Harrell's
//! concordance index into an event-event part and an event-censored part,
//! plus a small variational encoder-decoder survival model and the
//! size/censoring experiment harness used to study both.

pub mod concordance;
pub mod dataset;
pub mod error;
mod fenwick;
pub mod io;
pub mod kaplan_meier;
pub mod lab;
pub mod losses;
pub mod rng;
pub mod surved;
pub mod synth;

pub use concordance::{
    classify_pair, count_pairs, count_pairs_exact, count_pairs_fast, decompose, verify_identity,
    CIndexDecomposition, Comparability, PairClass, PairCounts,
};
pub use dataset::{ColumnKind, ColumnSchema, PreprocessPlan, SurvivalDataset, SurvivalRecord};
pub use error::{Error, Result};
pub use kaplan_meier::{km_estimate, StepSurvival};
pub use losses::{GaussianLatent, LossBreakdown, LossWeights};
pub use surved::{ModelConfig, SurvedModel};
