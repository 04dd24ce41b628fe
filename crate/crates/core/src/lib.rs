//! Toolkit for political delegitimization discourse (PDD): sentence corpus
//! and annotation workflow, a two-stage detection pipeline over pluggable
//! classifier backends, an in-repo linear baseline, evaluation metrics and
//! the speaker-level statistics used for longitudinal and group analyses.

pub mod analysis;
pub mod annotation;
pub mod baseline;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod jsonl;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, Result};
