//! Document formats for `pwqnet-core`: networks and solutions as JSON,
//! problems and training runs as TOML.
//!
//! Floating-point numbers in emitted JSON carry 17 significant digits and
//! parse back to the identical bits.

pub mod json;
pub mod network_doc;
pub mod problem_doc;
pub mod report_doc;
pub mod train_config;

pub use network_doc::NetworkDoc;
pub use problem_doc::{ProblemDoc, SolutionDoc};
pub use report_doc::ReportDoc;
pub use train_config::TrainConfigDoc;

#[derive(Debug, thiserror::Error)]
pub enum DocError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] pwqnet_core::Error),
}

pub type DocResult<T> = Result<T, DocError>;
