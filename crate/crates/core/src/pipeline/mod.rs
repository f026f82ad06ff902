//! Staged end-to-end run: exposure, similarity, market indicators,
//! regression and pathway synthesis, driven by one TOML config.
//!
//! Each stage writes its outputs under the configured output directory and
//! records their hashes in `manifest.json`.

pub mod config;
pub mod manifest;
pub mod report;
pub mod run;

pub use config::{parse_config, validate_config, Format, PipelineConfig, SimilaritySource};
pub use manifest::{Manifest, Timings};
pub use report::Report;
pub use run::{config_digest, Pipeline, RegressionSummary, Stage, StageOutput};
