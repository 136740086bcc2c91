//! Stage orchestration behind the `irisbench` binary.
//!
//! Every stage reads its inputs from files and writes its outputs to files,
//! so `pipeline` is exactly the composition of `preprocess`, `augment`,
//! `embed` and `evaluate`.

mod commands;
mod config;
mod manifest;

pub use commands::{
    cmd_augment, cmd_compare, cmd_embed, cmd_evaluate, cmd_evaluate_file, cmd_pipeline,
    cmd_preprocess, cmd_preprocess_sweep, ComparisonReport, ComparisonRow, EmbedOptions,
    PairwiseTest, PipelineOutcome, PipelineReport, RowFailure, SeriesSummary, StageOutcome,
};
pub use config::{EmbedderChoice, ExperimentConfig};
pub use manifest::{Manifest, ManifestRow, Split};

use crate::augment::AugmentError;
use crate::embed::EmbedError;
use crate::metrics::MetricsError;
use crate::preprocess::PreprocessError;
use crate::raster::RasterError;
use crate::verify::VerifyError;

/// Exit status for a run where some rows failed.
pub const EXIT_PARTIAL: i32 = 1;
/// Exit status for configuration and manifest errors.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Evaluate(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CliError>,
    },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Manifest(_) => EXIT_CONFIG,
            CliError::Augment(AugmentError::InvalidConfig(_) | AugmentError::Empty) => EXIT_CONFIG,
            CliError::Stage { source, .. } => source.exit_code(),
            _ => EXIT_PARTIAL,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> CliError {
        CliError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
