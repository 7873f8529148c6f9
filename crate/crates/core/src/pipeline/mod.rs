//! End-to-end orchestration behind the command-line tool.
//!
//! A run reads one TOML config (see [`RunConfig`]) and writes plot-ready CSV
//! reports plus `manifest.toml` into the output directory. Outputs are
//! assembled in a staging directory that is renamed into place on success;
//! on failure it is moved to `<out>/quarantine` together with `error.txt`.

mod compare;
mod config;
mod run;
mod synth_bundle;
mod validate;

use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use compare::{cmd_compare, COMPARISON_FILE};
pub use config::{AnalysisConfig, BiasConfig, DegreeDayConfig, Inputs, PanelConfig, RunConfig, ScenarioFiles, TurbineConfig};
pub use run::{cmd_run, execute, RunResults, ScenarioResults, TTestRow};
pub use synth_bundle::{cmd_synth, write_bundle, SynthConfig};
pub use validate::{cmd_validate, Finding, ValidationReport};

/// Pipeline stage, named in stage failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Convert,
    BiasAdjust,
    DemandModel,
    Mismatch,
    MetricsStats,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Convert => "convert",
            Stage::BiasAdjust => "bias-adjust",
            Stage::DemandModel => "demand-model",
            Stage::Mismatch => "mismatch-engine",
            Stage::MetricsStats => "metrics-stats",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn stage(stage: Stage, message: impl fmt::Display) -> Self {
        Self::Stage { stage, message: message.to_string() }
    }

    /// The failing stage, if this is a stage failure.
    pub fn failed_stage(&self) -> Option<Stage> {
        match self {
            Self::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}
