//! Config-driven experiments with reproducible CSV and JSON reports.

mod config;
mod report;
mod run;
mod verify;

use std::path::Path;

use thiserror::Error;

pub use config::{
    load_config, parse_config, ConfigError, ExperimentConfig, ExperimentKind, InputSource,
    InputSpec, Role,
};
pub use report::{Report, ReportHeader, Row, SCHEMA_VERSION};
pub use run::{execute, run_experiment, ReportPaths};
pub use verify::{verify_suite, CheckOutcome, SuiteReport, SUITES};

use crate::bhatskeide::BsError;
use crate::gallery::GalleryError;
use crate::numkit::{format_matrix, parse_matrix, NumError, Operator};
use crate::simcert::SimError;
use crate::tensorsplit::SplitError;

pub const TOOL: &str = "simlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("io error: {0}")]
    Io(String),
    #[error("{path} exists; pass the overwrite flag to replace it")]
    OutputExists { path: String },
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("input {label}: {message}")]
    Input { label: String, message: String },
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Interpolation(#[from] BsError),
    #[error(transparent)]
    Gallery(#[from] GalleryError),
}

impl LabError {
    /// Whether the error stems from user input rather than a numerical failure.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            LabError::Config(_)
                | LabError::OutputExists { .. }
                | LabError::UnknownSuite(_)
                | LabError::Input { .. }
                | LabError::Num(NumError::Parse { .. })
                | LabError::Gallery(GalleryError::BadParams { .. } | GalleryError::UnknownModel(_))
        )
    }
}

/// Read a matrix file, checking that writing it back reproduces every entry bit for bit.
pub fn matrix_io_roundtrip(path: &Path) -> Result<Operator, LabError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    let m = parse_matrix(&text)?;
    let back = parse_matrix(&format_matrix(&m))?;
    let same = m
        .iter()
        .zip(back.iter())
        .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
    if !same {
        return Err(LabError::Io(format!(
            "{}: entries do not survive a write/read cycle",
            path.display()
        )));
    }
    Ok(m)
}
