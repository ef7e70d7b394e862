//! Experiment harness for driftlab-core: spec validation, grid execution,
//! CSV and summary output, and standalone bound evaluation.

// NaN must fail range checks, so `!(x > 0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds_cli;
pub mod experiments;
pub mod formula;
pub mod noise;
pub mod spec;
pub mod table;

use std::path::PathBuf;

use thiserror::Error;

pub use experiments::{compute, run_experiment, ExperimentResult, RunReport};
pub use spec::{validate_spec, ExperimentSpec, FieldError};

#[derive(Debug, Error)]
pub enum DriftlabError {
    #[error("invalid configuration:{}", render_fields(.0))]
    Config(Vec<FieldError>),
    #[error("{0}")]
    Runtime(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn render_fields(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("\n  {}: {}", e.field, e.message))
        .collect()
}

impl DriftlabError {
    /// Process exit code: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriftlabError::Config(_) => 1,
            _ => 2,
        }
    }
}
