//! Command-line front end: configuration resolution and experiment runs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod run;
pub mod spec;

use std::path::PathBuf;

use thiserror::Error;
use uavsim_core::{ConfigError, SimError};

pub use run::{run, threads_from_env, THREADS_VAR};
pub use spec::{Args, Mode, RunSpec};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
