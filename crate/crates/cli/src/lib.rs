//! Command layer behind the `fgvd-eval` binary.
//!
//! Exit codes are a stable contract: 0 on success, 1 when input data
//! violates a schema or metric precondition, 2 for usage and I/O errors.

pub mod args;
pub mod commands;
pub mod config;

use std::fs;
use std::path::Path;

use fgvd_core::corpus::CorpusError;
use fgvd_core::fidelity::FidelityError;
use fgvd_core::icl::IclError;
use fgvd_core::textvec::TextVecError;
use fgvd_core::trac::TracError;
use thiserror::Error;

pub const THREADS_ENV: &str = "FGVD_EVAL_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Data(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        if e.is_data_violation() {
            CliError::Data(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    }
}

impl From<TracError> for CliError {
    fn from(e: TracError) -> Self {
        match e {
            TracError::KOutOfRange { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<FidelityError> for CliError {
    fn from(e: FidelityError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<IclError> for CliError {
    fn from(e: IclError) -> Self {
        match e {
            IclError::UnknownStrategy(_)
            | IclError::BadPlaceholderCount { .. }
            | IclError::MissingPlaceholder { .. }
            | IclError::MissingCategory { .. }
            | IclError::TooManyShots { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TextVecError> for CliError {
    fn from(e: TextVecError) -> Self {
        match e {
            TextVecError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Worker pool sized by `FGVD_EVAL_THREADS` (unset or 0 means one per core).
pub fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={s:?} is not a non-negative integer")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

pub(crate) fn write_output(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Parses arguments, runs one subcommand, returns its summary line.
pub fn run(cli: args::Cli) -> Result<String, CliError> {
    let file = match &cli.config {
        Some(p) => config::ConfigFile::load(p)?,
        None => config::ConfigFile::default(),
    };
    match cli.command {
        args::Command::Validate(a) => commands::validate::run(&a.merge(file)),
        args::Command::Classify(a) => commands::classify::run(&a.merge(file)?),
        args::Command::Fidelity(a) => commands::fidelity::run(&a.merge(file)?),
        args::Command::Prompts(a) => commands::prompts::run(&a.merge(file)?),
    }
}
