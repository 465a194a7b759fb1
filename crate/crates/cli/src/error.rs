use irsolve_core::refinement::SolveError;
use irsolve_core::{KernelError, MatgenError, PowerError};
use std::path::PathBuf;
use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const ERROR: i32 = 1;
    pub const NO_CONVERGENCE: i32 = 2;
    pub const USAGE: i32 = 64;
    pub const DATA: i32 = 65;
    pub const IO: i32 = 74;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Data {
        path: PathBuf,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Matgen(#[from] MatgenError),
    #[error("JSON output: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV output: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Attaches `path` to file-level errors.
    pub fn at(self, path: impl Into<PathBuf>) -> CliError {
        let path = path.into();
        match self {
            CliError::Power(PowerError::Io(source)) | CliError::Kernel(KernelError::Io(source)) => {
                CliError::Io { path, source }
            }
            CliError::Power(e) if power_code(&e) == exit::DATA => CliError::Data {
                path,
                source: Box::new(e),
            },
            CliError::Kernel(e @ KernelError::BadFile(_)) => CliError::Data {
                path,
                source: Box::new(e),
            },
            other => other,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Data { .. } => exit::DATA,
            CliError::Solve(e) => solve_code(e),
            CliError::Power(e) => power_code(e),
            CliError::Kernel(e) => kernel_code(e),
            CliError::Matgen(e) => matgen_code(e),
            CliError::Json(e) if e.is_io() => exit::IO,
            CliError::Json(_) => exit::ERROR,
            CliError::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => exit::IO,
            CliError::Csv(_) => exit::ERROR,
        }
    }
}

fn solve_code(e: &SolveError) -> i32 {
    match e {
        SolveError::Kernel(k) => kernel_code(k),
        SolveError::Matgen(m) => matgen_code(m),
        SolveError::InvalidConfig(_) => exit::USAGE,
        SolveError::NoConvergence { .. } => exit::NO_CONVERGENCE,
        SolveError::Breakdown { .. } => exit::ERROR,
    }
}

fn kernel_code(e: &KernelError) -> i32 {
    match e {
        KernelError::BandTooWide { .. } => exit::USAGE,
        KernelError::Io(_) => exit::IO,
        KernelError::BadFile(_) => exit::DATA,
        _ => exit::ERROR,
    }
}

fn matgen_code(e: &MatgenError) -> i32 {
    match e {
        MatgenError::InvalidSpec(_) => exit::USAGE,
        MatgenError::Kernel(k) => kernel_code(k),
        _ => exit::ERROR,
    }
}

fn power_code(e: &PowerError) -> i32 {
    match e {
        PowerError::Io(_) => exit::IO,
        PowerError::InvalidModel(_) | PowerError::DuplicateSensor(_) => exit::ERROR,
        _ => exit::DATA,
    }
}
