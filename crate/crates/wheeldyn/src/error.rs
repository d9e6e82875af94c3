use std::path::PathBuf;

/// Failures of the file and command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: row {row}: {msg}", path.display())]
    Parse { path: PathBuf, row: usize, msg: String },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] wheeldyn_core::Error),
}

impl IoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io { path: path.into(), source }
    }
}

pub type Result<T, E = IoError> = std::result::Result<T, E>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

/// Exit code for an error chain: usage and invalid arguments map to 2,
/// numeric failures to 4, everything else (files, parsing, data) to 3.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use wheeldyn_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<IoError>() {
            match e {
                IoError::Usage(_) => return exit::USAGE,
                IoError::Core(c) => return core_code(c),
                _ => return exit::DATA,
            }
        }
        if let Some(c) = cause.downcast_ref::<E>() {
            return core_code(c);
        }
    }
    exit::DATA
}

fn core_code(e: &wheeldyn_core::Error) -> i32 {
    use wheeldyn_core::Error as E;
    match e {
        E::Invalid(_) => exit::USAGE,
        E::NonFinite(_) | E::Autodiff(_) => exit::NUMERIC,
        E::Data { .. } | E::Dimension { .. } | E::Insufficient(_) => exit::DATA,
    }
}
