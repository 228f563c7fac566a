use std::fmt;
use std::path::Path;

/// Failure classes, each with its own process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Internal => 4,
        }
    }
}

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct AppError {
    pub kind: ErrorKind,
    pub stage: &'static str,
    pub message: String,
}

impl AppError {
    pub fn new(kind: ErrorKind, stage: &'static str, message: impl fmt::Display) -> Self {
        Self {
            kind,
            stage,
            message: message.to_string(),
        }
    }

    pub fn config(stage: &'static str, message: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Config, stage, message)
    }

    pub fn data(stage: &'static str, message: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Data, stage, message)
    }

    pub fn internal(stage: &'static str, message: impl fmt::Display) -> Self {
        Self::new(ErrorKind::Internal, stage, message)
    }

    pub fn io(stage: &'static str, path: &Path, err: std::io::Error) -> Self {
        Self::data(stage, format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for AppError {}

pub type Result<T> = std::result::Result<T, AppError>;

