use thiserror::Error;
use wdsflow_core::WdsError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("link error: {0}")]
    Link(String),
    #[error(transparent)]
    Solver(#[from] WdsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
