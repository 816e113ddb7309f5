use thiserror::Error;
use wdsflow_opt::LpError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WdsError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("network is disconnected; components: {}", format_components(.0))]
    Disconnected(Vec<Vec<String>>),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unsupported network: {0}")]
    Unsupported(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("budget exhausted after {nodes} nodes, gap {gap:e}")]
    Budget { nodes: usize, gap: f64 },
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        source: Box<WdsError>,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
}

impl WdsError {
    /// Wraps an inner failure with the name of the pipeline stage that hit it.
    pub fn at(self, stage: impl Into<String>) -> Self {
        WdsError::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &WdsError {
        match self {
            WdsError::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

fn format_components(c: &[Vec<String>]) -> String {
    c.iter()
        .map(|ids| format!("{{{}}}", ids.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

pub type Result<T> = std::result::Result<T, WdsError>;
