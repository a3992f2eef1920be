use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite drift at step {step}{}", path.map(|p| format!(" of path {p}")).unwrap_or_default())]
    NonFiniteDrift { step: usize, path: Option<usize> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("chain too short: {available} post-burn-in states, {requested} requested")]
    InsufficientChain { available: usize, requested: usize },

    #[error("path was simulated with a different stopping rule than the observable")]
    SpecMismatch,

    #[error("path does not retain its noise increments")]
    MissingNoise,

    #[error("paths were simulated under different parameters than the current model")]
    StalePath,

    #[error("density integrates to {mass}, expected 1")]
    UnnormalizedDensity { mass: f64 },

    #[error("negative input: {name} = {value}")]
    NegativeInput { name: &'static str, value: f64 },

    #[error("singular tridiagonal system at row {row}")]
    SingularSystem { row: usize },

    #[error("artificial boundary too close: Gibbs mass {mass:e} near the truncation point")]
    BoundaryTooClose { mass: f64 },

    #[error("Gibbs normalizer underflowed")]
    ZeroMass,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("loss diverged to {value:e} at iteration {iter}")]
    DivergedLoss { value: f64, iter: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// Attach a path index to a `NonFiniteDrift` raised inside a batch.
    pub(crate) fn in_path(self, index: usize) -> Self {
        match self {
            Error::NonFiniteDrift { step, .. } => Error::NonFiniteDrift {
                step,
                path: Some(index),
            },
            other => other,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, got })
    }
}
