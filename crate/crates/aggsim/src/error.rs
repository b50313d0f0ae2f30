use std::path::PathBuf;

/// Errors produced by the schemes and the experiment runner.
///
/// Variants are split between configuration problems (rejected before any
/// computation starts) and runtime failures (a scheme step that cannot be
/// completed). The CLI maps the former to exit code 2 and the latter to 3.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("CFL condition violated: margin {margin} is not positive (w_inf = {w_inf}, dt = {dt})")]
    CflViolation { margin: f64, w_inf: f64, dt: f64 },

    #[error("negative interpolation weight {weight} at cell {cell:?} (step {step}); CFL condition violated at runtime")]
    NegativeWeight {
        cell: Vec<i64>,
        weight: f64,
        step: usize,
    },

    #[error("mass would leave the grid window at cell {cell:?} (step {step})")]
    SupportEscape { cell: Vec<i64>, step: usize },

    #[error("degenerate triangle {triangle}: area {area} below tolerance")]
    DegenerateTriangle { triangle: usize, area: f64 },

    #[error("point {point:?} lies outside the star of node {node}; CFL violation or non-conformal mesh")]
    OutsideStar { node: usize, point: Vec<f64> },

    #[error("mesh validation failed: {0}")]
    InvalidMesh(String),

    #[error("measure masses sum to {total}, expected 1")]
    NotAProbability { total: f64 },

    #[error("no closed-form gradient bound for this potential")]
    UnboundedGradient,

    #[error("operation requires dimension {expected}, measure has dimension {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors that should be reported as configuration problems
    /// (CLI exit code 2) rather than runtime scheme failures (exit code 3).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidMesh(_)
                | Error::DimensionMismatch { .. }
                | Error::NotAProbability { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
