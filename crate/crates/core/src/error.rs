use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected before any numerical work.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("expression error in `{expr}`: {message}")]
    Expression { expr: String, message: String },

    #[error("strong convexity violated at node ({i}, {j}) x = ({x:.6}, {y:.6}): {inequality} (value {value:.6e})")]
    Convexity {
        i: usize,
        j: usize,
        x: f64,
        y: f64,
        inequality: &'static str,
        value: f64,
    },

    #[error("boundary profile rejected: {0}")]
    Profile(String),

    #[error("degenerate coefficient: {0}")]
    Degenerate(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("factorization broke down at unknown {index}: pivot {pivot:.3e}, pivot ratio so far {ratio:.3e}")]
    Breakdown { index: usize, pivot: f64, ratio: f64 },

    #[error("conformal chart rejected at y = ({y1:.4}, {y2:.4}): {reason}")]
    Chart { y1: f64, y2: f64, reason: String },

    #[error("point ({x:.6}, {y:.6}) lies outside the grid hull")]
    Extrapolation { x: f64, y: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("bound verification failed: {0}")]
    Bounds(String),

    #[error("malformed grid file: {0}")]
    Format(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A stage ran but its result failed the stage gate.
    #[error("stage {stage} failed: {reason} (residual {residual:.3e})")]
    Stage { stage: &'static str, reason: String, residual: f64 },

    #[error("missing file {0}")]
    Missing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors raised while checking inputs, as opposed to failures
    /// inside a numerical stage.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::Expression { .. }
                | Error::Config(_)
                | Error::Parameter(_)
                | Error::Format(_)
                | Error::Missing(_)
        )
    }
}
