use thiserror::Error;

/// Errors raised by the numerical modules and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid nodes are not uniformly spaced (worst deviation {deviation:e})")]
    NonUniformGrid { deviation: f64 },

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("sample count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("relaxation did not converge after {steps} steps (residual {residual:e})")]
    Divergence { steps: usize, residual: f64 },

    #[error("profile lost monotonicity at node {node}; refine the grid")]
    MonotonicityLost { node: usize },

    #[error("solvability condition violated: <g, phi'> = {defect:e}")]
    Solvability { defect: f64 },

    #[error("linear system is ill-conditioned (pivot ratio {ratio:e}); use a finer grid")]
    IllConditioned { ratio: f64 },

    #[error("singular particle configuration: particles {i} and {j} coincide or are out of order")]
    SingularConfiguration { i: usize, j: usize },

    #[error("minimal particle distance {distance:e} fell below the floor {floor:e} at t = {t}")]
    DistanceFloor { distance: f64, floor: f64, t: f64 },

    #[error("field left the admissible range [{lo}, {hi}] (value {value} at node {node}, t = {t})")]
    RangeViolation {
        lo: f64,
        hi: f64,
        value: f64,
        node: usize,
        t: f64,
    },

    #[error("layer tracking lost: found {found} crossings, expected {expected}")]
    TrackingLost { found: usize, expected: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
