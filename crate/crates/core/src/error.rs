use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid boundary specification: {0}")]
    InvalidSpec(String),

    #[error("multi-index {index:?} is outside the grid (d={d}, n={n})")]
    OutOfBounds {
        index: Vec<usize>,
        d: usize,
        n: usize,
    },

    #[error("neighbor sets violate the fast-forwarding rules: {0}")]
    InvalidNeighborSets(String),

    #[error("domain has no {0} points")]
    EmptyRegion(&'static str),

    #[error("invalid interface pairs: {0}")]
    InvalidPairs(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("projector exponential requires commuting idempotent parts: {0}")]
    NonIdempotent(String),

    #[error("Robin value and swap parts do not commute: {0}")]
    NonCommutingRobin(String),

    #[error("invalid inputs for penalty regime: {0}")]
    InvalidRegimeInputs(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("boundary data is nonzero outside the Dirichlet region at linear index {0}")]
    UnsupportedSupport(usize),

    #[error("non-finite value encountered at t={0}")]
    NonFinite(f64),

    #[error("step size underflow at t={t} (dt={dt:e})")]
    StepSizeUnderflow { t: f64, dt: f64 },

    #[error("power iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("quadrature grid too coarse: {0}")]
    QuadratureUnderResolved(String),

    #[error("register needs {needed} qubits, guard is {guard}")]
    TooManyQubits { needed: usize, guard: usize },

    #[error("projected component is below {0:e}; post-selection impossible")]
    ZeroOverlap(f64),

    #[error("LCHS kernel parameter beta must lie in (0,1), got {0}")]
    InvalidBeta(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
