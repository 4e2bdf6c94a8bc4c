use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point ({x}, {y}, {z}) lies outside the cavity")]
    PointOutsideDomain { x: f64, y: f64, z: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("operation not supported for this cavity: {0}")]
    UnsupportedCavity(&'static str),

    #[error("no root in bracket [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("integrator step size underflow at x = {at}")]
    StepUnderflow { at: f64 },

    #[error("mode count {count} exceeds the configured cap {cap}")]
    WindowTooWide { count: usize, cap: usize },

    #[error("channel {channel}: exact solver found {exact} modes, semiclassical estimate {estimate}")]
    MissedModes { channel: usize, exact: usize, estimate: usize },

    #[error("turning point classification failed: {0}")]
    TurningPoint(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    #[error("s is within {distance:e} of the mode pole at omega = {omega}")]
    PoleProximity { omega: f64, distance: f64 },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("singular 2x2 system at s = {re} + {im}i")]
    SingularMatrix { re: f64, im: f64 },

    #[error("Neumann series diverges at contour sample {index}")]
    NeumannDivergence { index: usize },

    #[error("contour samples have not decayed at the window edges (edge/peak = {ratio:e})")]
    NonDecayedEdges { ratio: f64 },

    #[error("aliasing detected: {fraction:e} of the spectral energy lies in the outer 5% of the window")]
    Aliasing { fraction: f64 },

    #[error("integrator failure: norm drift {drift:e}")]
    IntegratorFailure { drift: f64 },

    #[error("trajectory carries no photon amplitudes")]
    MissingPhotonAmplitudes,

    #[error("grid resolution {requested} exceeds the cap {cap}")]
    ResolutionCap { requested: usize, cap: usize },

    #[error("requested horizon {requested} exceeds the validated horizon {validated}")]
    HorizonExceeded { requested: f64, validated: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
