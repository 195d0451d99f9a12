use crate::Vec3;

/// Errors shared by every solver in the crate.
///
/// Numerical failure modes are first-class: a caller is expected to react to
/// a lost injectivity check or a blow-up guard, not to a panic.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid needs at least {min} nodes per active axis, got {got}")]
    GridTooSmall { min: usize, got: usize },

    #[error("grid dimension must be 2 or 3, got {0}")]
    BadDimension(usize),

    #[error("{what} must be positive, got {value}")]
    NotPositive { what: &'static str, value: f64 },

    #[error("point ({}, {}, {}) lies outside the grid domain", x.x, x.y, x.z)]
    OutOfDomain { x: Vec3 },

    #[error("gradient magnitude {mag:.3e} is below {min:.3e} near ({}, {}, {})", x.x, x.y, x.z)]
    DegenerateGradient { mag: f64, min: f64, x: Vec3 },

    #[error(
        "|grad phi| = {mag:.4} at ({}, {}, {}) is outside the distance gate [{lo}, {hi}]", x.x, x.y, x.z
    )]
    OutsideDistanceGate { mag: f64, lo: f64, hi: f64, x: Vec3 },

    #[error("field has no sign change; cannot extract an interface")]
    EmptyInterface,

    #[error("characteristic left the inflated domain box at s = {s:.6}")]
    BlowUp { s: f64 },

    #[error("non-finite value produced in {what} at t = {t:.6}")]
    NonFinite { what: &'static str, t: f64 },

    #[error("seed-to-position map lost injectivity in leg {leg} after {retries} band shrinks")]
    InjectivityLost { leg: usize, retries: u32 },

    #[error("forward-map Jacobian determinant {det:.3e} <= 0 in leg {leg}")]
    JacobianSign { det: f64, leg: usize },

    #[error("tube has no coverage at t = {t:.6} near ({}, {}, {})", x.x, x.y, x.z)]
    OutOfTube { t: f64, x: Vec3 },

    #[error("grids are incompatible: {0}")]
    GridMismatch(String),

    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    #[error("expression error: {0}")]
    Expression(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {why}")]
    Parse { line: usize, why: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid { what, why: why.into() }
    }
}
