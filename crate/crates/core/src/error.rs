use thiserror::Error;

/// Errors surfaced by the numerical modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MkgError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("radius {r} outside the domain [0, {r_max}]")]
    OutOfDomain { r: f64, r_max: f64 },

    #[error("negative radius {0} rejected")]
    NegativeRadius(f64),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("domain too small: tail estimate {tail:.3e} exceeds tolerance {tol:.3e}")]
    DomainTooSmall { tail: f64, tol: f64 },

    #[error("non-finite value at node {node}, t = {t}")]
    NonFinite { node: usize, t: f64 },

    #[error("instability detected at t = {t}: sup-norm {sup:.3e} exceeds {limit:.3e}")]
    Instability { t: f64, sup: f64, limit: f64 },

    #[error("invalid scheme parameters: {0}")]
    InvalidScheme(String),

    #[error("stencil starvation: {0}")]
    StencilStarvation(String),

    #[error("no limit: {0}")]
    NoLimit(String),

    #[error("undersampled phase: jump of {jump:.3} rad between samples {index} and {next}", next = index + 1)]
    Undersampled { index: usize, jump: f64 },

    #[error("insufficient samples: need {need}, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("coverage error: table covers [{lo}, {hi}] but [{need_lo}, {need_hi}] is required")]
    Coverage { lo: f64, hi: f64, need_lo: f64, need_hi: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimated error {err:.3e} > target {target:.3e}")]
    Quadrature { err: f64, target: f64 },

    #[error("divergent integrand: {0}")]
    Divergent(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MkgError {
    fn from(err: std::io::Error) -> Self {
        MkgError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MkgError>;
