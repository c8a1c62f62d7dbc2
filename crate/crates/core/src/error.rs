//! Error type shared across the crate.

use crate::inclusion::Space;
use thiserror::Error;

#[derive(Error, Debug, Clone)]
pub enum Error {
    #[error("matrix is not Hermitian (residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not positive (min eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },

    #[error("eigenvalue {min_eig:.3e} below cutoff for log/fractional power")]
    SingularForLog { min_eig: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("element lives in {got:?}, operation expects {expected:?}")]
    WrongSpace { expected: Space, got: Space },

    #[error("operands belong to different inclusion models")]
    ModelMismatch,

    #[error("superoperator is not in the represented image of B1 (residual {residual:.3e})")]
    NotBimodule { residual: f64 },

    #[error("transfer spectral radius {radius:.6} exceeds 1; Cesàro mean undefined")]
    NotPowerBounded { radius: f64 },

    #[error("density is not strictly positive (min eigenvalue {min_eig:.3e})")]
    NotPositiveDensity { min_eig: f64 },

    #[error("negative evolution time {t}")]
    NegativeTime { t: f64 },

    #[error("CS0 of the generator kernel is not full; spectral-gap bound not asserted")]
    NotConnected,

    #[error("symmetry datum violates its invariants: {what}")]
    InvalidDelta { what: String },

    #[error("semigroup is not relatively ergodic (fixed-point dimension {dim})")]
    NotErgodic { dim: usize },

    #[error("bimodule GNS symmetry fails at the channel level (residual {residual:.3e})")]
    NotSymmetric { residual: f64 },

    #[error("joint-spectrum generators do not commute (residual {residual:.3e})")]
    NotCommuting { residual: f64 },

    #[error("D is singular or not strictly positive")]
    SingularD,

    #[error("support violation: ker(sigma) not contained in ker(rho)")]
    SupportViolation,

    #[error("normal equations ill-conditioned (cond {cond:.3e}); pass opt-in regularization")]
    IllConditioned { cond: f64 },

    #[error("direction is not in the range of the divergence (residual {residual:.3e})")]
    NotInRange { residual: f64 },

    #[error("no intertwining constant supplied or found")]
    NoBeta,

    #[error("no catalog extension achieved the requested residual")]
    NoCandidate,

    #[error("algebra relation violated during construction: {what}")]
    RelationViolation { what: String },
}

pub type Result<T> = std::result::Result<T, Error>;
