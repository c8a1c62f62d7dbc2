//! Shared tolerance policy.
//!
//! Every theorem check in the crate compares a residual against one of three
//! thresholds, all relative to the spectral scale of the operands. They can be
//! scaled globally (e.g. for CI on slow float hardware) through `scale`.

/// Tolerance configuration shared by all verification routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tol {
    /// Hermiticity residual threshold, relative to `1 + ‖A‖₂`.
    pub herm: f64,
    /// Eigenvalue floor for positivity verdicts: `min eig ≥ -eig_floor·(1+‖A‖₂)`.
    pub eig_floor: f64,
    /// Generic equality threshold for identity checks.
    pub eq: f64,
    /// Global multiplier applied to all three thresholds.
    pub scale: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol { herm: 1e-10, eig_floor: 1e-10, eq: 1e-9, scale: 1.0 }
    }
}

impl Tol {
    pub fn herm_tol(&self) -> f64 {
        self.herm * self.scale
    }

    pub fn eig_floor_tol(&self) -> f64 {
        self.eig_floor * self.scale
    }

    pub fn eq_tol(&self) -> f64 {
        self.eq * self.scale
    }

    /// Tolerance scaled by the size of an operand.
    pub fn rel(&self, base: f64, norm: f64) -> f64 {
        base * self.scale * (1.0 + norm)
    }
}
