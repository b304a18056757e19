use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Parameters of the exponential Hawkes kernel.
///
/// Each event spawns offspring at rate `a·e^{-b x}` after a delay `x`, and
/// immigrants arrive at constant rate `nu`. The branching ratio is `a / b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub a: f64,
    pub b: f64,
    pub nu: f64,
}

impl KernelParams {
    /// Validates `a ≥ 0`, `b > 0`, `nu ≥ 0` (all finite).
    ///
    /// `a ≥ b` is accepted: finite-horizon moments remain well defined. Use
    /// [`KernelParams::is_subcritical`] to check for a stationary regime.
    pub fn new(a: f64, b: f64, nu: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0) {
            return domain(format!("kernel amplitude a must be finite and >= 0, got {a}"));
        }
        if !(b.is_finite() && b > 0.0) {
            return domain(format!("decay rate b must be finite and > 0, got {b}"));
        }
        if !(nu.is_finite() && nu >= 0.0) {
            return domain(format!("immigrant intensity nu must be finite and >= 0, got {nu}"));
        }
        Ok(Self { a, b, nu })
    }

    /// Mean number of direct offspring per event, `a / b`.
    pub fn branching_ratio(&self) -> f64 {
        self.a / self.b
    }

    pub fn is_subcritical(&self) -> bool {
        self.a < self.b
    }

    /// True when `a` and `b` are bit-equal, which selects the `a = b`
    /// closed forms.
    pub fn is_critical_branch(&self) -> bool {
        self.a == self.b
    }

    pub fn with_nu(self, nu: f64) -> Self {
        Self { nu, ..self }
    }

    pub(crate) fn cache_key(&self) -> [u64; 2] {
        [self.a.to_bits(), self.b.to_bits()]
    }
}
