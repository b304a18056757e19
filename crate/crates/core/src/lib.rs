//! Exact joint moments and cumulants of Hawkes processes with exponential
//! kernel `a·e^{-b x}` and constant immigrant intensity `ν`.
//!
//! The computation runs a set-partition recursion for the cumulant functions
//! `κ_z` of a cluster started from one point at `z`. Every `κ_z` lives in the
//! class of exponential polynomials `Σ c·z^p·e^{ρz}` ([`exppoly::ExpPoly`]),
//! which is closed under products and under the branching operator
//! `(I-Γ)^{-1}Γ`, so the whole recursion is carried out in closed form.
//!
//! Modules:
//! - [`combinatorics`]: set partitions, Bell polynomials, moment/cumulant transforms.
//! - [`exppoly`]: the exponential-polynomial algebra and its integrals.
//! - [`borel`]: the Borel distribution (total progeny of a Poisson branching process).
//! - [`hawkes`]: cumulant functions, joint cumulants and joint moments.
//! - [`simulator`]: cluster and thinning simulation, Monte Carlo estimates, path export.

pub mod borel;
pub mod combinatorics;
mod error;
pub mod exppoly;
pub mod hawkes;
pub mod params;
pub mod simulator;

pub use error::{Error, Result};
pub use params::KernelParams;
