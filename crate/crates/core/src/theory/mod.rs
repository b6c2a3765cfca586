//! Numerical verification of the second-order structure of the
//! symmetric-noise training loss.
//!
//! For a smooth map f and eps ~ N(0, sigma^2 I), the expected loss
//! E ||f(x_hat + eps) - (x + eps)||^2 expands as
//!
//!   ||r||^2 + sigma^2 (||J(x_hat) - I||_F^2 + r . laplacian f(x_hat))
//!
//! plus a remainder of order sigma^4. This module estimates the loss by
//! antithetic Monte-Carlo, computes the expansion terms from exact or
//! finite-difference derivatives, fits the remainder order, and runs the
//! companion checks: the clean-target (zero-anchored) contrast, odd-moment
//! cancellation, the Gaussian fourth moment E ||eps||^4 = (d^2 + 2d) sigma^4,
//! idempotency, and the contractive-penalty comparison.
//!
//! Smoothness of the checked map (continuous third and fourth derivatives
//! where the expansion needs them) is assumed, not verified; the analytic
//! fixtures satisfy it by construction.

mod checks;
mod expansion;
pub mod map;
mod mc;

pub use checks::{
    clean_target_terms, gaussian_moment_check, idempotency_gap, odd_moment_check, contractive_penalty,
    CleanTargetReport, IdempotencyReport, MomentReport, OddMomentReport,
};
pub use expansion::{
    expansion_report, expansion_terms, quartic_remainder_oracle, remainder_slope, ExpansionReport,
    ExpansionTerms, SlopeFit, SlopeStatus,
};
pub use map::{AffineMap, ElementwisePolynomial, NetworkMap, SmoothMap};
pub use mc::{antithetic_mean, mc_clean_target_loss, mc_fae_loss, McEstimate};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("vector length {got} does not match map dimension {want}")]
    Dim { got: usize, want: usize },
    #[error("invalid verifier input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Net(#[from] crate::net::NetError),
}
