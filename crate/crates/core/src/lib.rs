//! # dotk-core
//!
//! Numerical machinery for transport of integer-valued random variables:
//! constant-speed interpolations of probability mass functions on `{0,…,n}`,
//! the mixing coefficients that decompose them, a discrete Benamou–Brenier
//! distance, and the inequality ladder (k-monotonicity, generalized
//! log-concavity, the `h ≤ h̃` bound) that certifies concavity of entropy
//! along such paths.
//!
//! The crate is organised around the objects it computes:
//!
//! - [`distributions`] — Bernoulli-sum (Poisson-binomial) mass functions,
//!   entropy, log-concavity and ultra-log-concavity margins.
//! - [`transport`] — generic constant-speed paths: recovering `(v, α, g)`
//!   from a path, the second-order coefficient `h`, condition margins, and
//!   both routes to the second derivative of entropy.
//! - [`shepp_olkin`] — closed forms for the interpolation induced by affine
//!   Bernoulli parameter lines, its pairwise quadratic-form certificate, and
//!   the Gaussian surrogate.
//! - [`benamou_brenier`] — the path action, its minimisation, the W1
//!   comparison, and two closed-form two-point contrasts.
//! - [`couplings`] — thinning, coupling-induced interpolation, the quantile
//!   coupling, and the translation path.
//! - [`appendix`] — cubic inequalities satisfied by Bernoulli-sum mass
//!   functions with randomized verification campaigns.
//!
//! Everything is pure and deterministic; randomized campaigns are seeded and
//! reproduce bit-identical summaries.

// index-based loops over aligned slices read better than iterator chains in
// the stencil-heavy code below
#![allow(clippy::needless_range_loop)]

pub mod appendix;
pub mod benamou_brenier;
pub mod couplings;
pub mod distributions;
pub mod error;
pub mod numerics;
pub mod sampling;
pub mod shepp_olkin;
pub mod tol;
pub mod transport;

pub use distributions::{
    bernoulli_sum_pmf, entropy, leave_out_pmf, log_concavity_margins, ulc_margins,
    BernoulliSystem, LogConcavityMargins, Pmf,
};
pub use error::{Error, Result};
pub use transport::{
    concavity_certificate, condition_report, decompose_constant_speed,
    entropy_second_derivative, entropy_second_derivative_fd, glc_margins, h_from_alpha, h_tilde,
    ConditionReport, DiscretePath, TransportDecomposition,
};
