//! Central tolerances.
//!
//! Every threshold used by margin checks and verdicts lives here so reports
//! and tests agree on what "passes" means. Grouped by origin:
//! machine-precision slack for exact identities, looser slack where a ratio
//! amplifies rounding, and the mass floor below which ratios are not formed.

/// Mass floor: below this a mass is treated as vanishing and any quantity
/// that would divide by it is flagged invalid or skipped instead.
pub const MASS: f64 = 1e-13;

/// Most negative value an individual pmf mass may take after arithmetic.
pub const PMF_NEG: f64 = -1e-15;

/// Total-mass defect allowed in a pmf.
pub const PMF_SUM: f64 = 1e-12;

/// Floor for `|v|`; below it a path is treated as having degenerate speed.
pub const SPEED: f64 = 1e-12;

/// Slack for k-monotonicity, generalized log-concavity and the cubic
/// inequality margins. These are polynomial identities in quantities of
/// order one, so a few hundred ulps suffice.
pub const MARGIN: f64 = 1e-11;

/// Slack for the `h̃ - h` margins and for overall condition verdicts.
/// The `h̃` ratio divides by a local log-concavity gap, costing a digit.
pub const DELTA: f64 = 1e-10;

/// Denominator floor for `h̃`: entries with a log-concavity gap below this
/// are skipped rather than divided.
pub const DENOM: f64 = 1e-13;

/// Agreement required between the two closed forms of the mixing
/// coefficients and between paired algebraic routes.
pub const CROSS_CHECK: f64 = 1e-11;

/// Modified-transport residual allowed at interior grid points.
pub const RESIDUAL: f64 = 1e-9;

/// Most negative value tolerated in a recovered flux distribution before
/// the path is rejected as non-monotone.
pub const NEG_TRANSPORT: f64 = -1e-9;

/// Ceiling for the second derivative of entropy on certified-concave paths.
pub const H2: f64 = 1e-8;

/// Identity residual allowed in exact algebraic cross-checks
/// (factorizations, remainder identities, induction reassembly).
pub const IDENTITY: f64 = 1e-11;

/// Residual allowed in the leave-one-out product identity.
pub const SOI_BVAR: f64 = 1e-12;
