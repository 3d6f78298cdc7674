//! Every numeric acceptance threshold used by the harness, in one place.

/// Chi-square tests pass when the p-value exceeds this.
pub const P_VALUE_FLOOR: f64 = 1e-3;

/// Monte Carlo agreement is judged at this many standard errors.
pub const SIGMA_ENVELOPE: f64 = 3.0;

/// Slack for the heat-kernel and eigenvalue inequalities.
pub const NUMERIC_SLACK: f64 = 1e-9;

/// Slack for prefix-sum majorization by the auxiliary process.
pub const MAJORIZATION_SLACK: f64 = 1e-8;

/// Slack for the time-stepped collapsed-walk domination check.
pub const DOMINATION_SLACK: f64 = 1e-6;

/// Relative error allowed between analytic and finite-difference derivatives.
pub const DERIVATIVE_REL_TOL: f64 = 1e-4;

/// Step of the five-point finite-difference stencil for derivative checks.
pub const DERIVATIVE_STEP: f64 = 1e-3;

/// Derivatives smaller than this in magnitude are not compared relatively.
pub const DERIVATIVE_FLOOR: f64 = 1e-6;

/// Allowed relative deviation of the per-phase rewiring mean from `8T`.
pub const RATE_REL_TOL: f64 = 0.10;

/// Minimum replicas per permutation cell in the uniformity test.
pub const REPLICAS_PER_CELL: usize = 20;

/// Two-sided tail mass of a single `SIGMA_ENVELOPE` test.
pub fn envelope_alpha() -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let z = Normal::standard();
    2.0 * z.sf(SIGMA_ENVELOPE)
}

/// Per-entry z threshold that keeps the family-wise error of `family`
/// simultaneous two-sided tests at the single-test `SIGMA_ENVELOPE` level.
pub fn family_envelope(family: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let family = family.max(1) as f64;
    let alpha = envelope_alpha();
    let per_entry = -(-alpha).ln_1p() / family;
    // 1 - (1 - alpha)^(1/m), written to keep precision for small alpha
    let per_entry = -(-per_entry).exp_m1();
    Normal::standard().inverse_cdf(1.0 - per_entry / 2.0)
}
