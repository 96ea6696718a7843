//! Numeric tolerances shared across modules.
//!
//! Every threshold used by a pass/fail check is named here so the values can
//! be audited in one place.

/// Allowed deviation of `|x|` from 1 for a point on the sphere.
pub const UNIT_NORM: f64 = 1e-12;

/// Relative error allowed between an analytic quantity and its finite-difference oracle.
pub const ORACLE_REL: f64 = 1e-6;

/// Absolute error allowed for algebraic identities (e.g. Laplacian form of a quadratic form).
pub const IDENTITY_ABS: f64 = 1e-10;

/// Local error target of the adaptive scalar integrators.
pub const ADAPTIVE_RTOL: f64 = 1e-10;

/// Resolution of event location (merge instants, hitting times) in the integration variable.
pub const EVENT_RESOLUTION: f64 = 1e-10;

/// Per-step slack on energy monotonicity, in units of `dt^2`.
pub const ENERGY_SLACK_DT2: f64 = 10.0;

/// Agreement between the mean-field atom transport and the particle system.
pub const MEANFIELD_CONSISTENCY: f64 = 1e-8;

/// Runtime-adjustable bundle of the defaults above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub unit_norm: f64,
    pub oracle_rel: f64,
    pub identity_abs: f64,
    pub adaptive_rtol: f64,
    pub event_resolution: f64,
    pub energy_slack_dt2: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unit_norm: UNIT_NORM,
            oracle_rel: ORACLE_REL,
            identity_abs: IDENTITY_ABS,
            adaptive_rtol: ADAPTIVE_RTOL,
            event_resolution: EVENT_RESOLUTION,
            energy_slack_dt2: ENERGY_SLACK_DT2,
        }
    }
}
