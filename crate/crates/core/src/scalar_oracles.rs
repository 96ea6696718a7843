//! One-dimensional comparison ODEs used to cross-check collapse and
//! clustering timescales.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ode::Dopri5;
use crate::tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseHit {
    /// First time with `1 - u <= e^{-c beta}`; `None` if the horizon was reached first.
    pub t: Option<f64>,
    /// `e^{beta(1 - u0)} / u0 + beta^2 c e / (beta - 1)`.
    pub bound: f64,
    /// `bound - t`.
    pub margin: Option<f64>,
}

/// Hitting time for `u' = u (1 - u) e^{beta (u - 1)}`.
///
/// The ODE is integrated in `z = log(1 - u)`, which keeps the target
/// `z <= -c beta` representable for large `c beta`.
pub fn collapse_hitting_time(u0: f64, beta: f64, c: f64, rtol: f64) -> Result<CollapseHit> {
    if !(u0 > 0.0 && u0 <= 1.0) {
        return invalid(format!("u0 = {u0} outside (0, 1]"));
    }
    if !(beta > 1.0 && c > 0.0) {
        return invalid("need beta > 1 and c > 0");
    }
    let bound = (beta * (1.0 - u0)).exp() / u0 + beta * beta * c * std::f64::consts::E / (beta - 1.0);
    if u0 == 1.0 {
        return Ok(CollapseHit { t: Some(0.0), bound, margin: Some(bound) });
    }
    let z0 = (1.0 - u0).ln();
    let f = |_: f64, z: &[f64]| {
        let w = z[0].exp();
        vec![-(1.0 - w) * (-beta * w).exp()]
    };
    let target = -c * beta;
    let solver = Dopri5 { rtol, atol: rtol * 1e-2, ..Dopri5::default() };
    let hit = solver.integrate_until(&f, 0.0, &[z0], 10.0 * bound + 10.0, &|_, z| z[0] - target, 1e-13)?;
    let t = hit.hit.then_some(hit.t);
    Ok(CollapseHit { t, bound, margin: t.map(|t| bound - t) })
}

/// Optional forcing `c(beta) = +-K e^{-kappa beta} log(beta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sign", rename_all = "lowercase")]
pub enum Forcing {
    None,
    Plus { k: f64, kappa: f64 },
    Minus { k: f64, kappa: f64 },
}

impl Forcing {
    fn value(&self, beta: f64) -> f64 {
        match *self {
            Forcing::None => 0.0,
            Forcing::Plus { k, kappa } => k * (-kappa * beta).exp() * beta.ln(),
            Forcing::Minus { k, kappa } => -k * (-kappa * beta).exp() * beta.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringTimes {
    /// Hitting time of `sqrt(log beta / beta)`.
    pub t_beta: Option<f64>,
    /// Hitting time of `1 / sqrt(beta log beta)`.
    pub big_t_beta: Option<f64>,
    /// `2/c + 2 log tan(u0/2) / (c log beta) - log log beta / (c log beta)`.
    pub asymptotic_t: f64,
    /// `2 log log beta / (c log beta)`, the stated bound on `T - t`.
    pub gap_bound: f64,
    /// Exact hitting time of the first level when there is no forcing.
    pub closed_form_t: Option<f64>,
    /// `|t - 2/c| - (2 log tan(u0/2) + log log beta) / (c log beta)`; `<= 0` when the
    /// two-sided estimate holds.
    pub two_sided_residual: Option<f64>,
}

/// Hitting times for `u' = -c log(beta) sin u + c(beta)`.
pub fn clustering_timescale(u0: f64, beta: f64, c: f64, forcing: Forcing) -> Result<ClusteringTimes> {
    if !(u0 > 0.0 && u0 < std::f64::consts::PI) {
        return invalid(format!("u0 = {u0} outside (0, pi)"));
    }
    if !(beta > std::f64::consts::E && c > 0.0) {
        return invalid("need beta > e and c > 0");
    }
    let lb = beta.ln();
    let llb = lb.ln();
    let level_t = (lb / beta).sqrt();
    let level_big = 1.0 / (beta * lb).sqrt();
    let fv = forcing.value(beta);
    let f = move |_: f64, u: &[f64]| vec![-c * lb * u[0].sin() + fv];
    let solver = Dopri5 { rtol: tolerance::ADAPTIVE_RTOL, atol: 1e-16, ..Dopri5::default() };
    let horizon = 1e3 * (1.0 + 1.0 / (c * lb));
    let first = solver.integrate_until(&f, 0.0, &[u0], horizon, &|_, u| u[0] - level_t, 1e-13)?;
    let t_beta = first.hit.then_some(first.t);
    let big_t_beta = if first.hit {
        let second =
            solver.integrate_until(&f, first.t, &first.y, first.t + horizon, &|_, u| u[0] - level_big, 1e-13)?;
        second.hit.then_some(second.t)
    } else {
        None
    };
    let lt = (u0 / 2.0).tan().ln();
    let asymptotic_t = 2.0 / c + 2.0 * lt / (c * lb) - llb / (c * lb);
    let closed_form_t = matches!(forcing, Forcing::None).then(|| (lt - (level_t / 2.0).tan().ln()) / (c * lb));
    Ok(ClusteringTimes {
        t_beta,
        big_t_beta,
        asymptotic_t,
        gap_bound: 2.0 * llb / (c * lb),
        closed_form_t,
        two_sided_residual: t_beta.map(|t| (t - 2.0 / c).abs() - (2.0 * lt + llb) / (c * lb)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapse_bound_value() {
        let h = collapse_hitting_time(0.9, 5.0, 1.0, 1e-10).unwrap();
        assert!((h.bound - 18.82).abs() < 5e-3, "{}", h.bound);
        assert!(h.margin.unwrap() >= 0.0);
    }

    #[test]
    fn asymptotic_value() {
        let r = clustering_timescale(1.0, 1000.0, 1.0, Forcing::None).unwrap();
        assert!((r.asymptotic_t - 1.545).abs() < 1e-3, "{}", r.asymptotic_t);
    }
}
