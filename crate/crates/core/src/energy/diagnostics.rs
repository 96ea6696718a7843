use serde::{Deserialize, Serialize};

use super::{energy_angular, grad_angular, hessian_angular, mat_vec};
use crate::dynamics::AngularTrajectory;
use crate::error::{invalid, Result};
use crate::geometry::{circle_dist, circular_mean, dot, wrap_angle, CapFamily};

/// Indices of particles lying in each cap of height `2 eps`, at the angles `theta`.
pub fn cap_members(theta: &[f64], caps: &CapFamily) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); caps.k()];
    for (i, t) in theta.iter().enumerate() {
        if let Some(q) = caps.locate(&[t.cos(), t.sin()], 2.0) {
            out[q].push(i);
        }
    }
    out
}

/// Largest angular distance between two members of the same group.
pub fn spread(theta: &[f64], members: &[usize]) -> f64 {
    let mut s: f64 = 0.0;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            s = s.max(circle_dist(theta[i], theta[j]));
        }
    }
    s
}

/// Parameters of the Polyak–Lojasiewicz check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlParams {
    pub beta: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Defaults to the midpoint of its admissible interval.
    pub delta: Option<f64>,
}

impl PlParams {
    pub fn delta_range(&self) -> (f64, f64) {
        let lo = 8.0 * (1.0 + self.beta) * (-(1.0 - self.alpha) * self.beta).exp() * (-0.5f64).exp();
        (lo, 1.0)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| {
            let (lo, hi) = self.delta_range();
            0.5 * (lo + hi)
        })
    }

    /// `(kappa with e^{1/2}, kappa with e^{-1/2})`; both forms are reported and the
    /// smaller one is used for the bound.
    pub fn kappa(&self, n: usize) -> (f64, f64) {
        let tail = 4.0 * (1.0 + self.beta) * (-(1.0 - self.alpha) * self.beta).exp();
        let d = self.delta();
        let n = n as f64;
        ((d * 0.5f64.exp() / 2.0 - tail) / n, (d * (-0.5f64).exp() / 2.0 - tail) / n)
    }

    /// Largest within-cap diameter for which the contraction argument applies.
    pub fn tau_small(&self) -> f64 {
        ((1.0 - self.delta()) / (self.beta + 0.5)).sqrt() / 8.0
    }

    pub fn neighbourhood_radius(&self) -> f64 {
        (-self.lambda * self.beta / 2.0).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlSample {
    pub t: f64,
    /// Every cap has collapsed below `e^{-lambda beta / 2}`; such samples are skipped.
    pub in_slow_region: bool,
    pub h: f64,
    pub bound: f64,
    pub grad_norm_sq: f64,
    /// Within-cap diameters are below [`PlParams::tau_small`].
    pub tau_small: bool,
    pub h_below_bound: bool,
    pub claim_ok: bool,
    /// `h < 0` and the gradient-domination claim holds.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlReport {
    pub kappa_strong: f64,
    pub kappa_weak: f64,
    pub samples: Vec<PlSample>,
    pub checks_total: usize,
    pub checks_passed: usize,
    pub first_failure_t: Option<f64>,
}

/// Within a spread-out cap, the largest gradient component is at most `e/2`
/// times the larger of the two extremal ones.
pub fn claim_holds(theta: &[f64], grad: &[f64], members: &[usize], center: f64) -> bool {
    if members.len() < 2 {
        return true;
    }
    let mut sorted = members.to_vec();
    sorted.sort_by(|&a, &b| wrap_angle(theta[a] - center).total_cmp(&wrap_angle(theta[b] - center)));
    let first = grad[sorted[0]].abs();
    let last = grad[*sorted.last().unwrap()].abs();
    let mx = sorted.iter().map(|&i| grad[i].abs()).fold(0.0, f64::max);
    mx <= std::f64::consts::E / 2.0 * first.max(last) * (1.0 + 1e-12)
}

/// Evaluates `H(t) = <Hess E grad E, grad E>` along an angular trajectory and
/// compares it with `-(kappa / 2n) |grad E|^2`.
pub fn pl_diagnostic(traj: &AngularTrajectory, caps: &CapFamily, params: &PlParams) -> Result<PlReport> {
    if caps.centers.iter().any(|c| c.dim() != 2) {
        return invalid("PL diagnostic needs caps on the circle");
    }
    let n = traj.weights.len();
    let (ks, kw) = params.kappa(n);
    let kappa = ks.min(kw);
    let radius = params.neighbourhood_radius();
    let tau = params.tau_small();
    let centers: Vec<f64> = caps.centers.iter().map(|c| c.to_angle()).collect();
    let mut samples = Vec::with_capacity(traj.records.len());
    let (mut total, mut passed, mut first_fail) = (0, 0, None);
    for r in &traj.records {
        let members = cap_members(&r.theta, caps);
        let spreads: Vec<f64> = members.iter().map(|m| spread(&r.theta, m)).collect();
        let in_slow = spreads.iter().all(|&s| s <= radius);
        let g = grad_angular(&r.theta, &traj.weights, params.beta);
        let hess = hessian_angular(&r.theta, &traj.weights, params.beta);
        let h = dot(&mat_vec(&hess, &g), &g);
        let gn = dot(&g, &g);
        let bound = -kappa / (2.0 * n as f64) * gn;
        let claim_ok = members
            .iter()
            .zip(&spreads)
            .zip(&centers)
            .filter(|((_, s), _)| **s >= radius)
            .all(|((m, _), c)| claim_holds(&r.theta, &g, m, *c));
        let pass = h < 0.0 && claim_ok;
        if !in_slow {
            total += 1;
            if pass {
                passed += 1;
            } else if first_fail.is_none() {
                first_fail = Some(r.t);
            }
        }
        samples.push(PlSample {
            t: r.t,
            in_slow_region: in_slow,
            h,
            bound,
            grad_norm_sq: gn,
            tau_small: spreads.iter().all(|&s| s <= tau),
            h_below_bound: h <= bound,
            claim_ok,
            pass,
        });
    }
    Ok(PlReport {
        kappa_strong: ks,
        kappa_weak: kw,
        samples,
        checks_total: total,
        checks_passed: passed,
        first_failure_t: first_fail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub t: f64,
    /// `max_i d_i d_{j_i} E` over nearest opposite-sign neighbours.
    pub l: f64,
    pub integral_l: f64,
    pub grad_norm_sq: f64,
    /// `exp(-integral/2) |grad E(0)|^2`.
    pub lower_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelerationReport {
    pub samples: Vec<AccelSample>,
    /// Time of the first sample where the separation or sign hypothesis failed.
    pub hypothesis_failed_at: Option<f64>,
}

impl AccelerationReport {
    pub fn all_pass(&self) -> bool {
        self.samples.iter().all(|s| s.pass)
    }
}

fn accel_l(theta: &[f64], weights: &[f64], beta: f64, separation: f64) -> Option<f64> {
    let n = theta.len();
    let g = grad_angular(theta, weights, beta);
    let h = hessian_angular(theta, weights, beta);
    let mut l = f64::NEG_INFINITY;
    for i in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = circle_dist(theta[i], theta[j]);
            if d < separation {
                return None;
            }
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((j, d));
            }
        }
        let (j, _) = best?;
        if g[i] * g[j] >= 0.0 {
            return None;
        }
        l = l.max(h[i][j]);
    }
    Some(l)
}

/// Checks `|grad E(t)|^2 >= exp(-(1/2) int_0^t L) |grad E(0)|^2` while every pair
/// stays `separation` apart and each particle's nearest neighbour pulls the
/// other way. `L` is integrated with the trapezoid rule over the samples.
pub fn acceleration_diagnostic(traj: &AngularTrajectory, separation: f64) -> AccelerationReport {
    let beta = traj.beta;
    let w = &traj.weights;
    let mut samples: Vec<AccelSample> = Vec::new();
    let mut failed = None;
    let mut g0 = 0.0;
    for r in &traj.records {
        let Some(l) = accel_l(&r.theta, w, beta, separation) else {
            failed = Some(r.t);
            break;
        };
        let g = grad_angular(&r.theta, w, beta);
        let gn = dot(&g, &g);
        let integral = match samples.last() {
            None => {
                g0 = gn;
                0.0
            }
            Some(p) => p.integral_l + 0.5 * (r.t - p.t) * (p.l + l),
        };
        let lower = (-0.5 * integral).exp() * g0;
        samples.push(AccelSample {
            t: r.t,
            l,
            integral_l: integral,
            grad_norm_sq: gn,
            lower_bound: lower,
            pass: gn >= lower * (1.0 - 1e-9),
        });
    }
    AccelerationReport { samples, hypothesis_failed_at: failed }
}

/// Moves the members of each cap to their weighted circular mean.
pub fn collapse_caps(theta: &[f64], weights: &[f64], caps: &CapFamily) -> Vec<f64> {
    let mut v = theta.to_vec();
    for m in cap_members(theta, caps) {
        if m.is_empty() {
            continue;
        }
        let th: Vec<f64> = m.iter().map(|&i| theta[i]).collect();
        let ws: Vec<f64> = m.iter().map(|&i| weights[i]).collect();
        let mean = circular_mean(&th, &ws, th[0]);
        for &i in &m {
            v[i] = theta[i] + wrap_angle(mean - theta[i]);
        }
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowMotionCheck {
    pub s: f64,
    pub t: f64,
    pub displacement: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Displacement bound near the slow manifold:
/// `|u(t) - u(s)| <= sqrt(E(v(s)) - E(u(s))) + delta (t - s + 1)`, with `v(s)`
/// the within-cap collapse of `u(s)`. The energy is the raw one and the flow
/// is gradient ascent, so the difference is taken as `E(v) - E(u)`.
pub fn slow_motion_check(
    traj: &AngularTrajectory,
    caps: &CapFamily,
    delta: f64,
    s_idx: usize,
    t_idx: usize,
) -> SlowMotionCheck {
    let rs = &traj.records[s_idx];
    let rt = &traj.records[t_idx];
    let w = &traj.weights;
    let v = collapse_caps(&rs.theta, w, caps);
    let gap = (energy_angular(&v, w, traj.beta).raw - energy_angular(&rs.theta, w, traj.beta).raw).max(0.0);
    let disp = rs.theta.iter().zip(&rt.theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let bound = gap.sqrt() + delta * (rt.t - rs.t + 1.0);
    SlowMotionCheck { s: rs.t, t: rt.t, displacement: disp, bound, pass: disp <= bound }
}
