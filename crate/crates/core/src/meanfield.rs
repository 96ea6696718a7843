//! Transport of atomic probability measures by the SA velocity field.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::IntegratorSpec;
use crate::error::{invalid, Error, Result};
use crate::geometry::{cap_alpha, dist_sq, dot, CapFamily, Configuration};

/// Separation certificate for a measure: atoms sit in `eps`-caps, each cap
/// carries mass `1/k`, and `gamma` (computed with `k`) exceeds `8 eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureCertificate {
    pub caps: CapFamily,
    pub assignment: Vec<usize>,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl MeasureCertificate {
    pub fn k(&self) -> usize {
        self.caps.k()
    }
}

pub fn measure_gamma(alpha: f64, eps: f64, beta: f64, k: usize) -> f64 {
    let k = k as f64;
    1.0 - alpha - 8.0 * eps - (2.0 * k * k / eps).ln() / beta
}

pub fn certify_measure(atoms: &Configuration, caps: &CapFamily, beta: f64) -> Result<MeasureCertificate> {
    let total = atoms.total_weight();
    if (total - 1.0).abs() > 1e-9 {
        return invalid(format!("measure has total mass {total}, expected 1"));
    }
    let k = caps.k();
    let mut assignment = Vec::with_capacity(atoms.n());
    let mut mass = vec![0.0; k];
    for (a, x) in atoms.points().enumerate() {
        let q = caps.locate(x, 1.0).ok_or_else(|| Error::NotSeparated(format!("atom {a} lies in no cap")))?;
        mass[q] += atoms.weights()[a];
        assignment.push(q);
    }
    if let Some((q, m)) = mass.iter().enumerate().find(|(_, m)| (*m - 1.0 / k as f64).abs() > 1e-9) {
        return Err(Error::NotSeparated(format!("cap {q} carries mass {m}, expected 1/{k}")));
    }
    let alpha = cap_alpha(&caps.centers, caps.eps).map_err(|e| Error::NotSeparated(e.to_string()))?;
    let gamma = measure_gamma(alpha, caps.eps, beta, k);
    if gamma <= 8.0 * caps.eps {
        return Err(Error::NotSeparated(format!("gamma = {gamma:.6} must exceed 8 eps = {:.6}", 8.0 * caps.eps)));
    }
    Ok(MeasureCertificate { caps: caps.clone(), assignment, alpha, gamma, beta })
}

/// `v[mu](x) = sum_j m_j e^{beta <x, x_j>} P_x x_j / sum_k m_k e^{beta <x, x_k>}`.
pub fn meanfield_velocity(mu: &Configuration, x: &[f64], beta: f64) -> Vec<f64> {
    let logits: Vec<f64> = mu.points().map(|p| beta * dot(x, p)).collect();
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut y = vec![0.0; x.len()];
    let mut z = 0.0;
    for ((p, l), m) in mu.points().zip(&logits).zip(mu.weights()) {
        let w = m * (l - mx).exp();
        z += w;
        y.iter_mut().zip(p).for_each(|(a, b)| *a += w * b);
    }
    y.iter_mut().for_each(|v| *v /= z);
    let c = dot(x, &y);
    y.iter().zip(x).map(|(a, b)| a - c * b).collect()
}

fn field(mu: &Configuration, beta: f64) -> Vec<f64> {
    let d = mu.dim();
    let parts: Vec<Vec<f64>> = if mu.n() >= 64 {
        (0..mu.n()).into_par_iter().map(|a| meanfield_velocity(mu, mu.point(a), beta)).collect()
    } else {
        (0..mu.n()).map(|a| meanfield_velocity(mu, mu.point(a), beta)).collect()
    };
    let mut out = Vec::with_capacity(mu.n() * d);
    parts.into_iter().for_each(|p| out.extend(p));
    out
}

fn shifted(mu: &Configuration, h: f64, v: &[f64]) -> Configuration {
    let coords = mu.coords().iter().zip(v).map(|(a, b)| a + h * b).collect();
    let mut y = Configuration::from_raw(mu.dim(), coords, mu.weights().to_vec());
    y.renormalize();
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfCapState {
    pub eta: f64,
    /// `(1/2) sum_a m_a |x_a - x_q|^2` over atoms that started in the cap.
    pub v: f64,
    /// All atoms that started in the cap are still in its `2 eps` enlargement.
    pub contained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfRecord {
    pub t: f64,
    pub atoms: Configuration,
    pub caps: Vec<MfCapState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfTrajectory {
    pub beta: f64,
    pub records: Vec<MfRecord>,
}

fn cap_states(atoms: &Configuration, cert: Option<&MeasureCertificate>) -> Vec<MfCapState> {
    let Some(cert) = cert else { return Vec::new() };
    (0..cert.k())
        .map(|q| {
            let w = cert.caps.centers[q].as_slice();
            let members: Vec<usize> = (0..atoms.n()).filter(|&a| cert.assignment[a] == q).collect();
            let (eta, star) = members
                .iter()
                .map(|&a| (dot(atoms.point(a), w), a))
                .fold((f64::INFINITY, 0), |acc, b| if b.0 < acc.0 { b } else { acc });
            let v = 0.5
                * members.iter().map(|&a| atoms.weights()[a] * dist_sq(atoms.point(a), atoms.point(star))).sum::<f64>();
            MfCapState { eta, v, contained: eta >= 1.0 - 2.0 * cert.caps.eps }
        })
        .collect()
}

/// Moves every atom along `v[mu_t]` with the projected RK4 scheme of the
/// particle integrator (Euler when requested). Cap observables are recorded
/// when a certificate is supplied.
pub fn integrate_meanfield(
    mu0: &Configuration,
    beta: f64,
    spec: &IntegratorSpec,
    cert: Option<&MeasureCertificate>,
) -> Result<MfTrajectory> {
    spec.validate()?;
    let k = (spec.t_max / spec.dt - 1e-9).ceil().max(0.0) as usize;
    let mut mu = mu0.clone();
    let mut records = vec![MfRecord { t: 0.0, caps: cap_states(&mu, cert), atoms: mu.clone() }];
    for s in 1..=k {
        let h = if s == k { spec.t_max - (k - 1) as f64 * spec.dt } else { spec.dt };
        mu = match spec.scheme {
            crate::dynamics::Scheme::EulerProject => shifted(&mu, h, &field(&mu, beta)),
            crate::dynamics::Scheme::Rk4Project => {
                let k1 = field(&mu, beta);
                let k2 = field(&shifted(&mu, 0.5 * h, &k1), beta);
                let k3 = field(&shifted(&mu, 0.5 * h, &k2), beta);
                let k4 = field(&shifted(&mu, h, &k3), beta);
                let v: Vec<f64> = (0..k1.len()).map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0).collect();
                shifted(&mu, h, &v)
            }
        };
        let t = if s == k { spec.t_max } else { s as f64 * spec.dt };
        if !mu.is_finite() {
            return Err(Error::NonFinite { step: s, t });
        }
        if s % spec.cadence == 0 || s == k {
            records.push(MfRecord { t, caps: cap_states(&mu, cert), atoms: mu.clone() });
        }
    }
    Ok(MfTrajectory { beta, records })
}

/// The pivot time `(eps/k) e^{beta (1 - alpha - 8 eps)}` bounding collapse from
/// above and escape from below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfBounds {
    pub log_pivot: f64,
}

impl MfBounds {
    pub fn pivot(&self) -> f64 {
        self.log_pivot.exp()
    }
}

pub fn mf_bounds(cert: &MeasureCertificate) -> MfBounds {
    let eps = cert.caps.eps;
    MfBounds { log_pivot: (eps / cert.k() as f64).ln() + cert.beta * (1.0 - cert.alpha - 8.0 * eps) }
}

/// First time at which `V_q <= e^{-lambda beta}` for every cap, and whether the
/// inequality persists at every later sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub t_first: Option<f64>,
    pub persists: bool,
    pub contained_until_horizon: bool,
}

pub fn variance_check(traj: &MfTrajectory, lambda: f64) -> VarianceCheck {
    let level = -lambda * traj.beta;
    let ok = |r: &MfRecord| r.caps.iter().all(|c| c.v <= 0.0 || c.v.ln() <= level);
    let first = traj.records.iter().position(ok);
    VarianceCheck {
        t_first: first.map(|k| traj.records[k].t),
        persists: first.is_some_and(|k| traj.records[k..].iter().all(ok)),
        contained_until_horizon: traj.records.iter().all(|r| r.caps.iter().all(|c| c.contained)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeClaim {
    pub c: f64,
    /// Per cap, the first time `eta V e^{-(1 - eta) beta} <= 2 e^{-c beta}`.
    pub t_star: Vec<Option<f64>>,
    pub log_bound: f64,
    pub pass: bool,
}

/// Checks that each `T*(q, c)` occurs before `(4 eps / k) e^{(c - 8 eps) beta}`.
pub fn escape_claim_check(traj: &MfTrajectory, cert: &MeasureCertificate, c: f64) -> Result<EscapeClaim> {
    let eps = cert.caps.eps;
    let beta = cert.beta;
    if c <= 8.0 * eps {
        return invalid(format!("c = {c} must exceed 8 eps = {}", 8.0 * eps));
    }
    let log_bound = (4.0 * eps / cert.k() as f64).ln() + (c - 8.0 * eps) * beta;
    let target = 2f64.ln() - c * beta;
    let t_star: Vec<Option<f64>> = (0..cert.k())
        .map(|q| {
            traj.records
                .iter()
                .find(|r| {
                    let s = r.caps[q];
                    s.v <= 0.0 || (s.eta.ln() + s.v.ln() - (1.0 - s.eta) * beta) <= target
                })
                .map(|r| r.t)
        })
        .collect();
    let pass = t_star.iter().all(|t| t.is_some_and(|t| t.ln() < log_bound || t == 0.0));
    Ok(EscapeClaim { c, t_star, log_bound, pass })
}
