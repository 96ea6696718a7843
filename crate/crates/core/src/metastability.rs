//! Separated configurations, the admissible `lambda` window, predicted
//! collapse and escape times, cap statistics and empirical detectors.

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{invalid, Error, Result};
use crate::geometry::{angle, cap_alpha, dist_sq, dot, CapFamily, Configuration, UnitVector};

/// Proof that a configuration is `(beta, eps)`-separated: particle `i` lies in
/// cap `assignment[i]`, and `gamma > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub caps: CapFamily,
    pub assignment: Vec<usize>,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub n: usize,
}

impl SeparationCertificate {
    pub fn eps(&self) -> f64 {
        self.caps.eps
    }

    pub fn k(&self) -> usize {
        self.caps.k()
    }

    pub fn window(&self) -> LambdaWindow {
        lambda_window(self.beta, self.caps.eps, self.alpha, self.n)
    }

    pub fn times(&self, lambda: f64) -> TheoreticalTimes {
        theoretical_times(self.n, self.beta, self.caps.eps, self.alpha, lambda)
    }
}

/// `gamma = 1 - alpha - 8 eps - (1/beta) log(2 n^2 / eps)`.
pub fn gamma(alpha: f64, eps: f64, beta: f64, n: usize) -> f64 {
    let n = n as f64;
    1.0 - alpha - 8.0 * eps - (2.0 * n * n / eps).ln() / beta
}

fn check_ranges(dim: usize, n: usize, eps: f64, beta: f64) -> Result<()> {
    if dim < 2 || n < 2 {
        return invalid(format!("need dim >= 2 and n >= 2 (got dim = {dim}, n = {n})"));
    }
    if !(eps > 0.0 && eps < 1.0 / 16.0) {
        return invalid(format!("eps = {eps} outside (0, 1/16)"));
    }
    if !(beta > 1.0 && beta.is_finite()) {
        return invalid(format!("beta = {beta} must exceed 1"));
    }
    Ok(())
}

/// Certifies `config` against the given cap centers.
pub fn certify(config: &Configuration, caps: &CapFamily, beta: f64) -> Result<SeparationCertificate> {
    check_ranges(config.dim(), config.n(), caps.eps, beta)?;
    let mut assignment = Vec::with_capacity(config.n());
    for (i, x) in config.points().enumerate() {
        match caps.locate(x, 1.0) {
            Some(q) => assignment.push(q),
            None => return Err(Error::NotSeparated(format!("point {i} lies in no cap <x, w> >= 1 - eps"))),
        }
    }
    let alpha = cap_alpha(&caps.centers, caps.eps).map_err(|e| Error::NotSeparated(e.to_string()))?;
    let g = gamma(alpha, caps.eps, beta, config.n());
    if g <= 0.0 {
        return Err(Error::NotSeparated(format!(
            "gamma = 1 - alpha - 8 eps - log(2 n^2 / eps) / beta = {g:.6} <= 0 (alpha = {alpha:.6})"
        )));
    }
    Ok(SeparationCertificate { caps: caps.clone(), assignment, alpha, gamma: g, beta, n: config.n() })
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut j = i;
    while parent[j] != r {
        let next = parent[j];
        parent[j] = r;
        j = next;
    }
    r
}

/// Groups points by single linkage with angular threshold `2 acos(1 - eps)`.
pub fn single_linkage(config: &Configuration, eps: f64) -> Vec<Vec<usize>> {
    let n = config.n();
    let thr = 2.0 * (1.0 - eps).acos();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if angle(config.point(i), config.point(j)) <= thr {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_index = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_index[r] == usize::MAX {
            root_index[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_index[r]].push(i);
    }
    groups
}

fn min_inner(config: &Configuration, members: &[usize], w: &[f64]) -> (f64, usize) {
    members.iter().map(|&i| (dot(config.point(i), w), i)).fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
}

/// Center of a cluster: the normalized mean, or, when that leaves a member
/// outside the `eps`-cap, an approximate minimax center.
fn cluster_center(config: &Configuration, members: &[usize], eps: f64) -> Result<UnitVector> {
    let d = config.dim();
    let mut mean = vec![0.0; d];
    for &i in members {
        for (m, x) in mean.iter_mut().zip(config.point(i)) {
            *m += x;
        }
    }
    let mut w = UnitVector::new(mean)?;
    let (mut best_val, _) = min_inner(config, members, w.as_slice());
    if best_val >= 1.0 - eps {
        return Ok(w);
    }
    let mut cur = w.as_slice().to_vec();
    for it in 0..4000 {
        let (_, far) = min_inner(config, members, &cur);
        let step = 1.0 / (it as f64 + 2.0);
        let p = config.point(far);
        let next: Vec<f64> = cur.iter().zip(p).map(|(c, x)| c + step * (x - c)).collect();
        cur = UnitVector::new(next)?.as_slice().to_vec();
        let (v, _) = min_inner(config, members, &cur);
        if v > best_val {
            best_val = v;
            w = UnitVector::new(cur.clone())?;
        }
    }
    Ok(w)
}

/// Discovers caps by single linkage and certifies the configuration.
pub fn validate_separated(config: &Configuration, eps: f64, beta: f64) -> Result<SeparationCertificate> {
    check_ranges(config.dim(), config.n(), eps, beta)?;
    let groups = single_linkage(config, eps);
    let centers = groups.iter().map(|g| cluster_center(config, g, eps)).collect::<Result<Vec<_>>>()?;
    let caps = CapFamily::new(centers, eps)?;
    let mut cert = certify(config, &caps, beta)?;
    // Points are assigned to the cluster they were discovered in.
    for (q, g) in groups.iter().enumerate() {
        for &i in g {
            if dot(config.point(i), caps.centers[q].as_slice()) < 1.0 - eps {
                return Err(Error::NotSeparated(format!("point {i} is outside the cap of its cluster {q}")));
            }
            cert.assignment[i] = q;
        }
    }
    Ok(cert)
}

/// Admissible interval for `lambda`. The lower end is `lambda* = log(1/(8 eps)) / beta`;
/// the upper end is the smaller of two branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaWindow {
    pub lo: f64,
    pub hi: f64,
    /// `log` of the first (exponentially large) branch.
    pub log_branch_growth: f64,
    pub branch_spacing: f64,
    pub empty: bool,
}

impl LambdaWindow {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, lambda: f64) -> bool {
        !self.empty && lambda > self.lo && lambda < self.hi
    }
}

pub fn lambda_window(beta: f64, eps: f64, alpha: f64, n: usize) -> LambdaWindow {
    let nf = n as f64;
    let lo = (1.0 / (8.0 * eps)).ln() / beta;
    let g = gamma(alpha, eps, beta, n);
    // exp((1 - alpha - log((beta - 1) eps / (beta^2 n^2 e)) / beta) beta) (1 - e^{-gamma beta})
    let log_growth = (1.0 - alpha) * beta - ((beta - 1.0) * eps / (beta * beta * nf * nf * std::f64::consts::E)).ln()
        + (-(-g * beta).exp()).ln_1p();
    let e_star = (-lo * beta).exp();
    let spacing = 1.0 - alpha - (2.0 * nf * nf / (1.0 - e_star)).ln() / beta - e_star;
    let hi = if log_growth.is_nan() { spacing } else { spacing.min(log_growth.exp()) };
    LambdaWindow { lo, hi, log_branch_growth: log_growth, branch_spacing: spacing, empty: !(hi > lo) }
}

/// Predicted collapse time (upper bound) and escape time (lower bound).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalTimes {
    pub t1_upper: f64,
    pub t2_lower: f64,
    pub log_t2_lower: f64,
}

pub fn theoretical_times(n: usize, beta: f64, eps: f64, alpha: f64, lambda: f64) -> TheoreticalTimes {
    let nf = n as f64;
    let t1 = 2.0 * nf * (8.0 * eps * beta).exp() + std::f64::consts::E * nf * lambda * beta * beta / (beta - 1.0);
    let log_t2 = (eps / nf).ln() + (1.0 - alpha) * beta;
    TheoreticalTimes { t1_upper: t1, t2_lower: log_t2.exp(), log_t2_lower: log_t2 }
}

/// Squared within-cap diameter allowed on the metastable interval, `2 e^{-lambda beta}`.
pub fn stick_level(lambda: f64, beta: f64) -> f64 {
    2.0 * (-lambda * beta).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapStats {
    pub members: usize,
    /// `min_i <x_i, w_q>` over members.
    pub eta: f64,
    /// `min_{i,j} <x_i, x_j>` over members.
    pub rho: f64,
    /// Attention-weighted spread around the member with smallest `eta`.
    pub var: f64,
    /// `max_{i,j} |x_i - x_j|^2` over members.
    pub diam_sq: f64,
}

/// Statistics of each cap of height `2 eps`; `None` for empty caps.
pub fn cap_statistics(config: &Configuration, caps: &CapFamily, beta: f64) -> Vec<Option<CapStats>> {
    let mut members = vec![Vec::new(); caps.k()];
    for (i, x) in config.points().enumerate() {
        if let Some(q) = caps.locate(x, 2.0) {
            members[q].push(i);
        }
    }
    let m = config.weights();
    members
        .iter()
        .enumerate()
        .map(|(q, mem)| {
            if mem.is_empty() {
                return None;
            }
            let (eta, i_star) = min_inner(config, mem, caps.centers[q].as_slice());
            let mut rho: f64 = 1.0;
            let mut diam_sq: f64 = 0.0;
            for (a, &i) in mem.iter().enumerate() {
                for &j in &mem[a + 1..] {
                    rho = rho.min(dot(config.point(i), config.point(j)));
                    diam_sq = diam_sq.max(dist_sq(config.point(i), config.point(j)));
                }
            }
            let xi = config.point(i_star);
            let logits: Vec<f64> = config.points().map(|x| beta * dot(xi, x)).collect();
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().zip(m).map(|(l, w)| w * (l - mx).exp()).sum();
            let var = mem.iter().map(|&j| m[j] * (logits[j] - mx).exp() / z * dist_sq(config.point(j), xi) / 2.0).sum();
            Some(CapStats { members: mem.len(), eta, rho, var, diam_sq })
        })
        .collect()
}

/// Largest squared within-cap diameter over all caps.
pub fn max_within_cap_sq(config: &Configuration, caps: &CapFamily, beta: f64) -> f64 {
    cap_statistics(config, caps, beta).iter().flatten().map(|s| s.diam_sq).fold(0.0, f64::max)
}

/// Index of the first record with a particle outside every cap of height `2 eps`.
pub fn escape_index(traj: &Trajectory, caps: &CapFamily) -> Option<usize> {
    traj.records.iter().position(|r| r.config.points().any(|x| caps.locate(x, 2.0).is_none()))
}

pub fn detect_escape(traj: &Trajectory, caps: &CapFamily) -> Option<f64> {
    escape_index(traj, caps).map(|k| traj.records[k].t)
}

/// First sampled time from which the within-cap diameters stay below the stick
/// level at every later sample, up to escape or the horizon.
pub fn collapse_index(traj: &Trajectory, caps: &CapFamily, lambda: f64) -> Option<usize> {
    let beta = traj.model.beta;
    let end = escape_index(traj, caps).unwrap_or(traj.records.len());
    let level = stick_level(lambda, beta);
    let mut first = None;
    for k in (0..end).rev() {
        if max_within_cap_sq(&traj.records[k].config, caps, beta) <= level {
            first = Some(k);
        } else {
            break;
        }
    }
    first
}

pub fn detect_collapse(traj: &Trajectory, caps: &CapFamily, lambda: f64) -> Option<f64> {
    collapse_index(traj, caps, lambda).map(|k| traj.records[k].t)
}

/// `eta_q(t) >= 1 - eps - n t e^{-(1 - alpha) beta}`.
pub fn eta_lower_bound(t: f64, n: usize, eps: f64, alpha: f64, beta: f64) -> f64 {
    1.0 - eps - n as f64 * t * (-(1.0 - alpha) * beta).exp()
}

/// Lower bound on `d rho / dt`: `(2/n) rho (1 - rho) e^{beta (rho - 1)} - 2 n e^{-(1 - alpha) beta}`.
pub fn rho_rate_lower_bound(rho: f64, n: usize, alpha: f64, beta: f64) -> f64 {
    let nf = n as f64;
    2.0 / nf * rho * (1.0 - rho) * (beta * (rho - 1.0)).exp() - 2.0 * nf * (-(1.0 - alpha) * beta).exp()
}

/// `(1/n) delta (1 - delta) e^{-delta beta} > n e^{-(1 - alpha) beta}`.
pub fn propagation_condition(n: usize, delta: f64, alpha: f64, beta: f64) -> bool {
    let nf = n as f64;
    delta * (1.0 - delta) * (-delta * beta).exp() / nf > nf * (-(1.0 - alpha) * beta).exp()
}

/// Empirical times compared with the predictions for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetastabilityReport {
    pub certificate: SeparationCertificate,
    pub window: LambdaWindow,
    pub lambda: f64,
    pub predicted: TheoreticalTimes,
    pub horizon: f64,
    pub t_collapse: Option<f64>,
    pub t_escape: Option<f64>,
    /// `None` when collapse was not seen and the horizon is shorter than the bound.
    pub collapse_within_bound: Option<bool>,
    /// `None` when no escape was seen.
    pub escape_after_bound: Option<bool>,
    /// Within-cap diameters stay below the stick level from collapse to escape.
    pub stick_holds: Option<bool>,
}

impl MetastabilityReport {
    pub fn pass(&self) -> bool {
        self.collapse_within_bound != Some(false)
            && self.escape_after_bound != Some(false)
            && self.stick_holds != Some(false)
    }
}

pub fn metastability_report(traj: &Trajectory, cert: &SeparationCertificate, lambda: f64) -> MetastabilityReport {
    let beta = traj.model.beta;
    let predicted = cert.times(lambda);
    let horizon = traj.records.last().map_or(0.0, |r| r.t);
    let esc = escape_index(traj, &cert.caps);
    let col = collapse_index(traj, &cert.caps, lambda);
    let t_collapse = col.map(|k| traj.records[k].t);
    let t_escape = esc.map(|k| traj.records[k].t);
    let collapse_within_bound = match t_collapse {
        Some(t) => Some(t <= predicted.t1_upper),
        None if horizon >= predicted.t1_upper && esc.is_none() => Some(false),
        None => None,
    };
    let stick_holds = col.map(|k| {
        let end = esc.unwrap_or(traj.records.len());
        let level = stick_level(lambda, beta);
        traj.records[k..end].iter().all(|r| max_within_cap_sq(&r.config, &cert.caps, beta) <= level)
    });
    MetastabilityReport {
        certificate: cert.clone(),
        window: cert.window(),
        lambda,
        predicted,
        horizon,
        t_collapse,
        t_escape,
        collapse_within_bound,
        escape_after_bound: t_escape.map(|t| t >= predicted.t2_lower),
        stick_holds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn window_lower_end() {
        let w = lambda_window(100.0, 0.01, 0.390, 5);
        assert!((w.lo - 12.5f64.ln() / 100.0).abs() < 1e-15);
        assert!((w.lo - 0.025_26).abs() < 1e-5);
        assert!(!w.empty);
    }

    #[test]
    fn predicted_times() {
        let t = theoretical_times(3, 20.0, 0.01, 0.1, 0.4);
        assert!((t.t1_upper - 98.4).abs() < 0.05, "{}", t.t1_upper);
        assert!((t.t2_lower / 2.19e5 - 1.0).abs() < 5e-3, "{}", t.t2_lower);
    }

    #[test]
    fn quarter_turn_caps_certify() {
        let centers = vec![UnitVector::from_angle(0.0), UnitVector::from_angle(PI / 2.0)];
        let caps = CapFamily::new(centers, 0.01).unwrap();
        let c = Configuration::from_angles(&[0.0, 0.05, -0.05, PI / 2.0, PI / 2.0 + 0.03], None).unwrap();
        let cert = certify(&c, &caps, 100.0).unwrap();
        assert!((cert.gamma - 0.445).abs() < 1e-3, "{}", cert.gamma);
        assert!(matches!(certify(&c, &caps, 5.0), Err(Error::NotSeparated(_))));
    }
}
