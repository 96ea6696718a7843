//! End-to-end checks shared by the acceptance test suite and the CLI.
//!
//! Each `check_*` function runs one experiment and returns a report with the
//! raw measurements; [`Outcome`] condenses it into a pass/fail line.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dynamics::{
    angular_sa_velocity, integrate, integrate_angular, AngularFlow, AngularTrajectory, IntegratorSpec, Model,
    ModelKind, Scheme,
};
use crate::energy::{
    cap_members, grad_angular, hessian_angular, hessian_quadratic_form, pl_diagnostic, sa_metric_hessian,
    slow_motion_check, spread, PlParams, PlReport,
};
use crate::error::Result;
use crate::geometry::{AngularConfiguration, CapFamily, UnitVector};
use crate::initgen::{
    gen_separated, gen_separated_measure, mixture_condition, mixture_statistic, rng, sample_gaussian_mixture,
    sample_uniform_sphere, MeasureSpec, SeparatedSpec,
};
use crate::meanfield::{
    escape_claim_check, integrate_meanfield, mf_bounds, variance_check, EscapeClaim, VarianceCheck,
};
use crate::metastability::{certify, metastability_report, MetastabilityReport};
use crate::renorm::{run_staircase, StaircaseSpec};
use crate::scalar_oracles::{clustering_timescale, collapse_hitting_time, ClusteringTimes, Forcing};
use crate::tolerance;

/// One pass/fail line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

/// Off-diagonal part of the raw energy. Dropping the constant diagonal keeps
/// finite differences accurate when all pairs are far apart.
fn energy_off_diagonal(theta: &[f64], weights: &[f64], beta: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let mut s = 0.0;
    for i in 0..theta.len() {
        for j in i + 1..theta.len() {
            s += weights[i] * weights[j] * (beta * ((theta[i] - theta[j]).cos() - 1.0)).exp();
        }
    }
    s / (beta * total * total)
}

/// Central differences of the energy with one Richardson step (`h`, `h/2`).
pub fn fd_gradient(theta: &[f64], weights: &[f64], beta: f64, h: f64) -> Vec<f64> {
    let d = |i: usize, h: f64| {
        let mut p = theta.to_vec();
        let mut m = theta.to_vec();
        p[i] += h;
        m[i] -= h;
        (energy_off_diagonal(&p, weights, beta) - energy_off_diagonal(&m, weights, beta)) / (2.0 * h)
    };
    (0..theta.len()).map(|i| (4.0 * d(i, 0.5 * h) - d(i, h)) / 3.0).collect()
}

/// Central differences of the analytic gradient.
pub fn fd_hessian(theta: &[f64], weights: &[f64], beta: f64, h: f64) -> Vec<Vec<f64>> {
    let n = theta.len();
    let mut out = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut p = theta.to_vec();
        let mut m = theta.to_vec();
        p[j] += h;
        m[j] -= h;
        let (gp, gm) = (grad_angular(&p, weights, beta), grad_angular(&m, weights, beta));
        for i in 0..n {
            out[i][j] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    out
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub cases: usize,
    pub max_grad_rel_err: f64,
    pub max_identity_abs_err: f64,
    pub max_hessian_abs_err: f64,
}

/// Random angular configurations (`2 <= n <= 10`, `beta` in `[1, 20]`): analytic
/// gradient against finite differences, and the pairwise form of the Hessian
/// quadratic form against the direct one.
pub fn check_gradients(cases: usize, seed: u64) -> GradientReport {
    let mut g = rng(seed, 11);
    let (mut ge, mut ie, mut he) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cases {
        let n = g.random_range(2..=10);
        let beta = g.random_range(1.0..=20.0);
        let theta: Vec<f64> = (0..n).map(|_| g.random_range(0.0..2.0 * PI)).collect();
        let w = vec![1.0; n];
        let v: Vec<f64> = (0..n).map(|_| g.random_range(-1.0..1.0)).collect();
        ge = ge.max(rel_err(&grad_angular(&theta, &w, beta), &fd_gradient(&theta, &w, beta, 1e-6)));
        let (direct, pairwise) = hessian_quadratic_form(&theta, &w, beta, &v);
        ie = ie.max((direct - pairwise).abs());
        let h = hessian_angular(&theta, &w, beta);
        let hf = fd_hessian(&theta, &w, beta, 1e-5);
        for (r, rf) in h.iter().zip(&hf) {
            for (a, b) in r.iter().zip(rf) {
                he = he.max((a - b).abs());
            }
        }
    }
    GradientReport { cases, max_grad_rel_err: ge, max_identity_abs_err: ie, max_hessian_abs_err: he }
}

impl GradientReport {
    pub fn outcome(&self) -> Outcome {
        Outcome {
            id: 1,
            name: "gradient and Hessian identities".into(),
            pass: self.max_grad_rel_err < tolerance::ORACLE_REL && self.max_identity_abs_err < tolerance::IDENTITY_ABS,
            detail: format!(
                "{} configs, max grad rel err {:.2e} (< 1e-6), max quadratic-form gap {:.2e} (< 1e-10)",
                self.cases, self.max_grad_rel_err, self.max_identity_abs_err
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub cases: usize,
    /// Largest entrywise gap between the analytic Hessian and differences of the gradient.
    pub max_fd_err: f64,
    pub max_row_sum: f64,
    pub max_asymmetry: f64,
    /// Largest entrywise gap between the SA Jacobian and differences of the SA field.
    pub max_sa_jacobian_err: f64,
}

/// Weighted random configurations on the circle; same ranges as [`check_gradients`].
pub fn check_hessian(cases: usize, seed: u64) -> HessianReport {
    let mut g = rng(seed, 12);
    let mut r =
        HessianReport { cases, max_fd_err: 0.0, max_row_sum: 0.0, max_asymmetry: 0.0, max_sa_jacobian_err: 0.0 };
    let h = 1e-5;
    for _ in 0..cases {
        let n = g.random_range(2..=10);
        let beta = g.random_range(1.0..=20.0);
        let theta: Vec<f64> = (0..n).map(|_| g.random_range(0.0..2.0 * PI)).collect();
        let w: Vec<f64> = (0..n).map(|_| g.random_range(0.5..2.0)).collect();
        let hs = hessian_angular(&theta, &w, beta);
        let hf = fd_hessian(&theta, &w, beta, h);
        let j = sa_metric_hessian(&theta, &w, beta);
        for c in 0..n {
            let mut p = theta.clone();
            let mut m = theta.clone();
            p[c] += h;
            m[c] -= h;
            let (fp, fm) = (angular_sa_velocity(&p, &w, beta), angular_sa_velocity(&m, &w, beta));
            for i in 0..n {
                r.max_sa_jacobian_err = r.max_sa_jacobian_err.max((j[i][c] - (fp[i] - fm[i]) / (2.0 * h)).abs());
                r.max_fd_err = r.max_fd_err.max((hs[i][c] - hf[i][c]).abs());
                r.max_asymmetry = r.max_asymmetry.max((hs[i][c] - hs[c][i]).abs());
            }
            r.max_row_sum = r.max_row_sum.max(hs[c].iter().sum::<f64>().abs());
        }
    }
    r
}

impl HessianReport {
    pub fn pass(&self) -> bool {
        self.max_fd_err < tolerance::ORACLE_REL
            && self.max_sa_jacobian_err < tolerance::ORACLE_REL
            && self.max_row_sum < tolerance::IDENTITY_ABS
            && self.max_asymmetry < tolerance::IDENTITY_ABS
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityRun {
    pub seed: u64,
    pub model: ModelKind,
    pub dim: usize,
    pub n: usize,
    pub beta: f64,
    /// Most negative one-step change of the normalized energy.
    pub worst_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub dt: f64,
    pub slack: f64,
    pub runs: Vec<MonotonicityRun>,
}

/// Projected Euler runs of SA and USA from uniform initial points over the
/// grid `d in {2,3}`, `n in {4,8}`, `beta in {2,4,8}`.
pub fn check_energy_monotone(seeds: u64, dt: f64, t_max: f64) -> Result<MonotonicityReport> {
    let jobs: Vec<(u64, ModelKind)> = (0..seeds).flat_map(|s| [(s, ModelKind::Sa), (s, ModelKind::Usa)]).collect();
    let runs = jobs
        .par_iter()
        .map(|&(seed, kind)| {
            let dim = [2, 3][(seed % 2) as usize];
            let n = [4, 8][((seed / 2) % 2) as usize];
            let beta = [2.0, 4.0, 8.0][(seed % 3) as usize];
            let x0 = sample_uniform_sphere(dim, n, seed)?;
            let spec = IntegratorSpec::new(Scheme::EulerProject, dt, t_max);
            let tr = integrate(&Model { kind, beta }, &x0, &spec, &mut [])?;
            let worst = tr
                .records
                .windows(2)
                .map(|w| w[1].energy_normalized - w[0].energy_normalized)
                .fold(f64::INFINITY, f64::min);
            Ok(MonotonicityRun { seed, model: kind, dim, n, beta, worst_step: worst })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonotonicityReport { dt, slack: tolerance::ENERGY_SLACK_DT2 * dt * dt, runs })
}

impl MonotonicityReport {
    pub fn worst(&self) -> f64 {
        self.runs.iter().map(|r| r.worst_step).fold(f64::INFINITY, f64::min)
    }

    pub fn outcome(&self) -> Outcome {
        Outcome {
            id: 2,
            name: "energy monotone along SA and USA".into(),
            pass: self.worst() >= -self.slack,
            detail: format!(
                "{} runs, worst step change {:.2e} (>= -{:.1e})",
                self.runs.len(),
                self.worst(),
                self.slack
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetastableRun {
    pub seed: u64,
    pub model: ModelKind,
    pub beta: f64,
    pub eps: f64,
    pub n: usize,
    pub report: MetastabilityReport,
}

/// Draws two-cap separated configurations on the circle until `count` are
/// certified, then runs SA and USA from each with `lambda` at the window midpoint.
pub fn check_metastability(count: usize, seed: u64) -> Result<Vec<MetastableRun>> {
    let mut accepted = Vec::new();
    let mut s = seed;
    while accepted.len() < count {
        let mut g = rng(s, 7);
        let beta = g.random_range(8.0..=15.0);
        let n = [4, 6][g.random_range(0..2)];
        let eps = g.random_range(0.01..0.025);
        let phase = g.random_range(0.0..2.0 * PI);
        let sep = g.random_range(2.0..PI);
        let centers = vec![UnitVector::from_angle(phase), UnitVector::from_angle(phase + sep)];
        let spec = SeparatedSpec { dim: 2, n, k: 2, eps, beta, centers: Some(centers) };
        if let Ok((x0, cert)) = gen_separated(&spec, s) {
            if !cert.window().empty {
                accepted.push((s, x0, cert));
            }
        }
        s += 1;
    }
    let jobs: Vec<_> = accepted.iter().flat_map(|a| [(a, ModelKind::Sa), (a, ModelKind::Usa)]).collect();
    jobs.par_iter()
        .map(|&((s, x0, cert), kind)| {
            let lambda = cert.window().mid();
            let t1 = cert.times(lambda).t1_upper;
            let dt = 0.01 / cert.beta;
            let horizon = 1.05 * t1;
            let cadence = ((horizon / dt) as usize / 4000).max(1);
            let spec = IntegratorSpec::new(Scheme::Rk4Project, dt, horizon).with_cadence(cadence);
            let tr = integrate(&Model { kind, beta: cert.beta }, x0, &spec, &mut [])?;
            Ok(MetastableRun {
                seed: *s,
                model: kind,
                beta: cert.beta,
                eps: cert.eps(),
                n: cert.n,
                report: metastability_report(&tr, cert, lambda),
            })
        })
        .collect()
}

pub fn metastability_outcomes(runs: &[MetastableRun]) -> [Outcome; 2] {
    let times_ok = runs
        .iter()
        .filter(|r| r.report.collapse_within_bound == Some(true) && r.report.escape_after_bound != Some(false));
    let stick_ok = runs.iter().filter(|r| r.report.stick_holds == Some(true));
    let escapes = runs.iter().filter(|r| r.report.t_escape.is_some()).count();
    let (a, b) = (times_ok.count(), stick_ok.count());
    [
        Outcome {
            id: 3,
            name: "collapse and escape times vs bounds".into(),
            pass: a == runs.len(),
            detail: format!("{a}/{} runs within bounds ({escapes} escapes observed)", runs.len()),
        },
        Outcome {
            id: 4,
            name: "stick level on the metastable interval".into(),
            pass: b == runs.len(),
            detail: format!("{b}/{} runs keep within-cap diameter^2 <= 2 e^(-lambda beta)", runs.len()),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaCase {
    pub beta: f64,
    pub c: f64,
    pub u0: f64,
    pub t: Option<f64>,
    pub bound: f64,
    pub margin: Option<f64>,
}

/// Collapse-time lemma over `beta x c x u0`.
pub fn check_collapse_lemma() -> Result<Vec<LemmaCase>> {
    let mut out = Vec::new();
    for beta in [2.0, 5.0, 10.0, 20.0, 50.0] {
        for c in [0.25, 0.5, 1.0, 2.0] {
            for u0 in [0.5, 0.9, 0.99] {
                let h = collapse_hitting_time(u0, beta, c, tolerance::ADAPTIVE_RTOL)?;
                out.push(LemmaCase { beta, c, u0, t: h.t, bound: h.bound, margin: h.margin });
            }
        }
    }
    Ok(out)
}

pub fn collapse_lemma_outcome(cases: &[LemmaCase]) -> Outcome {
    let min_margin = cases.iter().map(|c| c.margin.unwrap_or(f64::NEG_INFINITY)).fold(f64::INFINITY, f64::min);
    Outcome {
        id: 5,
        name: "collapse-time lemma margin".into(),
        pass: min_margin >= 0.0,
        detail: format!("{} grid points, min margin {:.3e} (>= 0)", cases.len(), min_margin),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimescaleRow {
    pub beta: f64,
    pub times: ClusteringTimes,
    /// `|t(beta) - asymptotic t(beta)|`.
    pub error: f64,
}

/// Clustering timescale with `c = 1`, `u0 = 1` over `beta in {1e2, 1e3, 1e4}`.
pub fn check_clustering_timescale() -> Result<Vec<TimescaleRow>> {
    [1e2, 1e3, 1e4]
        .iter()
        .map(|&beta| {
            let times = clustering_timescale(1.0, beta, 1.0, Forcing::None)?;
            let error = times.t_beta.map_or(f64::INFINITY, |t| (t - times.asymptotic_t).abs());
            Ok(TimescaleRow { beta, times, error })
        })
        .collect()
}

pub fn timescale_outcome(rows: &[TimescaleRow]) -> Outcome {
    let decreasing = rows.windows(2).all(|w| w[1].error < w[0].error);
    let last = rows.last().map_or(f64::INFINITY, |r| r.error);
    let errs: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.error)).collect();
    Outcome {
        id: 6,
        name: "clustering timescale asymptotics".into(),
        pass: decreasing && last < 0.05,
        detail: format!("|t - asymptotic| = [{}] (need decreasing and last < 0.05)", errs.join(", ")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseCheck {
    pub beta: f64,
    pub merges: usize,
    pub levels: Vec<f64>,
    pub max_error: f64,
    pub tolerance: f64,
}

/// Ladder `c0 = 0.02`, `n = 5`, at `beta in {50, 100, 200}`.
pub fn check_staircase() -> Result<Vec<StaircaseCheck>> {
    let runs = run_staircase(5, 0.02, &[50.0, 100.0, 200.0], &StaircaseSpec::new(1.0))?;
    Ok(runs
        .into_iter()
        .map(|r| StaircaseCheck {
            beta: r.beta,
            merges: r.profile.events.len(),
            levels: r.plateaus.levels,
            max_error: r.max_error,
            tolerance: 5.0 / r.beta.ln(),
        })
        .collect())
}

pub fn staircase_outcome(rows: &[StaircaseCheck]) -> Outcome {
    let merges_ok = rows.iter().all(|r| r.merges == 4);
    let levels_ok = rows.iter().all(|r| r.max_error <= r.tolerance);
    let decreasing = rows.windows(2).all(|w| w[1].max_error < w[0].max_error);
    let errs: Vec<String> = rows.iter().map(|r| format!("{:.4}", r.max_error)).collect();
    Outcome {
        id: 7,
        name: "energy staircase".into(),
        pass: merges_ok && levels_ok && decreasing,
        detail: format!(
            "merges {:?}, max level error [{}] (each <= 5/log beta, decreasing)",
            rows.iter().map(|r| r.merges).collect::<Vec<_>>(),
            errs.join(", ")
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureReport {
    pub draws: usize,
    pub separated: usize,
    /// Draws whose statistic `max_i min_j |x_i - w_j|^2` is at most `eps`.
    pub statistic_below_eps: usize,
    pub condition_lhs: f64,
    pub required: f64,
}

/// Regular tetrahedron in the first three coordinates of `R^d`.
pub fn tetrahedron(d: usize) -> Vec<UnitVector> {
    let s = 1.0 / 3f64.sqrt();
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
        .iter()
        .map(|v| {
            let mut x = vec![0.0; d];
            x[..3].copy_from_slice(&[v[0] * s, v[1] * s, v[2] * s]);
            UnitVector::new(x).unwrap()
        })
        .collect()
}

/// Projected Gaussian mixture, `d = 16`, `n = 8`, four centers scaled by
/// `sqrt(r)` with `r = 4`, `sigma = 0.002`, `eps = 0.05`, `beta = 1000`.
pub fn check_mixture(draws: usize) -> Result<MixtureReport> {
    let (d, n, r, sigma, eps, beta) = (16, 8, 4.0, 0.002, 0.05, 1000.0);
    let centers = tetrahedron(d);
    let caps = CapFamily::new(centers.clone(), eps)?;
    let cond = mixture_condition(sigma / f64::sqrt(r), d, n, eps);
    let hits: Vec<(bool, bool)> = (0..draws as u64)
        .into_par_iter()
        .map(|seed| {
            let (x, _) = sample_gaussian_mixture(&centers, r, sigma, n, seed)?;
            Ok((certify(&x, &caps, beta).is_ok(), mixture_statistic(&x, &centers) <= eps))
        })
        .collect::<Result<Vec<_>>>()?;
    let separated = hits.iter().filter(|h| h.0).count();
    let statistic_below_eps = hits.iter().filter(|h| h.1).count();
    let p = cond.probability_lower;
    let mc = (p * (1.0 - p) / draws as f64).sqrt();
    Ok(MixtureReport { draws, separated, statistic_below_eps, condition_lhs: cond.lhs, required: p - 3.0 * mc })
}

impl MixtureReport {
    pub fn frequency(&self) -> f64 {
        self.separated as f64 / self.draws as f64
    }

    pub fn outcome(&self) -> Outcome {
        Outcome {
            id: 8,
            name: "Gaussian mixture separation frequency".into(),
            pass: self.frequency() >= self.required,
            detail: format!(
                "{}/{} separated (freq {:.4} >= {:.6}), condition lhs {:.4}",
                self.separated,
                self.draws,
                self.frequency(),
                self.required,
                self.condition_lhs
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldReport {
    /// Sup-norm gap between atom transport and the particle system.
    pub consistency_gap: f64,
    pub lambda: f64,
    pub log_pivot: f64,
    pub variance: VarianceCheck,
    pub claim: EscapeClaim,
}

/// Atoms-as-particles agreement (`n = 6`, `beta = 4`, `t <= 10`) and a
/// two-cap measure run (`beta = 60`, 200 atoms).
pub fn check_meanfield(horizon: f64) -> Result<MeanFieldReport> {
    let mut x0 = sample_uniform_sphere(3, 6, 5)?;
    x0 = crate::geometry::Configuration::new(3, x0.points().map(|p| p.to_vec()).collect(), Some(vec![1.0 / 6.0; 6]))?;
    let spec = IntegratorSpec::new(Scheme::Rk4Project, 0.01, 10.0);
    let particles = integrate(&Model::sa(4.0), &x0, &spec, &mut [])?;
    let atoms = integrate_meanfield(&x0, 4.0, &spec, None)?;
    let gap = particles
        .records
        .iter()
        .zip(&atoms.records)
        .flat_map(|(a, b)| a.config.coords().iter().zip(b.atoms.coords()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);

    let mspec = MeasureSpec { dim: 2, k: 2, eps: 0.01, beta: 60.0, atoms_per_cap: 100, centers: None };
    let (mu0, cert) = gen_separated_measure(&mspec, 17)?;
    let lambda = cert.gamma / 2.0;
    let run = integrate_meanfield(
        &mu0,
        cert.beta,
        &IntegratorSpec::new(Scheme::Rk4Project, 0.02, horizon).with_cadence(10),
        Some(&cert),
    )?;
    Ok(MeanFieldReport {
        consistency_gap: gap,
        lambda,
        log_pivot: mf_bounds(&cert).log_pivot,
        variance: variance_check(&run, lambda),
        claim: escape_claim_check(&run, &cert, lambda)?,
    })
}

impl MeanFieldReport {
    pub fn outcome(&self) -> Outcome {
        let pass = self.consistency_gap <= tolerance::MEANFIELD_CONSISTENCY
            && self.variance.contained_until_horizon
            && self.variance.t_first.is_some()
            && self.variance.persists;
        Outcome {
            id: 9,
            name: "mean-field consistency and cap checks".into(),
            pass,
            detail: format!(
                "atom/particle gap {:.2e} (<= 1e-8), contained {}, V_q <= e^(-lambda beta) from t = {:?} persists {}",
                self.consistency_gap,
                self.variance.contained_until_horizon,
                self.variance.t_first,
                self.variance.persists
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlRun {
    pub seed: u64,
    pub samples_checked: usize,
    pub samples_passed: usize,
    pub h_below_bound: usize,
    pub tau_small_samples: usize,
    pub slow_pairs: usize,
    pub slow_pairs_passed: usize,
    pub report: PlReport,
}

/// Two-cap trajectories on the circle at `beta = 20` along the gradient flow.
pub fn check_pl(count: usize, seed: u64) -> Result<Vec<PlRun>> {
    let (beta, n, eps) = (20.0, 6, 2e-5);
    let mut accepted = Vec::new();
    let mut s = seed;
    while accepted.len() < count {
        let mut g = rng(s, 13);
        let phase = g.random_range(0.0..2.0 * PI);
        let sep = g.random_range(PI / 2.0..PI);
        let centers = vec![UnitVector::from_angle(phase), UnitVector::from_angle(phase + sep)];
        let spec = SeparatedSpec { dim: 2, n, k: 2, eps, beta, centers: Some(centers) };
        if let Ok((x0, cert)) = gen_separated(&spec, s) {
            if !cert.window().empty {
                accepted.push((s, x0, cert));
            }
        }
        s += 1;
    }
    accepted
        .par_iter()
        .map(|(s, x0, cert)| {
            let lambda = cert.window().mid();
            let init = AngularConfiguration::uniform(x0.angles()?);
            let spec = IntegratorSpec::new(Scheme::Rk4Project, 0.05, 200.0).with_cadence(4);
            let traj = integrate_angular(&init, beta, AngularFlow::UsaGradient, &spec)?;
            let params = PlParams { beta, lambda, alpha: cert.alpha, delta: None };
            let rep = pl_diagnostic(&traj, &cert.caps, &params)?;
            let (pairs, ok) = slow_motion_pairs(&traj, &cert.caps, params.neighbourhood_radius());
            Ok(PlRun {
                seed: *s,
                samples_checked: rep.checks_total,
                samples_passed: rep.checks_passed,
                h_below_bound: rep.samples.iter().filter(|x| !x.in_slow_region && x.h_below_bound).count(),
                tau_small_samples: rep.samples.iter().filter(|x| !x.in_slow_region && x.tau_small).count(),
                slow_pairs: pairs,
                slow_pairs_passed: ok,
                report: rep,
            })
        })
        .collect()
}

/// Checks the displacement bound on sampled pairs `s < t` after the caps have
/// settled below `delta` for good.
fn slow_motion_pairs(traj: &AngularTrajectory, caps: &CapFamily, delta: f64) -> (usize, usize) {
    let settled = |th: &[f64]| cap_members(th, caps).iter().all(|m| spread(th, m) <= delta);
    let mut start = traj.records.len();
    for k in (0..traj.records.len()).rev() {
        if settled(&traj.records[k].theta) {
            start = k;
        } else {
            break;
        }
    }
    let idx: Vec<usize> = (start..traj.records.len()).step_by(10).collect();
    let (mut total, mut ok) = (0, 0);
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            total += 1;
            if slow_motion_check(traj, caps, delta, i, j).pass {
                ok += 1;
            }
        }
    }
    (total, ok)
}

pub fn pl_outcome(runs: &[PlRun]) -> Outcome {
    let checked: usize = runs.iter().map(|r| r.samples_checked).sum();
    let passed: usize = runs.iter().map(|r| r.samples_passed).sum();
    let pairs: usize = runs.iter().map(|r| r.slow_pairs).sum();
    let pairs_ok: usize = runs.iter().map(|r| r.slow_pairs_passed).sum();
    Outcome {
        id: 10,
        name: "PL sign, gradient domination and slow motion".into(),
        pass: checked > 0 && passed == checked && pairs > 0 && pairs_ok == pairs,
        detail: format!(
            "{} runs: H < 0 and claim at {passed}/{checked} samples, displacement bound at {pairs_ok}/{pairs} pairs",
            runs.len()
        ),
    }
}

/// Runs every check with the acceptance settings.
pub fn run_all() -> Result<Vec<Outcome>> {
    let mut out = vec![check_gradients(50, 1).outcome(), check_energy_monotone(20, 0.01, 50.0)?.outcome()];
    out.extend(metastability_outcomes(&check_metastability(20, 0)?));
    out.push(collapse_lemma_outcome(&check_collapse_lemma()?));
    out.push(timescale_outcome(&check_clustering_timescale()?));
    out.push(staircase_outcome(&check_staircase()?));
    out.push(check_mixture(2000)?.outcome());
    out.push(check_meanfield(60.0)?.outcome());
    out.push(pl_outcome(&check_pl(10, 0)?));
    Ok(out)
}
