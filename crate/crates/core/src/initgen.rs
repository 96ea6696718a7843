//! Seeded initial configurations: separated caps, Gaussian mixtures, uniform
//! points, well-prepared ladders and separated atomic measures.
//!
//! All randomness comes from a ChaCha stream keyed by `(seed, stream)`, so a
//! run is reproducible regardless of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, AngularConfiguration, CapFamily, Configuration, UnitVector};
use crate::meanfield::{certify_measure, MeasureCertificate};
use crate::metastability::{certify, SeparationCertificate};

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn sample_uniform_sphere(d: usize, n: usize, seed: u64) -> Result<Configuration> {
    if d < 2 || n == 0 {
        return invalid("need d >= 2 and n >= 1");
    }
    let mut r = rng(seed, 0);
    let pts = (0..n).map(|_| gaussian(&mut r, d)).collect();
    Configuration::normalized(d, pts, None)
}

/// Draws from the mixture with means `sqrt(r) w_i` and isotropic standard
/// deviation `sigma`, choosing components uniformly, then projects onto the
/// sphere. Returns the configuration and the component of each point.
pub fn sample_gaussian_mixture(
    centers: &[UnitVector],
    r: f64,
    sigma: f64,
    n: usize,
    seed: u64,
) -> Result<(Configuration, Vec<usize>)> {
    if centers.is_empty() || n == 0 {
        return invalid("need at least one center and one sample");
    }
    if !(r > 0.0 && sigma >= 0.0) {
        return invalid("need r > 0 and sigma >= 0");
    }
    let d = centers[0].dim();
    let mut g = rng(seed, 1);
    let mut labels = Vec::with_capacity(n);
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        let q = g.random_range(0..centers.len());
        let z = gaussian(&mut g, d);
        pts.push(centers[q].as_slice().iter().zip(z).map(|(w, e)| r.sqrt() * w + sigma * e).collect());
        labels.push(q);
    }
    Ok((Configuration::normalized(d, pts, None)?, labels))
}

/// `max_i min_j |X_i/|X_i| - w_j|^2`, the separation statistic of a mixture sample.
pub fn mixture_statistic(config: &Configuration, centers: &[UnitVector]) -> f64 {
    config
        .points()
        .map(|x| centers.iter().map(|w| 2.0 - 2.0 * dot(x, w.as_slice())).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientCondition {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Probability lower bound promised when the condition holds.
    pub probability_lower: f64,
}

/// `6 delta sqrt(d) / (1 + delta sqrt(d)) + delta sqrt(2 d log n) <= eps` with `delta = sigma / sqrt(r)`.
pub fn mixture_condition(delta: f64, d: usize, n: usize, eps: f64) -> SufficientCondition {
    let sd = (d as f64).sqrt();
    let lhs = 6.0 * delta * sd / (1.0 + delta * sd) + delta * (2.0 * d as f64 * (n as f64).ln()).sqrt();
    SufficientCondition { lhs, rhs: eps, holds: lhs <= eps, probability_lower: 1.0 - 2.0 * (-(d as f64)).exp() }
}

/// Cap height used for uniform initializations, `4 log d / d`.
pub fn uniform_eps(d: usize) -> f64 {
    4.0 * (d as f64).ln() / d as f64
}

/// `16 log^2 d / d^2 + 40 log d / d + (1/beta) log(n^2 d / (2 log d)) < 1`, for `d >= 381`.
pub fn uniform_condition(d: usize, n: usize, beta: f64) -> SufficientCondition {
    let df = d as f64;
    let ld = df.ln();
    let nf = n as f64;
    let lhs = 16.0 * ld * ld / (df * df) + 40.0 * ld / df + (nf * nf * df / (2.0 * ld)).ln() / beta;
    SufficientCondition {
        lhs,
        rhs: 1.0,
        holds: d >= 381 && lhs < 1.0,
        probability_lower: 1.0 - 2.0 * nf * nf * df.powf(-1.0 / 64.0),
    }
}

/// Samples uniformly (surface measure) from the cap `<x, w> >= 1 - eps` by
/// inverting the CDF of the polar angle, whose density is `sin^{d-2}`.
pub struct CapSampler {
    center: UnitVector,
    psi_max: f64,
    cdf: Vec<f64>,
}

impl CapSampler {
    const GRID: usize = 4096;

    pub fn new(center: UnitVector, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 2.0) {
            return invalid(format!("cap height {eps} outside (0, 2]"));
        }
        let psi_max = (1.0 - eps).clamp(-1.0, 1.0).acos();
        let p = center.dim() as i32 - 2;
        let h = psi_max / Self::GRID as f64;
        let mut cdf = vec![0.0; Self::GRID + 1];
        for k in 1..=Self::GRID {
            let (a, b) = ((k - 1) as f64 * h, k as f64 * h);
            let mid = 0.5 * (a + b);
            let f = |x: f64| x.sin().powi(p);
            cdf[k] = cdf[k - 1] + h / 6.0 * (f(a) + 4.0 * f(mid) + f(b));
        }
        let total = cdf[Self::GRID];
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self { center, psi_max, cdf })
    }

    fn polar(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, Self::GRID);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        (((k - 1) as f64 + frac) / Self::GRID as f64 * self.psi_max).min(self.psi_max)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let w = self.center.as_slice();
        let psi = self.polar(rng.random::<f64>());
        let dir = loop {
            let z = gaussian(rng, w.len());
            let c = dot(&z, w);
            let t: Vec<f64> = z.iter().zip(w).map(|(a, b)| a - c * b).collect();
            if let Ok(u) = UnitVector::new(t) {
                break u;
            }
        };
        let v: Vec<f64> = w.iter().zip(dir.as_slice()).map(|(a, b)| psi.cos() * a + psi.sin() * b).collect();
        UnitVector::new(v).expect("unit combination").as_slice().to_vec()
    }
}

/// `k` centers equally spaced on the great circle through `e_1, e_2`.
pub fn equispaced_centers(dim: usize, k: usize, phase: f64) -> Vec<UnitVector> {
    (0..k)
        .map(|q| {
            let a = phase + 2.0 * PI * q as f64 / k as f64;
            let mut v = vec![0.0; dim];
            v[0] = a.cos();
            v[1] = a.sin();
            UnitVector::new(v).unwrap()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparatedSpec {
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub beta: f64,
    /// Explicit cap centers; equispaced on a great circle when absent.
    #[serde(default)]
    pub centers: Option<Vec<UnitVector>>,
}

/// Places `n` particles round-robin into `k` caps of height `eps`, sampling
/// uniformly inside each cap, and certifies the result against those caps.
pub fn gen_separated(spec: &SeparatedSpec, seed: u64) -> Result<(Configuration, SeparationCertificate)> {
    if spec.k == 0 || spec.n < spec.k {
        return invalid(format!("need 1 <= k <= n (k = {}, n = {})", spec.k, spec.n));
    }
    let centers = match &spec.centers {
        Some(c) if c.len() != spec.k => return invalid("number of centers differs from k"),
        Some(c) => c.clone(),
        None => equispaced_centers(spec.dim, spec.k, 0.0),
    };
    let caps = CapFamily::new(centers, spec.eps)?;
    feasibility(&caps, spec.n, spec.beta)?;
    let samplers = caps.centers.iter().map(|c| CapSampler::new(c.clone(), spec.eps)).collect::<Result<Vec<_>>>()?;
    let mut g = rng(seed, 2);
    let pts = (0..spec.n).map(|i| samplers[i % spec.k].sample(&mut g)).collect();
    let config = Configuration::normalized(spec.dim, pts, None)?;
    let cert = certify(&config, &caps, spec.beta)?;
    Ok((config, cert))
}

fn feasibility(caps: &CapFamily, n: usize, beta: f64) -> Result<()> {
    let alpha = caps.alpha().map_err(|e| Error::Infeasible(e.to_string()))?;
    let g = crate::metastability::gamma(alpha, caps.eps, beta, n);
    if g <= 0.0 {
        return Err(Error::Infeasible(format!(
            "gamma = 1 - alpha - 8 eps - log(2 n^2 / eps) / beta = {g:.6} <= 0 (alpha = {alpha:.6})"
        )));
    }
    Ok(())
}

/// Geometric ladder `theta_j = c0 2^j`, `j = 1..n`.
pub fn gen_well_prepared(n: usize, c0: f64) -> Result<AngularConfiguration> {
    if n < 2 || !(c0 > 0.0) {
        return invalid("need n >= 2 and c0 > 0");
    }
    let theta: Vec<f64> = (1..=n).map(|j| c0 * 2f64.powi(j as i32)).collect();
    if theta[n - 1] > PI {
        return invalid(format!("c0 2^n = {} exceeds pi", theta[n - 1]));
    }
    Ok(AngularConfiguration::uniform(theta))
}

/// Checks `0 <= t_1 < ... < t_n <= pi` and
/// `cos(t_i - t_1) > cos(t_k - t_i) + c log(beta) / beta` for `2 <= i <= n - 1 < k`
/// (1-based). The error names the first violated pair.
pub fn validate_well_prepared(theta: &[f64], beta: f64, c: f64) -> Result<()> {
    let n = theta.len();
    if n < 2 {
        return invalid("need at least two angles");
    }
    if theta[0] < 0.0 || theta[n - 1] > PI || theta.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("angles must satisfy 0 <= t_1 < ... < t_n <= pi");
    }
    let margin = c * beta.ln() / beta;
    for i in 1..n.saturating_sub(1) {
        for k in i + 1..n {
            let lhs = (theta[i] - theta[0]).cos();
            let rhs = (theta[k] - theta[i]).cos() + margin;
            if lhs <= rhs {
                return Err(Error::InvalidInput(format!(
                    "not well-prepared: cos(t_{} - t_1) = {lhs:.6} <= cos(t_{} - t_{}) + c log(beta)/beta = {rhs:.6}",
                    i + 1,
                    k + 1,
                    i + 1
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub dim: usize,
    pub k: usize,
    pub eps: f64,
    pub beta: f64,
    pub atoms_per_cap: usize,
    #[serde(default)]
    pub centers: Option<Vec<UnitVector>>,
}

/// Atomic measure with `atoms_per_cap` atoms sampled in each of `k` caps;
/// every cap carries mass `1/k`.
pub fn gen_separated_measure(spec: &MeasureSpec, seed: u64) -> Result<(Configuration, MeasureCertificate)> {
    if spec.k == 0 || spec.atoms_per_cap == 0 {
        return invalid("need k >= 1 and at least one atom per cap");
    }
    let centers = match &spec.centers {
        Some(c) if c.len() != spec.k => return invalid("number of centers differs from k"),
        Some(c) => c.clone(),
        None => equispaced_centers(spec.dim, spec.k, 0.0),
    };
    let caps = CapFamily::new(centers, spec.eps)?;
    let samplers = caps.centers.iter().map(|c| CapSampler::new(c.clone(), spec.eps)).collect::<Result<Vec<_>>>()?;
    let mut g = rng(seed, 3);
    let total = spec.k * spec.atoms_per_cap;
    let pts = (0..total).map(|a| samplers[a / spec.atoms_per_cap].sample(&mut g)).collect();
    let w = vec![1.0 / total as f64; total];
    let config = Configuration::normalized(spec.dim, pts, Some(w))?;
    let cert = certify_measure(&config, &caps, spec.beta).map_err(|e| match e {
        Error::NotSeparated(m) => Error::Infeasible(m),
        other => other,
    })?;
    Ok((config, cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_values() {
        let t = gen_well_prepared(5, 0.02).unwrap().theta;
        let expect = [0.04, 0.08, 0.16, 0.32, 0.64];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mixture_condition_values() {
        let a = mixture_condition(0.001, 16, 8, 0.05);
        assert!((a.lhs - 0.0321).abs() < 1e-4 && a.holds);
        let b = mixture_condition(0.01, 16, 8, 0.05);
        assert!((b.lhs - 0.3123).abs() < 1e-4 && !b.holds);
    }

    #[test]
    fn uniform_condition_values() {
        let a = uniform_condition(10_000, 3, 10.0);
        assert!((a.lhs - 0.886).abs() < 1e-3 && a.holds, "{}", a.lhs);
        assert!(!uniform_condition(400, 3, 1.0).holds);
    }

    #[test]
    fn same_seed_same_points() {
        let a = sample_uniform_sphere(5, 4, 9).unwrap();
        let b = sample_uniform_sphere(5, 4, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_uniform_sphere(5, 4, 10).unwrap());
    }
}
