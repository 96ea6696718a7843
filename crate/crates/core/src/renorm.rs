//! Rescaled (renormalized) dynamics on the circle with particle merging, and
//! extraction of the resulting energy staircase.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::energy_angular;
use crate::error::{invalid, Result};
use crate::geometry::{circle_dist, circular_mean, AngularConfiguration};
use crate::initgen::{gen_well_prepared, validate_well_prepared};
use crate::ode::Dopri5;
use crate::tolerance;

/// Pairs closer than `1 / sqrt(beta log beta)` are merged.
pub fn merge_threshold(beta: f64) -> f64 {
    1.0 / (beta * beta.ln()).sqrt()
}

fn min_gap(theta: &[f64]) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for i in 0..theta.len() {
        for j in i + 1..theta.len() {
            let d = circle_dist(theta[i], theta[j]);
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    best
}

/// Smallest pairwise distance strictly above `threshold`.
pub fn min_admissible_gap(theta: &[f64], threshold: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for i in 0..theta.len() {
        for j in i + 1..theta.len() {
            let d = circle_dist(theta[i], theta[j]);
            if d > threshold && best.is_none_or(|b| d < b) {
                best = Some(d);
            }
        }
    }
    best
}

/// Rate of the clock change, `log(beta) e^{beta (1 - cos D*)}`, kept in log form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauRate {
    /// `None` once no admissible pair remains (a single cluster).
    pub log_rate: Option<f64>,
    pub gap: Option<f64>,
}

impl TauRate {
    pub fn rate(&self) -> Option<f64> {
        self.log_rate.map(f64::exp)
    }

    pub fn is_terminal(&self) -> bool {
        self.log_rate.is_none()
    }
}

pub fn tau_rate(theta: &[f64], beta: f64) -> TauRate {
    let gap = min_admissible_gap(theta, merge_threshold(beta));
    TauRate { log_rate: gap.map(|g| beta.ln().ln() + beta * (1.0 - g.cos())), gap }
}

/// Rescaled field
/// `(log beta / N^2) sum_j w_j e^{beta (cos(t_j - t_i) - cos D*)} sin(t_j - t_i)`.
/// `D*` is floored at the merge threshold so that trial stages overshooting a
/// merge stay bounded.
pub fn rescaled_velocity(theta: &[f64], weights: &[f64], beta: f64) -> Vec<f64> {
    let thr = merge_threshold(beta);
    let (g, _, _) = min_gap(theta);
    let cd = g.max(thr).cos();
    let total: f64 = weights.iter().sum();
    let s = beta.ln() / (total * total);
    theta
        .iter()
        .map(|&ti| {
            s * theta
                .iter()
                .zip(weights)
                .map(|(&tj, &wj)| {
                    let x = tj - ti;
                    wj * (beta * (x.cos() - cd)).exp() * x.sin()
                })
                .sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaircaseSpec {
    pub beta: f64,
    /// Horizon in rescaled time.
    pub s_max: f64,
    /// Sampling interval in rescaled time.
    pub ds: f64,
    /// Extra rescaled time sampled after a single cluster remains.
    pub tail: f64,
}

impl StaircaseSpec {
    pub fn new(beta: f64) -> Self {
        Self { beta, s_max: 1e4, ds: 0.01, tail: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub s: f64,
    /// Original particle labels on each side of the merge.
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub weight: f64,
    pub position: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// More than one merge happened at the same instant.
    pub multi: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaircaseSample {
    pub s: f64,
    pub energy_normalized: f64,
    pub n_active: usize,
    /// `NaN` once a single cluster remains.
    pub min_admissible_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseProfile {
    pub beta: f64,
    pub n: usize,
    pub samples: Vec<StaircaseSample>,
    pub events: Vec<MergeEvent>,
    /// A single cluster was reached before the horizon.
    pub terminal: bool,
}

struct State {
    theta: Vec<f64>,
    weights: Vec<f64>,
    labels: Vec<Vec<usize>>,
}

impl State {
    fn sample(&self, s: f64, beta: f64) -> StaircaseSample {
        StaircaseSample {
            s,
            energy_normalized: energy_angular(&self.theta, &self.weights, beta).normalized,
            n_active: self.theta.len(),
            min_admissible_gap: min_admissible_gap(&self.theta, merge_threshold(beta)).unwrap_or(f64::NAN),
        }
    }

    /// Merges pairs within the threshold, closest first.
    fn merge_all(&mut self, s: f64, beta: f64, events: &mut Vec<MergeEvent>) {
        let thr = merge_threshold(beta);
        let start = events.len();
        loop {
            let (d, i, j) = min_gap(&self.theta);
            if self.theta.len() < 2 || d > thr {
                break;
            }
            let before = energy_angular(&self.theta, &self.weights, beta).normalized;
            let w = self.weights[i] + self.weights[j];
            let pos =
                circular_mean(&[self.theta[i], self.theta[j]], &[self.weights[i], self.weights[j]], self.theta[i]);
            let right = self.labels.remove(j);
            let left = self.labels[i].clone();
            self.labels[i].extend(right.iter().copied());
            self.labels[i].sort_unstable();
            self.theta.remove(j);
            self.weights.remove(j);
            self.theta[i] = pos;
            self.weights[i] = w;
            let after = energy_angular(&self.theta, &self.weights, beta).normalized;
            events.push(MergeEvent {
                s,
                left,
                right,
                weight: w,
                position: pos,
                energy_before: before,
                energy_after: after,
                multi: false,
            });
        }
        if events.len() - start > 1 {
            events[start..].iter_mut().for_each(|e| e.multi = true);
        }
    }
}

/// Integrates the rescaled dynamics, merging pairs that come within the
/// threshold (located by bisection), until one cluster remains or `s_max`.
pub fn integrate_modified(theta0: &AngularConfiguration, spec: &StaircaseSpec) -> Result<StaircaseProfile> {
    let beta = spec.beta;
    if !(beta > std::f64::consts::E) {
        return invalid(format!("beta = {beta} must exceed e"));
    }
    if !(spec.ds > 0.0 && spec.s_max > 0.0 && spec.tail >= 0.0) {
        return invalid("need ds > 0, s_max > 0 and tail >= 0");
    }
    let n = theta0.n();
    if n < 1 {
        return invalid("empty configuration");
    }
    let thr = merge_threshold(beta);
    let mut st = State {
        theta: theta0.theta.clone(),
        weights: theta0.weights.clone(),
        labels: (0..n).map(|i| vec![i]).collect(),
    };
    let mut events = Vec::new();
    let mut samples = vec![st.sample(0.0, beta)];
    st.merge_all(0.0, beta, &mut events);
    if !events.is_empty() {
        samples.push(st.sample(0.0, beta));
    }
    let solver = Dopri5 { rtol: 1e-9, atol: 1e-12, h_max: spec.ds, ..Dopri5::default() };
    let mut s = 0.0;
    let mut h: f64 = 1e-3;
    let mut next = spec.ds;
    let mut steps = 0usize;
    while st.theta.len() > 1 && s < spec.s_max {
        steps += 1;
        if steps > solver.max_steps {
            return Err(crate::error::Error::Numeric(format!("step budget exhausted at s = {s}")));
        }
        let w = st.weights.clone();
        let f = |_: f64, y: &[f64]| rescaled_velocity(y, &w, beta);
        let h_try = h.min(next - s).min(spec.s_max - s);
        let trial = solver.step(&f, s, &st.theta, h_try);
        if !(trial.err <= 1.0) {
            h = if trial.err.is_finite() { solver.next_h(h_try, trial.err) } else { 0.2 * h_try };
            continue;
        }
        if min_gap(&trial.y).0 <= thr {
            let (mut lo, mut hi) = (0.0, h_try);
            let mut y_hi = trial.y;
            while hi - lo > tolerance::EVENT_RESOLUTION {
                let mid = 0.5 * (lo + hi);
                let ym = solver.step(&f, s, &st.theta, mid).y;
                if min_gap(&ym).0 <= thr {
                    hi = mid;
                    y_hi = ym;
                } else {
                    lo = mid;
                }
            }
            s += hi;
            st.theta = y_hi;
            samples.push(st.sample(s, beta));
            st.merge_all(s, beta, &mut events);
            samples.push(st.sample(s, beta));
            h = h_try.max(1e-6);
            continue;
        }
        s += h_try;
        st.theta = trial.y;
        h = solver.next_h(h_try, trial.err);
        if (s - next).abs() <= 1e-12 * next.max(1.0) {
            s = next;
            samples.push(st.sample(s, beta));
            next += spec.ds;
        }
    }
    let terminal = st.theta.len() == 1;
    if terminal {
        let end = s + spec.tail;
        let mut t = s + spec.ds;
        while t <= end + 1e-12 {
            samples.push(st.sample(t, beta));
            t += spec.ds;
        }
    }
    Ok(StaircaseProfile { beta, n, samples, events, terminal })
}

/// Limiting level after `i` sequential absorptions, `1/n + (2/n^2) sum_{k <= i} k`.
pub fn phi_infinity(n: usize, i: usize) -> f64 {
    let (n, i) = (n as f64, i as f64);
    1.0 / n + i * (i + 1.0) / (n * n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateaus {
    pub jump_times: Vec<f64>,
    /// One level per segment; segment `i` follows the `i`-th merge.
    pub levels: Vec<f64>,
    /// Fewer than three samples survived the boundary trimming.
    pub low_confidence: Vec<bool>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Splits the profile at merge events and takes the median energy of each
/// segment, ignoring the fraction `boundary` of the segment at each end.
pub fn extract_staircase(profile: &StaircaseProfile, boundary: f64) -> Plateaus {
    let n = profile.n;
    let jump_times: Vec<f64> = profile.events.iter().map(|e| e.s).collect();
    let n_seg = jump_times.len() + 1;
    let s_end = profile.samples.last().map_or(0.0, |x| x.s);
    let mut levels = Vec::with_capacity(n_seg);
    let mut low = Vec::with_capacity(n_seg);
    for seg in 0..n_seg {
        let a = if seg == 0 { 0.0 } else { jump_times[seg - 1] };
        let b = if seg < jump_times.len() { jump_times[seg] } else { s_end };
        let cut = boundary * (b - a);
        let mine: Vec<&StaircaseSample> = profile.samples.iter().filter(|x| n - x.n_active == seg).collect();
        let mut inner: Vec<f64> =
            mine.iter().filter(|x| x.s >= a + cut && x.s <= b - cut).map(|x| x.energy_normalized).collect();
        low.push(inner.len() < 3);
        if inner.is_empty() {
            inner = mine.iter().map(|x| x.energy_normalized).collect();
        }
        levels.push(median(&mut inner));
    }
    Plateaus { jump_times, levels, low_confidence: low }
}

/// One ladder run of the staircase experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseRun {
    pub beta: f64,
    pub profile: StaircaseProfile,
    pub plateaus: Plateaus,
    /// `|level_i - phi_inf(n, i)|` per segment.
    pub errors: Vec<f64>,
    pub max_error: f64,
    /// Outcome of the well-prepared check at `c = 1.5`; the run proceeds either way.
    pub well_prepared: std::result::Result<(), String>,
}

/// Default trimming of segment ends when reading off plateau levels.
pub const PLATEAU_BOUNDARY: f64 = 0.2;

/// Runs the geometric ladder `c0 2^j` at each `beta` (in parallel).
pub fn run_staircase(n: usize, c0: f64, betas: &[f64], template: &StaircaseSpec) -> Result<Vec<StaircaseRun>> {
    let init = gen_well_prepared(n, c0)?;
    betas
        .par_iter()
        .map(|&beta| {
            let spec = StaircaseSpec { beta, ..*template };
            let profile = integrate_modified(&init, &spec)?;
            let plateaus = extract_staircase(&profile, PLATEAU_BOUNDARY);
            let errors: Vec<f64> =
                plateaus.levels.iter().enumerate().map(|(i, l)| (l - phi_infinity(n, i)).abs()).collect();
            let max_error = errors.iter().cloned().fold(0.0, f64::max);
            let well_prepared = validate_well_prepared(&init.theta, beta, 1.5).map_err(|e| e.to_string());
            Ok(StaircaseRun { beta, profile, plateaus, errors, max_error, well_prepared })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert!((merge_threshold(std::f64::consts::E) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((merge_threshold(100.0) - 0.046_60).abs() < 1e-5);
    }

    #[test]
    fn rate_for_quarter_turn() {
        let r = tau_rate(&[0.0, std::f64::consts::FRAC_PI_2], 10.0);
        let rate = r.rate().unwrap();
        assert!((rate / (10f64.ln() * 10f64.exp()) - 1.0).abs() < 1e-12);
        assert!((rate - 5.07e4).abs() < 100.0);
        assert!(tau_rate(&[0.3], 10.0).is_terminal());
    }

    #[test]
    fn levels_for_five() {
        let v: Vec<f64> = (0..5).map(|i| phi_infinity(5, i)).collect();
        for (a, b) in v.iter().zip([0.2, 0.28, 0.44, 0.68, 1.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
