//! SA and USA vector fields, their angular forms on the circle, and
//! projected time integrators.

use serde::{Deserialize, Serialize};

use crate::energy;
use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, wrap_angle, AngularConfiguration, Configuration};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Softmax-normalized attention.
    Sa,
    /// Unnormalized attention; gradient ascent of the interaction energy.
    Usa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub beta: f64,
}

impl Model {
    pub fn sa(beta: f64) -> Self {
        Self { kind: ModelKind::Sa, beta }
    }

    pub fn usa(beta: f64) -> Self {
        Self { kind: ModelKind::Usa, beta }
    }

    pub fn velocity(&self, config: &Configuration) -> Vec<f64> {
        match self.kind {
            ModelKind::Sa => sa_velocity(config, self.beta),
            ModelKind::Usa => usa_velocity(config, self.beta),
        }
    }
}

fn gram(config: &Configuration) -> Vec<f64> {
    let n = config.n();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        g[i * n + i] = dot(config.point(i), config.point(i));
        for j in i + 1..n {
            let v = dot(config.point(i), config.point(j));
            g[i * n + j] = v;
            g[j * n + i] = v;
        }
    }
    g
}

/// `v_i = P_{x_i} sum_j a_ij x_j` with `a_ij` the mass-weighted softmax of
/// `beta <x_i, x_j>`. Rows are shifted by their maximum before exponentiation.
pub fn sa_velocity(config: &Configuration, beta: f64) -> Vec<f64> {
    let (n, d) = (config.n(), config.dim());
    let g = gram(config);
    let m = config.weights();
    let mut out = vec![0.0; n * d];
    let mut y = vec![0.0; d];
    for i in 0..n {
        let row = &g[i * n..(i + 1) * n];
        let mx = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut z = 0.0;
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            let w = m[j] * (beta * (row[j] - mx)).exp();
            z += w;
            for (yk, xk) in y.iter_mut().zip(config.point(j)) {
                *yk += w * xk;
            }
        }
        let xi = config.point(i);
        let c = dot(xi, &y) / z;
        for k in 0..d {
            out[i * d + k] = y[k] / z - c * xi[k];
        }
    }
    out
}

/// `v_i = (1/N) P_{x_i} sum_j m_j e^{beta(<x_i, x_j> - 1)} x_j`, `N = sum_j m_j`.
pub fn usa_velocity(config: &Configuration, beta: f64) -> Vec<f64> {
    let (n, d) = (config.n(), config.dim());
    let g = gram(config);
    let m = config.weights();
    let total = config.total_weight();
    let mut out = vec![0.0; n * d];
    let mut y = vec![0.0; d];
    for i in 0..n {
        y.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..n {
            let w = m[j] * (beta * (g[i * n + j] - 1.0)).exp();
            for (yk, xk) in y.iter_mut().zip(config.point(j)) {
                *yk += w * xk;
            }
        }
        let xi = config.point(i);
        let c = dot(xi, &y);
        for k in 0..d {
            out[i * d + k] = (y[k] - c * xi[k]) / total;
        }
    }
    out
}

/// Angular USA field on the circle, `(1/N^2) sum_j m_j e^{beta(cos(t_j - t_i) - 1)} sin(t_j - t_i)`.
/// This is the gradient of the interaction energy (mass-weighted metric).
pub fn angular_usa_velocity(theta: &[f64], weights: &[f64], beta: f64) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let s = 1.0 / (total * total);
    theta
        .iter()
        .map(|&ti| {
            s * theta
                .iter()
                .zip(weights)
                .map(|(&tj, &mj)| {
                    let x = tj - ti;
                    mj * (beta * (x.cos() - 1.0)).exp() * x.sin()
                })
                .sum::<f64>()
        })
        .collect()
}

/// Angular SA field, `sum_j a_ij sin(t_j - t_i)` with softmax weights of `beta cos(t_i - t_j)`.
pub fn angular_sa_velocity(theta: &[f64], weights: &[f64], beta: f64) -> Vec<f64> {
    theta
        .iter()
        .map(|&ti| {
            let (mut num, mut z) = (0.0, 0.0);
            // cos <= 1, so shifting by beta keeps every exponent non-positive.
            for (&tj, &mj) in theta.iter().zip(weights) {
                let x = tj - ti;
                let w = mj * (beta * (x.cos() - 1.0)).exp();
                num += w * x.sin();
                z += w;
            }
            num / z
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "euler-project")]
    EulerProject,
    #[serde(rename = "rk4-project")]
    Rk4Project,
}

/// Fixed-step integration settings. Records are taken every `cadence` steps
/// and at the final time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_max: f64,
    #[serde(default = "one")]
    pub cadence: usize,
}

fn one() -> usize {
    1
}

impl IntegratorSpec {
    pub fn new(scheme: Scheme, dt: f64, t_max: f64) -> Self {
        Self { scheme, dt, t_max, cadence: 1 }
    }

    pub fn with_cadence(mut self, cadence: usize) -> Self {
        self.cadence = cadence;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return invalid(format!("t_max = {} must be non-negative", self.t_max));
        }
        if self.cadence == 0 {
            return invalid("cadence must be at least 1");
        }
        Ok(())
    }

    /// Step sizes covering `[0, t_max]`; the last one may be shorter.
    fn steps(&self) -> (usize, f64) {
        let k = (self.t_max / self.dt - 1e-9).ceil().max(0.0) as usize;
        let last = self.t_max - (k.saturating_sub(1)) as f64 * self.dt;
        (k, last)
    }
}

/// One sampled state with its scalar observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub config: Configuration,
    pub energy: f64,
    pub energy_normalized: f64,
    pub grad_norm: f64,
    pub min_pair_dist: f64,
}

impl TraceRecord {
    pub fn observe(t: f64, config: &Configuration, beta: f64) -> Self {
        let e = energy::energy(config, beta);
        let total = config.total_weight();
        let g = usa_velocity(config, beta);
        Self {
            t,
            config: config.clone(),
            energy: e.raw,
            energy_normalized: e.normalized,
            grad_norm: g.iter().map(|v| v * v).sum::<f64>().sqrt() / total,
            min_pair_dist: config.min_pair_dist(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub model: Model,
    pub records: Vec<TraceRecord>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }
}

/// Called at every record with the time and state.
pub trait Observer {
    fn observe(&mut self, t: f64, config: &Configuration);
}

impl<F: FnMut(f64, &Configuration)> Observer for F {
    fn observe(&mut self, t: f64, config: &Configuration) {
        self(t, config)
    }
}

fn axpy_normalized(x: &Configuration, h: f64, v: &[f64]) -> Configuration {
    let coords = x.coords().iter().zip(v).map(|(a, b)| a + h * b).collect();
    let mut y = Configuration::from_raw(x.dim(), coords, x.weights().to_vec());
    y.renormalize();
    y
}

/// One projected step of size `h`.
pub fn step(model: &Model, scheme: Scheme, x: &Configuration, h: f64) -> Configuration {
    match scheme {
        Scheme::EulerProject => axpy_normalized(x, h, &model.velocity(x)),
        Scheme::Rk4Project => {
            let k1 = model.velocity(x);
            let k2 = model.velocity(&axpy_normalized(x, 0.5 * h, &k1));
            let k3 = model.velocity(&axpy_normalized(x, 0.5 * h, &k2));
            let k4 = model.velocity(&axpy_normalized(x, h, &k3));
            let v: Vec<f64> = (0..k1.len()).map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0).collect();
            axpy_normalized(x, h, &v)
        }
    }
}

/// Integrates `model` from `config` and records observables at the configured cadence.
pub fn integrate(
    model: &Model,
    config: &Configuration,
    spec: &IntegratorSpec,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    spec.validate()?;
    if !(model.beta > 0.0 && model.beta.is_finite()) {
        return invalid(format!("beta = {} must be positive", model.beta));
    }
    let (n_steps, last) = spec.steps();
    let mut x = config.clone();
    let mut t = 0.0;
    let mut records = vec![TraceRecord::observe(t, &x, model.beta)];
    observers.iter_mut().for_each(|o| o.observe(t, &x));
    for k in 1..=n_steps {
        let h = if k == n_steps { last } else { spec.dt };
        x = step(model, spec.scheme, &x, h);
        t = if k == n_steps { spec.t_max } else { k as f64 * spec.dt };
        if !x.is_finite() {
            return Err(Error::NonFinite { step: k, t });
        }
        if k % spec.cadence == 0 || k == n_steps {
            records.push(TraceRecord::observe(t, &x, model.beta));
            observers.iter_mut().for_each(|o| o.observe(t, &x));
        }
    }
    Ok(Trajectory { model: *model, records })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngularFlow {
    /// `theta' = grad E` (the USA field with the `1/N^2` clock).
    UsaGradient,
    Sa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularRecord {
    pub t: f64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularTrajectory {
    pub beta: f64,
    pub flow: AngularFlow,
    pub weights: Vec<f64>,
    pub records: Vec<AngularRecord>,
}

fn angular_field(flow: AngularFlow, theta: &[f64], w: &[f64], beta: f64) -> Vec<f64> {
    match flow {
        AngularFlow::UsaGradient => angular_usa_velocity(theta, w, beta),
        AngularFlow::Sa => angular_sa_velocity(theta, w, beta),
    }
}

/// Fixed-step integration directly in angles. Angles are kept unwrapped so
/// trajectories are continuous.
pub fn integrate_angular(
    init: &AngularConfiguration,
    beta: f64,
    flow: AngularFlow,
    spec: &IntegratorSpec,
) -> Result<AngularTrajectory> {
    spec.validate()?;
    let (n_steps, last) = spec.steps();
    let w = &init.weights;
    let mut th = init.theta.clone();
    let mut records = vec![AngularRecord { t: 0.0, theta: th.clone() }];
    let add = |a: &[f64], h: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + h * y).collect() };
    for k in 1..=n_steps {
        let h = if k == n_steps { last } else { spec.dt };
        th = match spec.scheme {
            Scheme::EulerProject => add(&th, h, &angular_field(flow, &th, w, beta)),
            Scheme::Rk4Project => {
                let k1 = angular_field(flow, &th, w, beta);
                let k2 = angular_field(flow, &add(&th, 0.5 * h, &k1), w, beta);
                let k3 = angular_field(flow, &add(&th, 0.5 * h, &k2), w, beta);
                let k4 = angular_field(flow, &add(&th, h, &k3), w, beta);
                let v: Vec<f64> = (0..th.len()).map(|i| (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0).collect();
                add(&th, h, &v)
            }
        };
        let t = if k == n_steps { spec.t_max } else { k as f64 * spec.dt };
        if th.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k, t });
        }
        if k % spec.cadence == 0 || k == n_steps {
            records.push(AngularRecord { t, theta: th.clone() });
        }
    }
    Ok(AngularTrajectory { beta, flow, weights: w.clone(), records })
}

/// Converts a planar Cartesian trajectory into unwrapped angles.
pub fn to_angular(traj: &Trajectory) -> Result<AngularTrajectory> {
    let mut records: Vec<AngularRecord> = Vec::with_capacity(traj.records.len());
    for r in &traj.records {
        let mut th = r.config.angles()?;
        if let Some(prev) = records.last() {
            for (a, p) in th.iter_mut().zip(&prev.theta) {
                *a = p + wrap_angle(*a - p);
            }
        }
        records.push(AngularRecord { t: r.t, theta: th });
    }
    let weights = traj.records.first().map(|r| r.config.weights().to_vec()).unwrap_or_default();
    let flow = match traj.model.kind {
        ModelKind::Sa => AngularFlow::Sa,
        ModelKind::Usa => AngularFlow::UsaGradient,
    };
    Ok(AngularTrajectory { beta: traj.model.beta, flow, weights, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_fixed() {
        let c = Configuration::from_angles(&[0.7], None).unwrap();
        assert!(sa_velocity(&c, 3.0).iter().all(|v| v.abs() < 1e-15));
        assert!(usa_velocity(&c, 3.0).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn cartesian_usa_is_n_times_angular_gradient() {
        let th = [0.1, 0.9, 2.0, -1.3];
        let c = Configuration::from_angles(&th, None).unwrap();
        let v = usa_velocity(&c, 2.5);
        let a = angular_usa_velocity(&th, &[1.0; 4], 2.5);
        for i in 0..4 {
            let tangential = -th[i].sin() * v[2 * i] + th[i].cos() * v[2 * i + 1];
            assert!((tangential - 4.0 * a[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn sa_angular_matches_cartesian() {
        let th = [0.3, 1.1, -2.0];
        let c = Configuration::from_angles(&th, Some(vec![1.0, 2.0, 0.5])).unwrap();
        let v = sa_velocity(&c, 7.0);
        let a = angular_sa_velocity(&th, &[1.0, 2.0, 0.5], 7.0);
        for i in 0..3 {
            let tangential = -th[i].sin() * v[2 * i] + th[i].cos() * v[2 * i + 1];
            assert!((tangential - a[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn huge_beta_stays_finite() {
        let c = Configuration::from_angles(&[0.0, 0.5, 3.0], None).unwrap();
        assert!(sa_velocity(&c, 1e6).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_horizon_gives_one_record() {
        let c = Configuration::from_angles(&[0.0, 0.5], None).unwrap();
        let spec = IntegratorSpec::new(Scheme::Rk4Project, 0.1, 0.0);
        let tr = integrate(&Model::sa(1.0), &c, &spec, &mut []).unwrap();
        assert_eq!(tr.records.len(), 1);
    }

    #[test]
    fn last_step_lands_on_horizon() {
        let c = Configuration::from_angles(&[0.0, 0.5], None).unwrap();
        let spec = IntegratorSpec::new(Scheme::EulerProject, 0.3, 1.0);
        let tr = integrate(&Model::usa(1.0), &c, &spec, &mut []).unwrap();
        assert_eq!(tr.records.last().unwrap().t, 1.0);
        assert_eq!(tr.records.len(), 5);
    }
}
