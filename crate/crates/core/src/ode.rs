//! Dormand–Prince 5(4) embedded pair with event location by bisection.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Tolerances and step bounds for the adaptive pair.
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_init: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rtol: crate::tolerance::ADAPTIVE_RTOL,
            atol: 1e-14,
            h_max: f64::INFINITY,
            h_init: 1e-3,
            max_steps: 10_000_000,
        }
    }
}

/// Result of one trial step: the 5th-order solution and the scaled error (accept if `<= 1`).
pub struct Trial {
    pub y: Vec<f64>,
    pub err: f64,
}

/// Outcome of [`Dopri5::integrate_until`].
#[derive(Debug, Clone)]
pub struct Hit {
    pub t: f64,
    pub y: Vec<f64>,
    /// `false` when `t_max` was reached before the event.
    pub hit: bool,
    pub steps: usize,
}

impl Dopri5 {
    pub fn step<F>(&self, f: &F, t: f64, y: &[f64], h: f64) -> Trial
    where
        F: Fn(f64, &[f64]) -> Vec<f64>,
    {
        let n = y.len();
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        let mut tmp = vec![0.0; n];
        for s in 0..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate() {
                    acc += h * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            k.push(f(t + C[s] * h, &tmp));
        }
        // Stage 7 is evaluated at the 5th-order solution (FSAL), so `tmp` holds it.
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += (B[s] - B_LOW[s]) * k[s][i];
            }
            let sc = self.atol + self.rtol * y[i].abs().max(tmp[i].abs());
            err += (h * e / sc).powi(2);
        }
        Trial { y: tmp, err: (err / n as f64).sqrt() }
    }

    /// Step-size update after a trial with scaled error `err`.
    pub fn next_h(&self, h: f64, err: f64) -> f64 {
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        (h * fac).min(self.h_max)
    }

    /// Integrates from `(t0, y0)` until `g(t, y) <= 0` or `t_max`. The crossing
    /// is located by bisecting the last step to `event_tol * max(1, |t|)`.
    pub fn integrate_until<F, G>(&self, f: &F, t0: f64, y0: &[f64], t_max: f64, g: &G, event_tol: f64) -> Result<Hit>
    where
        F: Fn(f64, &[f64]) -> Vec<f64>,
        G: Fn(f64, &[f64]) -> f64,
    {
        let mut t = t0;
        let mut y = y0.to_vec();
        if g(t, &y) <= 0.0 {
            return Ok(Hit { t, y, hit: true, steps: 0 });
        }
        let mut h = self.h_init.min(self.h_max);
        let mut steps = 0;
        while t < t_max {
            if steps >= self.max_steps {
                return Err(Error::Numeric(format!("step budget exhausted at t = {t}")));
            }
            steps += 1;
            let h_try = h.min(t_max - t);
            let trial = self.step(f, t, &y, h_try);
            if !trial.err.is_finite() || trial.y.iter().any(|v| !v.is_finite()) {
                h = h_try * 0.2;
                if h < 1e-300 {
                    return Err(Error::NonFinite { step: steps, t });
                }
                continue;
            }
            if trial.err > 1.0 {
                h = self.next_h(h_try, trial.err);
                continue;
            }
            if g(t + h_try, &trial.y) <= 0.0 {
                let (mut lo, mut hi) = (0.0, h_try);
                let mut y_hi = trial.y;
                let tol = event_tol * t.abs().max(1.0);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    let ym = self.step(f, t, &y, mid).y;
                    if g(t + mid, &ym) <= 0.0 {
                        hi = mid;
                        y_hi = ym;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(Hit { t: t + hi, y: y_hi, hit: true, steps });
            }
            t += h_try;
            y = trial.y;
            h = self.next_h(h_try, trial.err);
        }
        Ok(Hit { t, y, hit: false, steps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_hitting_time() {
        // y' = -y, y(0) = 1 hits 1e-3 at ln(1000).
        let s = Dopri5::default();
        let hit = s
            .integrate_until(&|_, y: &[f64]| vec![-y[0]], 0.0, &[1.0], 100.0, &|_, y: &[f64]| y[0] - 1e-3, 1e-12)
            .unwrap();
        assert!(hit.hit);
        assert!((hit.t - 1000f64.ln()).abs() < 1e-8, "{}", hit.t);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let s = Dopri5::default();
        let f = |_: f64, y: &[f64]| vec![y[1], -y[0]];
        let hit = s.integrate_until(&f, 0.0, &[1.0, 0.0], 10.0, &|t, _| 2.0 * std::f64::consts::PI - t, 1e-12).unwrap();
        let hit2 = s.integrate_until(&f, 0.0, &[1.0, 0.0], hit.t, &|_, _| 1.0, 1e-12).unwrap();
        assert!((hit2.y[0] - 1.0).abs() < 1e-8 && hit2.y[1].abs() < 1e-8);
    }
}
