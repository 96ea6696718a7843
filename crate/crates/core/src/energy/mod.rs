//! Interaction energy, its angular gradient and Hessian, and trajectory
//! diagnostics built on them.

mod diagnostics;

pub use diagnostics::*;

use serde::{Deserialize, Serialize};

use crate::geometry::{dot, Configuration};

/// Energy in raw form `(1/(2 beta N^2)) sum m_i m_j e^{beta(<x_i,x_j> - 1)}`
/// and normalized form (`raw * 2 beta`, equal to 1 for a single cluster).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub raw: f64,
    pub normalized: f64,
}

impl EnergyValue {
    fn from_normalized(normalized: f64, beta: f64) -> Self {
        Self { raw: normalized / (2.0 * beta), normalized }
    }
}

pub fn energy(config: &Configuration, beta: f64) -> EnergyValue {
    let n = config.n();
    let m = config.weights();
    let total = config.total_weight();
    let mut s = 0.0;
    for i in 0..n {
        s += m[i] * m[i] * (beta * (dot(config.point(i), config.point(i)) - 1.0)).exp();
        for j in i + 1..n {
            s += 2.0 * m[i] * m[j] * (beta * (dot(config.point(i), config.point(j)) - 1.0)).exp();
        }
    }
    EnergyValue::from_normalized(s / (total * total), beta)
}

pub fn energy_angular(theta: &[f64], weights: &[f64], beta: f64) -> EnergyValue {
    let total: f64 = weights.iter().sum();
    let mut s: f64 = weights.iter().map(|w| w * w).sum();
    for i in 0..theta.len() {
        for j in i + 1..theta.len() {
            s += 2.0 * weights[i] * weights[j] * (beta * ((theta[i] - theta[j]).cos() - 1.0)).exp();
        }
    }
    EnergyValue::from_normalized(s / (total * total), beta)
}

/// Gradient of the raw energy in angles,
/// `dE/dt_i = -(m_i/N^2) sum_j m_j sin(t_i - t_j) e^{beta(cos(t_i - t_j) - 1)}`.
/// For unit weights this is exactly the angular USA field.
pub fn grad_angular(theta: &[f64], weights: &[f64], beta: f64) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let s = 1.0 / (total * total);
    (0..theta.len())
        .map(|i| {
            let acc: f64 = (0..theta.len())
                .map(|j| {
                    let x = theta[i] - theta[j];
                    weights[j] * x.sin() * (beta * (x.cos() - 1.0)).exp()
                })
                .sum();
            -s * weights[i] * acc
        })
        .collect()
}

/// `g(x) = (cos x - beta sin^2 x) e^{beta(cos x - 1)}`, the pair kernel of the Hessian.
pub fn hessian_kernel(x: f64, beta: f64) -> f64 {
    (x.cos() - beta * x.sin().powi(2)) * (beta * (x.cos() - 1.0)).exp()
}

/// Smallest positive root of the Hessian kernel: pairs farther apart than this
/// contribute non-positive off-diagonal entries.
pub fn hessian_kernel_root(beta: f64) -> f64 {
    // cos x = beta sin^2 x  <=>  beta c^2 + c - beta = 0 with c = cos x.
    let c = (-1.0 + (1.0 + 4.0 * beta * beta).sqrt()) / (2.0 * beta);
    c.acos()
}

/// Dense `n x n` Hessian of the raw energy in angles. Rows sum to zero.
pub fn hessian_angular(theta: &[f64], weights: &[f64], beta: f64) -> Vec<Vec<f64>> {
    let n = theta.len();
    let total: f64 = weights.iter().sum();
    let s = 1.0 / (total * total);
    let mut h = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = s * weights[i] * weights[j] * hessian_kernel(theta[i] - theta[j], beta);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = -row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v).sum::<f64>();
    }
    h
}

pub fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// `<H v, v>` computed directly and through the pairwise form
/// `-(1/2) sum_{i,j} H_ij (v_i - v_j)^2`.
pub fn hessian_quadratic_form(theta: &[f64], weights: &[f64], beta: f64, v: &[f64]) -> (f64, f64) {
    let h = hessian_angular(theta, weights, beta);
    let direct = dot(&mat_vec(&h, v), v);
    let mut pairwise = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            if i != j {
                pairwise += h[i][j] * (v[i] - v[j]).powi(2);
            }
        }
    }
    (direct, -0.5 * pairwise)
}

/// Jacobian of the angular SA field. Off-diagonal entries are
/// `b_ij = a_ij [cos x_ij - beta sin^2 x_ij + beta sin x_ij sum_k a_ik sin x_ik]`
/// with `x_ij = t_i - t_j` and `a` the softmax of `beta cos x`; the diagonal makes
/// rows sum to zero, so `(J v)_i = sum_j b_ij (v_j - v_i)`. Not symmetric.
pub fn sa_metric_hessian(theta: &[f64], weights: &[f64], beta: f64) -> Vec<Vec<f64>> {
    let n = theta.len();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut z = 0.0;
        for j in 0..n {
            a[i][j] = weights[j] * (beta * ((theta[i] - theta[j]).cos() - 1.0)).exp();
            z += a[i][j];
        }
        a[i].iter_mut().for_each(|v| *v /= z);
    }
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        let pull: f64 = (0..n).map(|k| a[i][k] * (theta[i] - theta[k]).sin()).sum();
        for j in 0..n {
            if j != i {
                let x = theta[i] - theta[j];
                b[i][j] = a[i][j] * (x.cos() - beta * x.sin().powi(2) + beta * x.sin() * pull);
            }
        }
        b[i][i] = -b[i].iter().sum::<f64>();
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    #[test]
    fn cluster_energy_is_one() {
        let c = Configuration::from_angles(&[0.4; 5], None).unwrap();
        let e = energy(&c, 1.0);
        assert!((e.normalized - 1.0).abs() < 1e-14);
        assert!((e.raw - 0.5).abs() < 1e-14);
    }

    #[test]
    fn antipodal_pair_energy() {
        let e = energy_angular(&[0.0, PI], &[1.0, 1.0], 1.0);
        let expect = (2.0 + 2.0 * (-2.0f64).exp()) / 4.0;
        assert!((e.normalized - expect).abs() < 1e-14);
        assert!((expect - 0.567_67).abs() < 1e-5);
    }

    #[test]
    fn quarter_turn_gradient() {
        let g = grad_angular(&[0.0, PI / 2.0], &[1.0, 1.0], 1.0);
        assert!((g[0] - 1.0 / (4.0 * E)).abs() < 1e-15);
        assert!((g[1] + 1.0 / (4.0 * E)).abs() < 1e-15);
    }

    #[test]
    fn kernel_at_pi() {
        assert!((hessian_kernel(PI, 1.0) + (-2.0f64).exp()).abs() < 1e-15);
        let r = hessian_kernel_root(20.0);
        assert!(hessian_kernel(r, 20.0).abs() < 1e-14);
    }
}
