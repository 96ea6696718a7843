//! Points on the unit sphere, weighted configurations and spherical caps.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::tolerance;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `P_x y = y - <x, y> x`, the tangent part of `y` at `x`.
pub fn project_tangent(x: &[f64], y: &[f64]) -> Vec<f64> {
    let c = dot(x, y);
    x.iter().zip(y).map(|(xi, yi)| yi - c * xi).collect()
}

/// Geodesic angle between two unit vectors.
pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Distance between two angles along the circle, in `[0, pi]`.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Weighted circular mean, returned as the representative closest to `reference`.
pub fn circular_mean(theta: &[f64], weights: &[f64], reference: f64) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (t, w) in theta.iter().zip(weights) {
        s += w * t.sin();
        c += w * t.cos();
    }
    let m = s.atan2(c);
    reference + wrap_angle(m - reference)
}

/// A vector of unit Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `v`. Fails on empty, zero or non-finite input.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if v.is_empty() || !n.is_finite() || n == 0.0 {
            return invalid("cannot normalize a zero, empty or non-finite vector");
        }
        Ok(Self(v.into_iter().map(|x| x / n).collect()))
    }

    pub fn from_angle(theta: f64) -> Self {
        Self(vec![theta.cos(), theta.sin()])
    }

    /// `e_k` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Angle in the plane; only meaningful for `dim == 2`.
    pub fn to_angle(&self) -> f64 {
        self.0[1].atan2(self.0[0])
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        let n = norm(&v);
        if (n - 1.0).abs() > 1e-9 {
            return invalid(format!("vector has norm {n}, expected 1"));
        }
        UnitVector::new(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(u: UnitVector) -> Vec<f64> {
        u.0
    }
}

/// `n` weighted points on `S^{d-1}`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigurationRepr", into = "ConfigurationRepr")]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigurationRepr {
    dim: usize,
    n: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<ConfigurationRepr> for Configuration {
    type Error = Error;
    fn try_from(r: ConfigurationRepr) -> Result<Self> {
        if r.points.len() != r.n {
            return invalid(format!("n = {} but {} points given", r.n, r.points.len()));
        }
        Configuration::new(r.dim, r.points, Some(r.weights))
    }
}

impl From<Configuration> for ConfigurationRepr {
    fn from(c: Configuration) -> Self {
        ConfigurationRepr { dim: c.dim, n: c.n(), points: c.points().map(|p| p.to_vec()).collect(), weights: c.weights }
    }
}

impl Configuration {
    /// Builds a configuration from points that already have unit norm.
    /// `weights` defaults to all ones.
    pub fn new(dim: usize, points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        let c = Self::assemble(dim, points, weights, false)?;
        for (i, p) in c.points().enumerate() {
            let dev = (norm(p) - 1.0).abs();
            if dev > tolerance::UNIT_NORM {
                return invalid(format!("point {i} has |x| - 1 = {dev:e}"));
            }
        }
        Ok(c)
    }

    /// Builds a configuration and normalizes every point.
    pub fn normalized(dim: usize, points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        Self::assemble(dim, points, weights, true)
    }

    fn assemble(dim: usize, points: Vec<Vec<f64>>, weights: Option<Vec<f64>>, normalize: bool) -> Result<Self> {
        if dim < 2 {
            return invalid("dimension must be at least 2");
        }
        if points.is_empty() {
            return invalid("configuration needs at least one point");
        }
        let n = points.len();
        let weights = weights.unwrap_or_else(|| vec![1.0; n]);
        if weights.len() != n {
            return invalid(format!("{} weights for {n} points", weights.len()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return invalid("weights must be positive and finite");
        }
        let mut coords = Vec::with_capacity(n * dim);
        for (i, p) in points.into_iter().enumerate() {
            if p.len() != dim {
                return invalid(format!("point {i} has dimension {}, expected {dim}", p.len()));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return invalid(format!("point {i} is not finite"));
            }
            if normalize {
                coords.extend(UnitVector::new(p)?.0);
            } else {
                coords.extend(p);
            }
        }
        Ok(Self { dim, coords, weights })
    }

    /// Points `(cos t, sin t)` on the circle.
    pub fn from_angles(theta: &[f64], weights: Option<Vec<f64>>) -> Result<Self> {
        let pts = theta.iter().map(|t| vec![t.cos(), t.sin()]).collect();
        Self::normalized(2, pts, weights)
    }

    pub(crate) fn from_raw(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len(), dim * weights.len());
        Self { dim, coords, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Rescales every point back to unit norm.
    pub fn renormalize(&mut self) {
        for p in self.coords.chunks_exact_mut(self.dim) {
            let n = norm(p);
            p.iter_mut().for_each(|x| *x /= n);
        }
    }

    /// Polar angles of the points; requires `dim == 2`.
    pub fn angles(&self) -> Result<Vec<f64>> {
        if self.dim != 2 {
            return invalid("angles are only defined on the circle (dim = 2)");
        }
        Ok(self.points().map(|p| p[1].atan2(p[0])).collect())
    }

    /// Smallest Euclidean distance between two distinct points (0 if `n < 2`).
    pub fn min_pair_dist(&self) -> f64 {
        let n = self.n();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                best = best.min(dist_sq(self.point(i), self.point(j)));
            }
        }
        if best.is_finite() {
            best.sqrt()
        } else {
            0.0
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }
}

/// Angles on the circle together with weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularConfiguration {
    pub theta: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AngularConfiguration {
    pub fn uniform(theta: Vec<f64>) -> Self {
        let n = theta.len();
        Self { theta, weights: vec![1.0; n] }
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn to_configuration(&self) -> Result<Configuration> {
        Configuration::from_angles(&self.theta, Some(self.weights.clone()))
    }
}

/// Caps `{x : <x, w_q> >= 1 - eps}` sharing the same height `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapFamily {
    pub centers: Vec<UnitVector>,
    pub eps: f64,
}

impl CapFamily {
    pub fn new(centers: Vec<UnitVector>, eps: f64) -> Result<Self> {
        if centers.is_empty() {
            return invalid("cap family needs at least one center");
        }
        let d = centers[0].dim();
        if centers.iter().any(|c| c.dim() != d) {
            return invalid("cap centers have mixed dimensions");
        }
        if !(eps > 0.0 && eps < 1.0) {
            return invalid(format!("cap height eps = {eps} outside (0, 1)"));
        }
        Ok(Self { centers, eps })
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    /// Index of the cap of height `scale * eps` containing `x`, if any.
    pub fn locate(&self, x: &[f64], scale: f64) -> Option<usize> {
        let h = scale * self.eps;
        let mut best: Option<(usize, f64)> = None;
        for (q, w) in self.centers.iter().enumerate() {
            let c = dot(x, w.as_slice());
            if c >= 1.0 - h && best.is_none_or(|(_, b)| c > b) {
                best = Some((q, c));
            }
        }
        best.map(|(q, _)| q)
    }

    pub fn alpha(&self) -> Result<f64> {
        cap_alpha(&self.centers, self.eps)
    }
}

/// `x` lies in the cap of height `eps` around `w`.
pub fn in_cap(x: &[f64], w: &UnitVector, eps: f64) -> bool {
    dot(x, w.as_slice()) >= 1.0 - eps
}

/// Largest inner product between points of two distinct caps of height `2 eps`.
///
/// For two centers at angle `theta` and cap half-angle `phi = acos(1 - 2 eps)`
/// the value is `cos(theta - 2 phi)`, provided the caps do not overlap. With a
/// single center the convention `alpha = -1` is used.
pub fn cap_alpha(centers: &[UnitVector], eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return invalid(format!("eps = {eps} outside (0, 1/2)"));
    }
    if centers.len() < 2 {
        return Ok(-1.0);
    }
    let phi = (1.0 - 2.0 * eps).acos();
    let mut alpha = f64::NEG_INFINITY;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let theta = angle(centers[i].as_slice(), centers[j].as_slice());
            if theta <= 2.0 * phi {
                return Err(Error::CapsNotSeparated(format!(
                    "centers {i} and {j} are {theta:.6} apart, 2eps-caps need more than {:.6}",
                    2.0 * phi
                )));
            }
            alpha = alpha.max((theta - 2.0 * phi).cos());
        }
    }
    Ok(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_for_quarter_turn() {
        let c = vec![UnitVector::from_angle(0.0), UnitVector::from_angle(PI / 2.0)];
        let a = cap_alpha(&c, 0.01).unwrap();
        // cos(pi/2 - 2 acos(0.98))
        assert!((a - 0.390_2).abs() < 5e-4, "{a}");
    }

    #[test]
    fn overlapping_caps_rejected() {
        let c = vec![UnitVector::from_angle(0.0), UnitVector::from_angle(0.1)];
        assert!(matches!(cap_alpha(&c, 0.01), Err(Error::CapsNotSeparated(_))));
    }

    #[test]
    fn wrap_and_mean() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((circle_dist(0.1, 2.0 * PI - 0.1) - 0.2).abs() < 1e-12);
        let m = circular_mean(&[-0.1, 0.3], &[3.0, 1.0], 0.0);
        assert!(m > -0.1 && m < 0.3);
    }
}
