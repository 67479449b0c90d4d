//! Dense vectors, Euclidean-ball projection and uniform sphere sampling.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::RngStream;

/// Dense real vector. Models, gradients and linear coefficients all live here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Checked constructor: rejects empty input and non-finite entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(invalid("vector must have dimension >= 1"));
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(invalid("vector has non-finite entries"));
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Standard basis vector `e_i` scaled by `scale`.
    pub fn basis(dim: usize, i: usize, scale: f64) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i] = scale;
        v
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> f64) -> Self {
        Self((0..dim).map(f).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn scaled(&self, a: f64) -> Vector {
        Vector(self.0.iter().map(|v| a * v).collect())
    }

    pub fn scale_mut(&mut self, a: f64) {
        self.0.iter_mut().for_each(|v| *v *= a);
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Vector) {
        axpy(&mut self.0, a, &other.0);
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(x, y)| x + y).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(x, y)| x - y).collect())
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Arithmetic mean of a non-empty set of equal-length vectors.
    pub fn mean<'a>(vs: impl IntoIterator<Item = &'a Vector>) -> Option<Vector> {
        let mut it = vs.into_iter();
        let mut acc = it.next()?.clone();
        let mut n = 1usize;
        for v in it {
            axpy(&mut acc.0, 1.0, &v.0);
            n += 1;
        }
        acc.scale_mut(1.0 / n as f64);
        Some(acc)
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("ball radius must be positive, got {radius}")));
    }
    Ok(())
}

/// Euclidean projection onto the ball of the given radius centred at zero.
///
/// The returned vector always has norm `<= radius` when recomputed, so the
/// projection is idempotent bit-for-bit.
pub fn project_l2_ball(x: &Vector, radius: f64) -> Result<Vector> {
    check_radius(radius)?;
    if !x.is_finite() {
        return Err(invalid("cannot project a non-finite vector"));
    }
    let mut out = x.clone();
    project_in_place(out.as_mut_slice(), radius);
    Ok(out)
}

/// In-place projection; callers guarantee finite input and positive radius.
pub(crate) fn project_in_place(x: &mut [f64], radius: f64) {
    let n = norm(x);
    if n <= radius {
        return;
    }
    let s = radius / n;
    x.iter_mut().for_each(|v| *v *= s);
    // rounding can leave the norm a few ulps above the radius
    while norm(x) > radius {
        x.iter_mut().for_each(|v| *v *= 1.0 - f64::EPSILON);
    }
}

/// Uniform draw from the unit sphere in `dim` dimensions (normalized Gaussian).
pub fn sample_unit_sphere(rng: &mut RngStream, dim: usize) -> Result<Vector> {
    if dim == 0 {
        return Err(invalid("sphere dimension must be >= 1"));
    }
    let mut u = Vector::zeros(dim);
    fill_unit_sphere(rng, u.as_mut_slice());
    Ok(u)
}

pub(crate) fn fill_unit_sphere(rng: &mut RngStream, out: &mut [f64]) {
    loop {
        rng.fill_gaussian(out);
        let n = norm(out);
        // a zero (or underflowing) draw has probability zero; resample anyway
        if n > f64::MIN_POSITIVE && n.is_finite() {
            out.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

/// Uniform draw from the ball of the given radius.
pub fn sample_ball(rng: &mut RngStream, dim: usize, radius: f64) -> Result<Vector> {
    check_radius(radius)?;
    let mut u = sample_unit_sphere(rng, dim)?;
    let r = radius * rng.uniform().powf(1.0 / dim as f64);
    u.scale_mut(r);
    Ok(u)
}

/// Bregman-style potential of the lazily projected iterate:
/// `d(x, y) = |x|^2/2 - |ŷ|^2/2 - <y, x - ŷ>` with `ŷ` the projection of `y`.
/// Always at least `|x - ŷ|^2 / 2` for `x` inside the ball.
pub fn lazy_potential(x_star: &Vector, y: &Vector, radius: f64) -> Result<f64> {
    check_radius(radius)?;
    if x_star.dim() != y.dim() {
        return Err(invalid(format!(
            "dimension mismatch: {} vs {}",
            x_star.dim(),
            y.dim()
        )));
    }
    if x_star.norm() > radius {
        return Err(invalid(format!(
            "comparator norm {} exceeds radius {radius}",
            x_star.norm()
        )));
    }
    let y_hat = project_l2_ball(y, radius)?;
    let diff = x_star.sub(&y_hat);
    Ok(0.5 * x_star.norm_sq() - 0.5 * y_hat.norm_sq() - y.dot(&diff))
}
