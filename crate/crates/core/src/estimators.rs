//! Zeroth-order gradient estimators built from one or two function values.

use crate::error::{invalid, Result};
use crate::oracles::CostFunction;
use crate::rng::RngStream;
use crate::vecgeom::{fill_unit_sphere, Vector};

/// One estimator call: where it was centred, which direction was drawn,
/// which points were evaluated (and charged), and the resulting estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct ZoQuery {
    pub center: Vector,
    pub direction: Vector,
    pub delta: f64,
    pub query_points: Vec<Vector>,
    pub values: Vec<f64>,
    pub estimate: Vector,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid(format!("smoothing radius must be positive, got {delta}")));
    }
    Ok(())
}

fn check_direction(f: &CostFunction, center: &Vector, u: &Vector) -> Result<()> {
    if center.dim() != f.dim() || u.dim() != f.dim() {
        return Err(invalid("dimension mismatch between function, center and direction"));
    }
    if (u.norm() - 1.0).abs() > 1e-9 {
        return Err(invalid("direction must be a unit vector"));
    }
    Ok(())
}

fn draw_direction(rng: &mut RngStream, dim: usize) -> Vector {
    let mut u = Vector::zeros(dim);
    fill_unit_sphere(rng, u.as_mut_slice());
    u
}

/// One-point estimate `g = (d/δ) f(w + δu) u` with a fresh direction.
pub fn one_point_estimate(f: &CostFunction, w: &Vector, delta: f64, rng: &mut RngStream) -> Result<ZoQuery> {
    check_delta(delta)?;
    let u = draw_direction(rng, f.dim());
    one_point_along(f, w, delta, u)
}

/// One-point estimate along a caller-chosen unit direction.
pub fn one_point_along(f: &CostFunction, w: &Vector, delta: f64, u: Vector) -> Result<ZoQuery> {
    check_delta(delta)?;
    check_direction(f, w, &u)?;
    let mut at = w.clone();
    at.axpy(delta, &u);
    let value = f.eval_unchecked(at.as_slice());
    let estimate = u.scaled(f.dim() as f64 * value / delta);
    Ok(ZoQuery {
        center: w.clone(),
        direction: u,
        delta,
        query_points: vec![at],
        values: vec![value],
        estimate,
    })
}

/// Symmetric two-point estimate `g = d (f(x+δu) - f(x-δu)) u / (2δ)`.
pub fn two_point_estimate(f: &CostFunction, x: &Vector, delta: f64, rng: &mut RngStream) -> Result<ZoQuery> {
    check_delta(delta)?;
    let u = draw_direction(rng, f.dim());
    two_point_along(f, x, delta, u)
}

pub fn two_point_along(f: &CostFunction, x: &Vector, delta: f64, u: Vector) -> Result<ZoQuery> {
    check_delta(delta)?;
    check_direction(f, x, &u)?;
    let mut plus = x.clone();
    plus.axpy(delta, &u);
    let mut minus = x.clone();
    minus.axpy(-delta, &u);
    let v1 = f.eval_unchecked(plus.as_slice());
    let v2 = f.eval_unchecked(minus.as_slice());
    let estimate = u.scaled(f.dim() as f64 * (v1 - v2) / (2.0 * delta));
    Ok(ZoQuery {
        center: x.clone(),
        direction: u,
        delta,
        query_points: vec![plus, minus],
        values: vec![v1, v2],
        estimate,
    })
}

/// Monte-Carlo estimate of the sphere-smoothed value `E_u f(x + δu)`.
pub fn smoothed_value(f: &CostFunction, x: &Vector, delta: f64, n_samples: usize, rng: &mut RngStream) -> Result<f64> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid(format!("smoothing radius must be nonnegative, got {delta}")));
    }
    if n_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    if x.dim() != f.dim() {
        return Err(invalid("dimension mismatch"));
    }
    let mut u = Vector::zeros(f.dim());
    let mut at = Vector::zeros(f.dim());
    let mut acc = 0.0;
    for _ in 0..n_samples {
        fill_unit_sphere(rng, u.as_mut_slice());
        at.as_mut_slice().copy_from_slice(x.as_slice());
        at.axpy(delta, &u);
        acc += f.eval_unchecked(at.as_slice());
    }
    Ok(acc / n_samples as f64)
}
