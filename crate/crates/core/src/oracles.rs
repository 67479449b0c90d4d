//! Cost functions and the feedback oracles a machine may query.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::vecgeom::{dot, norm, Vector};

/// Value-and-gradient callback: writes the gradient into the slice and returns the value.
pub type ValueGrad = dyn Fn(&[f64], &mut [f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct CustomCost {
    dim: usize,
    callback: Arc<ValueGrad>,
}

impl fmt::Debug for CustomCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCost").field("dim", &self.dim).finish()
    }
}

#[derive(Clone, Debug)]
pub enum CostKind {
    Linear {
        beta: Vector,
    },
    /// `(H/2)|x-c|^2` inside radius `G/H`, `G|x-c| - G^2/(2H)` outside.
    HuberQuadratic {
        center: Vector,
    },
    Custom(CustomCost),
}

/// One convex cost function together with its declared class parameters.
#[derive(Clone, Debug)]
pub struct CostFunction {
    kind: CostKind,
    lipschitz: f64,
    smoothness: f64,
}

impl CostFunction {
    /// Linear cost `<beta, x>`; requires `|beta| <= lipschitz`.
    pub fn linear(beta: Vector, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(invalid(format!("Lipschitz constant must be positive, got {lipschitz}")));
        }
        let n = beta.norm();
        if !beta.is_finite() || n > lipschitz * (1.0 + 1e-12) {
            return Err(invalid(format!("linear coefficient norm {n} exceeds G = {lipschitz}")));
        }
        Ok(Self {
            kind: CostKind::Linear { beta },
            lipschitz,
            smoothness: 0.0,
        })
    }

    /// Huberized quadratic; convex, `lipschitz`-Lipschitz and `smoothness`-smooth on all of R^d.
    pub fn huber(center: Vector, smoothness: f64, lipschitz: f64) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(invalid(format!("Lipschitz constant must be positive, got {lipschitz}")));
        }
        if !(smoothness >= 0.0 && smoothness.is_finite()) {
            return Err(invalid(format!("smoothness must be nonnegative, got {smoothness}")));
        }
        if !center.is_finite() {
            return Err(invalid("Huber center is non-finite"));
        }
        Ok(Self {
            kind: CostKind::HuberQuadratic { center },
            lipschitz,
            smoothness,
        })
    }

    /// Caller-supplied function; the caller asserts membership in the declared class.
    /// `smoothness` may be `f64::INFINITY` for non-smooth functions.
    pub fn custom(
        dim: usize,
        lipschitz: f64,
        smoothness: f64,
        callback: impl Fn(&[f64], &mut [f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("custom cost dimension must be >= 1"));
        }
        if !(lipschitz > 0.0) || smoothness.is_nan() || smoothness < 0.0 {
            return Err(invalid("custom cost needs G > 0 and H >= 0"));
        }
        Ok(Self {
            kind: CostKind::Custom(CustomCost {
                dim,
                callback: Arc::new(callback),
            }),
            lipschitz,
            smoothness,
        })
    }

    pub fn kind(&self) -> &CostKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            CostKind::Linear { beta } => beta.dim(),
            CostKind::HuberQuadratic { center } => center.dim(),
            CostKind::Custom(c) => c.dim,
        }
    }

    pub fn as_linear(&self) -> Option<&Vector> {
        match &self.kind {
            CostKind::Linear { beta } => Some(beta),
            _ => None,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(invalid(format!(
                "dimension mismatch: function has d = {}, point has d = {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Exact function value.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            CostKind::Linear { beta } => dot(beta.as_slice(), x),
            CostKind::HuberQuadratic { center } => {
                let r = x
                    .iter()
                    .zip(center.as_slice())
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>()
                    .sqrt();
                huber_value(r, self.smoothness, self.lipschitz)
            }
            CostKind::Custom(c) => {
                let mut scratch = vec![0.0; c.dim];
                (c.callback)(x, &mut scratch)
            }
        }
    }

    /// Exact gradient.
    pub fn grad(&self, x: &[f64]) -> Result<Vector> {
        self.check_dim(x)?;
        let mut out = Vector::zeros(self.dim());
        self.grad_into(x, out.as_mut_slice());
        Ok(out)
    }

    pub(crate) fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            CostKind::Linear { beta } => out.copy_from_slice(beta.as_slice()),
            CostKind::HuberQuadratic { center } => {
                for ((o, a), c) in out.iter_mut().zip(x).zip(center.as_slice()) {
                    *o = a - c;
                }
                let r = norm(out);
                let (h, g) = (self.smoothness, self.lipschitz);
                // the kink itself takes the quadratic branch
                let scale = if h * r <= g { h } else { g / r };
                out.iter_mut().for_each(|v| *v *= scale);
            }
            CostKind::Custom(c) => {
                (c.callback)(x, out);
            }
        }
    }
}

fn huber_value(r: f64, h: f64, g: f64) -> f64 {
    if h * r <= g {
        0.5 * h * r * r
    } else {
        g * r - g * g / (2.0 * h)
    }
}

/// Stochastic first-order oracle: exact gradient plus isotropic Gaussian noise
/// with `E|z|^2 = sigma^2`.
pub fn noisy_grad(f: &CostFunction, x: &[f64], sigma: f64, rng: &mut RngStream) -> Result<Vector> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid(format!("noise level must be nonnegative, got {sigma}")));
    }
    let mut g = f.grad(x)?;
    if sigma > 0.0 {
        let per_coord = sigma / (g.dim() as f64).sqrt();
        for v in g.as_mut_slice() {
            *v += per_coord * rng.gaussian();
        }
    }
    Ok(g)
}

/// Which feedback a machine receives each round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    FirstOrder,
    NoisyFirstOrder,
    OnePoint,
    TwoPoint,
}

impl OracleKind {
    pub fn queries_per_round(self) -> usize {
        match self {
            OracleKind::TwoPoint => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OracleKind::FirstOrder => "first_order",
            OracleKind::NoisyFirstOrder => "noisy_first_order",
            OracleKind::OnePoint => "one_point",
            OracleKind::TwoPoint => "two_point",
        };
        f.write_str(s)
    }
}

/// What an oracle call returns. The recorded points are exactly the points
/// whose losses are charged to the machine.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleReply {
    Gradient { at: Vector, value: f64, grad: Vector },
    OneValue { value: f64, at: Vector },
    TwoValues { v1: f64, at1: Vector, v2: f64, at2: Vector },
}

impl OracleReply {
    pub fn first_order(f: &CostFunction, at: &Vector) -> Result<Self> {
        Ok(OracleReply::Gradient {
            value: f.eval(at.as_slice())?,
            grad: f.grad(at.as_slice())?,
            at: at.clone(),
        })
    }

    pub fn one_point(f: &CostFunction, at: Vector) -> Result<Self> {
        Ok(OracleReply::OneValue {
            value: f.eval(at.as_slice())?,
            at,
        })
    }

    pub fn two_point(f: &CostFunction, at1: Vector, at2: Vector) -> Result<Self> {
        Ok(OracleReply::TwoValues {
            v1: f.eval(at1.as_slice())?,
            v2: f.eval(at2.as_slice())?,
            at1,
            at2,
        })
    }

    pub fn losses(&self) -> Vec<f64> {
        match self {
            OracleReply::Gradient { value, .. } => vec![*value],
            OracleReply::OneValue { value, .. } => vec![*value],
            OracleReply::TwoValues { v1, v2, .. } => vec![*v1, *v2],
        }
    }

    pub fn points(&self) -> Vec<&Vector> {
        match self {
            OracleReply::Gradient { at, .. } => vec![at],
            OracleReply::OneValue { at, .. } => vec![at],
            OracleReply::TwoValues { at1, at2, .. } => vec![at1, at2],
        }
    }
}
