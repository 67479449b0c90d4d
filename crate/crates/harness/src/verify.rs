//! Statistical and exact checks of the building blocks, with fixed seeds.

use std::fmt;

use fedbco::adversaries::rademacher_expected_walk;
use fedbco::estimators::{one_point_estimate, two_point_estimate, ZoQuery};
use fedbco::rng::RngStream;
use fedbco::vecgeom::{lazy_potential, project_l2_ball, sample_ball, sample_unit_sphere};
use fedbco::{AdversaryKind, Algorithm, CostFunction, Result, RunConfig, RunOptions, ScheduleSpec, Vector};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            bound,
            pass: observed <= bound,
        }
    }

    fn at_least(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            bound,
            pass: observed >= bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: observed {:.6e}, bound {:.6e}", self.name, self.observed, self.bound)
    }
}

pub type Estimator = dyn Fn(&CostFunction, &Vector, f64, &mut RngStream) -> Result<ZoQuery>;

/// Largest entry of `|E[u u^T] - I/d|` over `n` uniform unit vectors.
pub fn sphere_second_moment(d: usize, n: usize, seed: u64) -> Check {
    let mut rng = RngStream::new(seed, d as u64);
    let mut acc = vec![0.0; d * d];
    for _ in 0..n {
        let u = sample_unit_sphere(&mut rng, d).expect("d >= 1");
        let u = u.as_slice();
        for i in 0..d {
            let ui = u[i];
            let row = &mut acc[i * d..i * d + d];
            for j in i..d {
                row[j] += ui * u[j];
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let target = if i == j { 1.0 / d as f64 } else { 0.0 };
            worst = worst.max((acc[i * d + j] / n as f64 - target).abs());
        }
    }
    Check::at_most(format!("sphere second moment d={d} N={n}"), worst, 0.005)
}

fn unit_linear(d: usize, g: f64, rng: &mut RngStream) -> CostFunction {
    let beta = sample_unit_sphere(rng, d).expect("d >= 1").scaled(g);
    CostFunction::linear(beta, g).expect("norm is G")
}

/// Mean of `n` estimates at the origin with `delta = B` against the true coefficient.
/// Estimates from either estimator are bounded by `d G` there, so the radius is `6 d G / sqrt(n)`.
pub fn estimator_mean(name: &str, est: &Estimator, d: usize, n: usize, seed: u64) -> Check {
    let (g, b) = (1.0, 1.0);
    let mut rng = RngStream::new(seed, 1);
    let f = unit_linear(d, g, &mut rng);
    let beta = f.as_linear().expect("linear").clone();
    let x = Vector::zeros(d);
    let mut mean = Vector::zeros(d);
    for _ in 0..n {
        let q = est(&f, &x, b, &mut rng).expect("valid inputs");
        mean.axpy(1.0 / n as f64, &q.estimate);
    }
    Check::at_most(
        format!("{name} estimator mean d={d} N={n}"),
        mean.distance(&beta),
        6.0 * d as f64 * g / (n as f64).sqrt(),
    )
}

/// Empirical `E|g - beta|^2` of the two-point estimator against `2 d G^2`.
pub fn two_point_second_moment(d: usize, n: usize, seed: u64) -> Check {
    let g = 1.0;
    let mut rng = RngStream::new(seed, 2);
    let f = unit_linear(d, g, &mut rng);
    let beta = f.as_linear().expect("linear").clone();
    let mut acc = 0.0;
    for _ in 0..n {
        let x = sample_ball(&mut rng, d, 1.0).expect("d >= 1");
        let q = two_point_estimate(&f, &x, 0.5, &mut rng).expect("valid inputs");
        acc += q.estimate.sub(&beta).norm_sq();
    }
    Check::at_most(
        format!("two-point E|g - beta|^2 d={d} N={n}"),
        acc / n as f64,
        2.0 * d as f64 * g * g,
    )
}

/// Largest one-point estimate norm over random projected centers with `delta = B`.
pub fn one_point_norm(d: usize, n: usize, seed: u64) -> Check {
    let (g, b) = (1.0, 1.0);
    let mut rng = RngStream::new(seed, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let beta = sample_ball(&mut rng, d, g).expect("d >= 1");
        let f = CostFunction::linear(beta, g).expect("inside ball");
        let x = sample_ball(&mut rng, d, 3.0 * b).expect("d >= 1");
        let w = project_l2_ball(&x, b).expect("finite");
        let q = one_point_estimate(&f, &w, b, &mut rng).expect("valid inputs");
        worst = worst.max(q.estimate.norm());
    }
    Check::at_most(format!("one-point |g| with delta=B d={d} N={n}"), worst, 2.0 * d as f64 * g)
}

/// Smallest `D(x*, y) - |x* - Proj(y)|^2 / 2` over random pairs; must be nonnegative.
pub fn potential_inequality(d: usize, pairs: usize, seed: u64) -> Check {
    let b = 1.0;
    let mut rng = RngStream::new(seed, 4);
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let x = sample_ball(&mut rng, d, b).expect("d >= 1");
        let y = sample_ball(&mut rng, d, 4.0 * b).expect("d >= 1");
        let pot = lazy_potential(&x, &y, b).expect("valid inputs");
        let proj = project_l2_ball(&y, b).expect("finite");
        worst = worst.min(pot - 0.5 * x.distance(&proj).powi(2));
    }
    Check::at_least(format!("lazy potential inequality d={d} pairs={pairs}"), worst, -1e-12)
}

/// Exact `E|S_T|` against `sqrt(T)/2`.
pub fn rademacher(t: usize) -> Check {
    let walk = rademacher_expected_walk(t).expect("T in 1..=20");
    Check::at_least(format!("Rademacher E|S_T| T={t}"), walk, (t as f64).sqrt() / 2.0)
}

/// Round-averaged consensus of noisy first-order federated descent against
/// `1.5 * 2 eta (sigma sqrt(K) + zeta K)`.
pub fn consensus(k: usize, zeta: f64, seed: u64) -> Result<Check> {
    let sigma = 1.0;
    let cfg = RunConfig {
        machines: 4,
        local_steps: k,
        rounds: 32,
        dim: 8,
        lipschitz_g: 1.0,
        radius_b: 1.0,
        zeta,
        algorithm: Algorithm::FedOsgdFirstOrder { sigma },
        oracle: None,
        adversary: AdversaryKind::StochasticLinear { mean_scale: 0.0 },
        schedule: ScheduleSpec::Auto,
        seed,
        options: RunOptions::default(),
    };
    let ledger = fedbco::run(&cfg)?;
    let eta = ledger.schedule.eta;
    let bound = 1.5 * 2.0 * eta * (sigma * (k as f64).sqrt() + zeta * k as f64);
    Ok(Check::at_most(
        format!("consensus K={k} zeta={zeta}"),
        ledger.consensus_mean(),
        bound,
    ))
}

/// Sample sizes for [`run_all`].
#[derive(Clone, Copy, Debug)]
pub struct VerifySizes {
    pub sphere: usize,
    pub estimator: usize,
    pub pairs: usize,
}

impl Default for VerifySizes {
    fn default() -> Self {
        Self {
            sphere: 1_000_000,
            estimator: 200_000,
            pairs: 100_000,
        }
    }
}

/// The full suite.
pub fn run_all(sizes: VerifySizes) -> Vec<Check> {
    let seed = 20_240_601;
    let mut checks = Vec::new();
    for d in [2, 8, 64] {
        checks.push(sphere_second_moment(d, sizes.sphere, seed));
    }
    let one: &Estimator = &|f, x, delta, rng| one_point_estimate(f, x, delta, rng);
    let two: &Estimator = &|f, x, delta, rng| two_point_estimate(f, x, delta, rng);
    for d in [2, 8, 64] {
        checks.push(estimator_mean("one-point", one, d, sizes.estimator, seed));
        checks.push(estimator_mean("two-point", two, d, sizes.estimator, seed));
        checks.push(two_point_second_moment(d, sizes.estimator, seed));
        checks.push(one_point_norm(d, sizes.estimator, seed));
    }
    for d in [1, 3, 16] {
        checks.push(potential_inequality(d, sizes.pairs, seed));
    }
    for t in 1..=16 {
        checks.push(rademacher(t));
    }
    for k in [4, 16] {
        for zeta in [0.0, 0.5] {
            match consensus(k, zeta, seed) {
                Ok(c) => checks.push(c),
                Err(e) => checks.push(Check {
                    name: format!("consensus K={k} zeta={zeta}: {e}"),
                    observed: f64::NAN,
                    bound: f64::NAN,
                    pass: false,
                }),
            }
        }
    }
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rademacher_lines() {
        for t in 1..=16 {
            assert!(rademacher(t).pass);
        }
        assert_eq!(rademacher(4).observed, 1.5);
    }

    #[test]
    fn negated_direction_breaks_unbiasedness() {
        let tampered: &Estimator = &|f, x, delta, rng| {
            let mut q = two_point_estimate(f, x, delta, rng)?;
            q.estimate.scale_mut(-1.0);
            Ok(q)
        };
        assert!(!estimator_mean("tampered", tampered, 8, 20_000, 3).pass);
        let honest: &Estimator = &|f, x, delta, rng| two_point_estimate(f, x, delta, rng);
        assert!(estimator_mean("two-point", honest, 8, 20_000, 3).pass);
    }

    #[test]
    fn small_suite_passes() {
        let checks = run_all(VerifySizes {
            sphere: 200_000,
            estimator: 20_000,
            pairs: 10_000,
        });
        for c in &checks {
            assert!(c.pass, "{c}");
        }
    }
}
