//! Adversaries: per-round, per-machine cost-function generators that respect
//! a first-order heterogeneity budget `zeta`.
//!
//! Linear adversaries emit `beta_t^m = s_t + Delta_t^m` where `s_t` is a shared
//! component of norm at most `G - zeta'` and the offsets satisfy
//! `sum_m Delta_t^m = 0`, `max_m |Delta_t^m| <= zeta'`, with `zeta' = min(zeta, G)`.
//! Hence `|beta_t^m| <= G` and the heterogeneity
//! `(1/M) sum_m |beta_t^m - mean_t|^2 <= zeta'^2` holds exactly at every round.

use serde::{Deserialize, Serialize};

use crate::error::{config, invalid, Error, Result};
use crate::oracles::CostFunction;
use crate::rng::{tags, RngStream};
use crate::vecgeom::{fill_unit_sphere, Vector};

/// How the adaptive adversary chooses per-machine offsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OffsetRule {
    /// Offsets drawn once at construction.
    Frozen,
    /// Offsets point along each machine's deviation from the previous round's
    /// mean model, falling back to the frozen offsets when all deviations vanish.
    #[default]
    Targeted,
}

/// Shared component of the adaptive adversary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SharedRule {
    /// Full radius, aligned with the previous round's mean model.
    #[default]
    TrackMean,
    /// Full radius, uniform on the sphere, independent of the history.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Oblivious: shared component `r (a mu + (1 - a) u_t)` with `mu` a fixed unit
    /// vector, `u_t` uniform on the sphere and `a = mean_scale` in `[0, 1]`.
    StochasticLinear {
        #[serde(default)]
        mean_scale: f64,
    },
    /// History-dependent linear costs; see [`SharedRule`] and [`OffsetRule`].
    AdaptiveLinear {
        #[serde(default)]
        shared: SharedRule,
        #[serde(default)]
        offsets: OffsetRule,
    },
    /// Oblivious Huberized quadratics centred at `center_norm * mu + spread * u_t`
    /// plus zero-sum per-machine center shifts.
    StochasticHuber {
        smoothness: f64,
        center_norm: f64,
        #[serde(default)]
        spread: f64,
    },
    /// Shared component `(r / sqrt d) * Unif({-1, +1}^d)`.
    RademacherLinear,
}

impl AdversaryKind {
    pub fn name(&self) -> &'static str {
        match self {
            AdversaryKind::StochasticLinear { .. } => "stochastic_linear",
            AdversaryKind::AdaptiveLinear { .. } => "adaptive_linear",
            AdversaryKind::StochasticHuber { .. } => "stochastic_huber",
            AdversaryKind::RademacherLinear => "rademacher_linear",
        }
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, AdversaryKind::StochasticHuber { .. })
    }

    pub fn is_oblivious(&self) -> bool {
        !matches!(self, AdversaryKind::AdaptiveLinear { .. })
    }
}

/// Played models and emitted functions of past rounds. Append-only.
#[derive(Clone, Debug)]
pub struct History {
    machines: usize,
    rounds: usize,
    keep_models: bool,
    /// All rounds when `keep_models`, otherwise only the latest.
    models: Vec<Vec<Vector>>,
    functions: Vec<Vec<CostFunction>>,
}

impl History {
    pub fn new(machines: usize, keep_models: bool) -> Self {
        Self {
            machines,
            rounds: 0,
            keep_models,
            models: Vec::new(),
            functions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rounds
    }

    pub fn is_empty(&self) -> bool {
        self.rounds == 0
    }

    pub fn machines(&self) -> usize {
        self.machines
    }

    pub fn push(&mut self, models: Vec<Vector>, functions: Vec<CostFunction>) -> Result<()> {
        if models.len() != self.machines || functions.len() != self.machines {
            return Err(invalid(format!(
                "history round needs {} models and functions, got {} and {}",
                self.machines,
                models.len(),
                functions.len()
            )));
        }
        if !self.keep_models {
            self.models.clear();
        }
        self.models.push(models);
        self.functions.push(functions);
        self.rounds += 1;
        Ok(())
    }

    /// Models played in round `t`, if still retained.
    pub fn models(&self, t: usize) -> Option<&[Vector]> {
        if t >= self.rounds {
            return None;
        }
        let offset = self.rounds - self.models.len();
        t.checked_sub(offset).map(|i| self.models[i].as_slice())
    }

    pub fn last_models(&self) -> Option<&[Vector]> {
        self.rounds.checked_sub(1).and_then(|t| self.models(t))
    }

    pub fn functions(&self) -> &[Vec<CostFunction>] {
        &self.functions
    }

    pub fn into_functions(self) -> Vec<Vec<CostFunction>> {
        self.functions
    }

    /// Copy of the first `t` rounds. Requires retained models.
    pub fn truncated(&self, t: usize) -> Result<History> {
        if !self.keep_models && t > 0 && t != self.rounds {
            return Err(invalid("cannot truncate a history that drops old models"));
        }
        let t = t.min(self.rounds);
        let models = if self.keep_models {
            self.models[..t].to_vec()
        } else {
            self.models.clone()
        };
        Ok(History {
            machines: self.machines,
            rounds: t,
            keep_models: self.keep_models,
            models: if t == 0 { Vec::new() } else { models },
            functions: self.functions[..t].to_vec(),
        })
    }
}

/// Declarative adversary description; [`AdversarySpec::build`] validates it.
#[derive(Clone, Debug, PartialEq)]
pub struct AdversarySpec {
    pub kind: AdversaryKind,
    pub lipschitz: f64,
    pub zeta: f64,
    pub dim: usize,
    pub machines: usize,
    pub seed: u64,
}

impl AdversarySpec {
    pub fn build(&self) -> Result<Adversary> {
        Adversary::new(self.clone())
    }
}

#[derive(Clone, Debug)]
pub struct Adversary {
    spec: AdversarySpec,
    shared_radius: f64,
    offset_radius: f64,
    offsets: Vec<Vector>,
    mean_dir: Vector,
}

impl Adversary {
    pub fn new(spec: AdversarySpec) -> Result<Self> {
        let AdversarySpec {
            ref kind,
            lipschitz: g,
            zeta,
            dim,
            machines,
            seed,
        } = spec;
        if dim == 0 || machines == 0 {
            return Err(config("dimension and machine count must be >= 1"));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(config(format!("G must be positive, got {g}")));
        }
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return Err(config(format!("zeta must be nonnegative, got {zeta}")));
        }
        if zeta > 2.0 * g {
            return Err(config(format!("zeta = {zeta} exceeds 2G = {}", 2.0 * g)));
        }
        let mut setup = RngStream::derive(seed, &[tags::ADVERSARY_SETUP]);
        let mut mean_dir = Vector::zeros(dim);
        fill_unit_sphere(&mut setup, mean_dir.as_mut_slice());

        let (shared_radius, offset_radius) = match *kind {
            AdversaryKind::StochasticLinear { mean_scale } => {
                if !(0.0..=1.0).contains(&mean_scale) {
                    return Err(config(format!("mean_scale must lie in [0, 1], got {mean_scale}")));
                }
                linear_radii(g, zeta, machines)
            }
            AdversaryKind::AdaptiveLinear { .. } | AdversaryKind::RademacherLinear => {
                linear_radii(g, zeta, machines)
            }
            AdversaryKind::StochasticHuber {
                smoothness,
                center_norm,
                spread,
            } => {
                if !(smoothness >= 0.0 && smoothness.is_finite()) {
                    return Err(config("Huber smoothness must be nonnegative"));
                }
                if !(center_norm >= 0.0 && spread >= 0.0 && center_norm.is_finite() && spread.is_finite()) {
                    return Err(config("Huber center_norm and spread must be nonnegative"));
                }
                // gradient maps of equal-shape Huber functions are H-Lipschitz in the center
                let shift = if smoothness > 0.0 && machines > 1 {
                    zeta / smoothness
                } else {
                    0.0
                };
                (0.0, shift)
            }
        };
        let offsets = zero_sum_offsets(&mut setup, machines, dim, offset_radius);
        Ok(Self {
            spec,
            shared_radius,
            offset_radius,
            offsets,
            mean_dir,
        })
    }

    pub fn spec(&self) -> &AdversarySpec {
        &self.spec
    }

    /// Norm budget of the shared component (linear kinds).
    pub fn shared_radius(&self) -> f64 {
        self.shared_radius
    }

    /// Upper bound on the heterogeneity realized at any round.
    pub fn realized_zeta(&self) -> f64 {
        match self.spec.kind {
            AdversaryKind::StochasticHuber { smoothness, .. } => smoothness * rms(&self.offsets),
            AdversaryKind::AdaptiveLinear {
                offsets: OffsetRule::Targeted,
                ..
            } => self.offset_radius,
            _ => rms(&self.offsets),
        }
    }

    pub fn frozen_offsets(&self) -> &[Vector] {
        &self.offsets
    }

    /// Functions `{f_t^m}` for round `t`. `hist` must hold exactly rounds `0..t`.
    pub fn emit_round(&self, t: usize, hist: &History) -> Result<Vec<CostFunction>> {
        if hist.len() != t {
            return Err(Error::Invariant(format!(
                "adversary asked for round {t} with {} rounds of history",
                hist.len()
            )));
        }
        let AdversarySpec {
            lipschitz: g,
            dim,
            machines,
            seed,
            ..
        } = self.spec;
        let mut rng = RngStream::derive(seed, &[tags::ADVERSARY_ROUND, t as u64]);
        let r = self.shared_radius;
        match self.spec.kind {
            AdversaryKind::StochasticLinear { mean_scale } => {
                let mut u = Vector::zeros(dim);
                fill_unit_sphere(&mut rng, u.as_mut_slice());
                let mut shared = self.mean_dir.scaled(r * mean_scale);
                shared.axpy(r * (1.0 - mean_scale), &u);
                self.linear_round(&shared, &self.offsets, g)
            }
            AdversaryKind::RademacherLinear => {
                let scale = r / (dim as f64).sqrt();
                let shared = Vector::from_fn(dim, |_| scale * rng.sign());
                self.linear_round(&shared, &self.offsets, g)
            }
            AdversaryKind::AdaptiveLinear { shared, offsets } => {
                let last = hist.last_models();
                let shared = match (shared, last.and_then(|ms| Vector::mean(ms.iter()))) {
                    (SharedRule::Random, _) => {
                        let mut u = Vector::zeros(dim);
                        fill_unit_sphere(&mut rng, u.as_mut_slice());
                        u.scaled(r)
                    }
                    (SharedRule::TrackMean, Some(mean)) if mean.norm() > 0.0 => mean.scaled(r / mean.norm()),
                    // degenerate history: fixed first-coordinate direction
                    _ => Vector::basis(dim, 0, r),
                };
                match (offsets, last) {
                    (OffsetRule::Targeted, Some(ms)) if machines > 1 => {
                        let targeted = targeted_offsets(ms, self.offset_radius);
                        let chosen = targeted.as_deref().unwrap_or(&self.offsets);
                        self.linear_round(&shared, chosen, g)
                    }
                    _ => self.linear_round(&shared, &self.offsets, g),
                }
            }
            AdversaryKind::StochasticHuber {
                smoothness,
                center_norm,
                spread,
            } => {
                let mut u = Vector::zeros(dim);
                fill_unit_sphere(&mut rng, u.as_mut_slice());
                let mut center = self.mean_dir.scaled(center_norm);
                center.axpy(spread, &u);
                self.offsets
                    .iter()
                    .map(|off| CostFunction::huber(center.add(off), smoothness, g))
                    .collect()
            }
        }
    }

    fn linear_round(&self, shared: &Vector, offsets: &[Vector], g: f64) -> Result<Vec<CostFunction>> {
        offsets
            .iter()
            .map(|off| {
                let mut beta = shared.add(off);
                // rounding guard: the construction bounds the norm by G exactly
                let n = beta.norm();
                if n > g {
                    beta.scale_mut(g / n);
                }
                CostFunction::linear(beta, g)
            })
            .collect()
    }
}

fn linear_radii(g: f64, zeta: f64, machines: usize) -> (f64, f64) {
    let offset = if machines > 1 { zeta.min(g) } else { 0.0 };
    ((g - offset).max(0.0), offset)
}

fn rms(vs: &[Vector]) -> f64 {
    if vs.is_empty() {
        return 0.0;
    }
    (vs.iter().map(Vector::norm_sq).sum::<f64>() / vs.len() as f64).sqrt()
}

/// Offsets with zero sum, maximum norm `radius` and, when the geometry allows,
/// equal norms (so the root-mean-square is exactly `radius`).
fn zero_sum_offsets(rng: &mut RngStream, machines: usize, dim: usize, radius: f64) -> Vec<Vector> {
    if machines == 1 || radius == 0.0 {
        return vec![Vector::zeros(dim); machines];
    }
    if dim == 1 {
        // alternate signs; an odd machine out sits at zero
        let paired = machines - machines % 2;
        return (0..machines)
            .map(|m| {
                let v = if m >= paired {
                    0.0
                } else if m % 2 == 0 {
                    radius
                } else {
                    -radius
                };
                Vector::from(vec![v])
            })
            .collect();
    }
    // points evenly spaced on a circle in a random 2-plane
    let mut a = Vector::zeros(dim);
    fill_unit_sphere(rng, a.as_mut_slice());
    let mut b = Vector::zeros(dim);
    loop {
        fill_unit_sphere(rng, b.as_mut_slice());
        let proj = a.dot(&b);
        b.axpy(-proj, &a);
        let n = b.norm();
        if n > 1e-6 {
            b.scale_mut(1.0 / n);
            break;
        }
    }
    let mut offsets: Vec<Vector> = (0..machines)
        .map(|m| {
            let theta = 2.0 * std::f64::consts::PI * m as f64 / machines as f64;
            let mut v = a.scaled(radius * theta.cos());
            v.axpy(radius * theta.sin(), &b);
            v
        })
        .collect();
    recenter(&mut offsets);
    offsets
}

/// Remove the mean so the offsets sum to zero up to rounding.
fn recenter(offsets: &mut [Vector]) {
    if let Some(mean) = Vector::mean(offsets.iter()) {
        for v in offsets.iter_mut() {
            v.axpy(-1.0, &mean);
        }
    }
}

fn targeted_offsets(models: &[Vector], radius: f64) -> Option<Vec<Vector>> {
    if radius == 0.0 {
        return None;
    }
    let mean = Vector::mean(models.iter())?;
    let deviations: Vec<Vector> = models.iter().map(|x| x.sub(&mean)).collect();
    let max = deviations.iter().map(Vector::norm).fold(0.0, f64::max);
    if !(max > 0.0) {
        return None;
    }
    Some(deviations.iter().map(|v| v.scaled(radius / max)).collect())
}

/// `(1/M) sum_m |beta^m - mean|^2` for one round of linear functions, square-rooted.
pub fn linear_heterogeneity(functions: &[CostFunction]) -> Option<f64> {
    let betas: Vec<&Vector> = functions.iter().map(CostFunction::as_linear).collect::<Option<_>>()?;
    let mean = Vector::mean(betas.iter().copied())?;
    let msq = betas.iter().map(|b| b.sub(&mean).norm_sq()).sum::<f64>() / betas.len() as f64;
    Some(msq.sqrt())
}

/// Gradient heterogeneity of one round of functions at a point.
pub fn heterogeneity_at(functions: &[CostFunction], x: &Vector) -> Result<f64> {
    let grads = functions
        .iter()
        .map(|f| f.grad(x.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    let mean = Vector::mean(grads.iter()).ok_or_else(|| invalid("empty round"))?;
    let msq = grads.iter().map(|g| g.sub(&mean).norm_sq()).sum::<f64>() / grads.len() as f64;
    Ok(msq.sqrt())
}

/// `E|sum_{t<=T} u_t|` over uniform signs, by exhaustive enumeration of all `2^T` patterns.
pub fn rademacher_expected_walk(horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(invalid("horizon must be >= 1"));
    }
    if horizon > 20 {
        return Err(invalid(format!("refusing to enumerate 2^{horizon} sign patterns (max 2^20)")));
    }
    let patterns = 1u64 << horizon;
    let total: u64 = (0..patterns)
        .map(|mask| {
            let plus = mask.count_ones() as i64;
            (2 * plus - horizon as i64).unsigned_abs()
        })
        .sum();
    Ok(total as f64 / patterns as f64)
}

/// `F_* = (1/T) sum_t f_t(x_star)` with `f_t` the machine-average function.
pub fn fstar_of_run(functions: &[Vec<CostFunction>], x_star: &Vector) -> Result<f64> {
    if functions.is_empty() {
        return Err(invalid("no rounds"));
    }
    let mut total = 0.0;
    for round in functions {
        let mut avg = 0.0;
        for f in round {
            avg += f.eval(x_star.as_slice())?;
        }
        total += avg / round.len() as f64;
    }
    Ok(total / functions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: AdversaryKind, zeta: f64, dim: usize, machines: usize) -> AdversarySpec {
        AdversarySpec {
            kind,
            lipschitz: 1.0,
            zeta,
            dim,
            machines,
            seed: 11,
        }
    }

    fn stoch(mean_scale: f64) -> AdversaryKind {
        AdversaryKind::StochasticLinear { mean_scale }
    }

    fn betas(fs: &[CostFunction]) -> Vec<Vector> {
        fs.iter().map(|f| f.as_linear().unwrap().clone()).collect()
    }

    #[test]
    fn zero_zeta_gives_identical_machines() {
        let adv = spec(stoch(0.0), 0.0, 5, 4).build().unwrap();
        let mut hist = History::new(4, false);
        for t in 0..20 {
            let fs = adv.emit_round(t, &hist).unwrap();
            let bs = betas(&fs);
            assert!(bs.iter().all(|b| b == &bs[0]));
            hist.push(vec![Vector::zeros(5); 4], fs).unwrap();
        }
    }

    #[test]
    fn two_machine_offsets_in_one_dimension() {
        let adv = spec(stoch(1.0), 0.2, 1, 2).build().unwrap();
        let offs = adv.frozen_offsets();
        assert_eq!(offs[0][0], 0.2);
        assert_eq!(offs[1][0], -0.2);
        let fs = adv.emit_round(0, &History::new(2, false)).unwrap();
        let het = linear_heterogeneity(&fs).unwrap();
        assert!((het * het - 0.04).abs() < 1e-15);
    }

    #[test]
    fn heterogeneity_identity_and_norm_bound() {
        for &(d, m, zeta) in &[(1, 3, 0.5), (2, 3, 0.7), (8, 4, 1.0), (16, 5, 1.6), (3, 2, 2.0)] {
            let adv = spec(stoch(0.3), zeta, d, m).build().unwrap();
            let hist = History::new(m, false);
            let fs = adv.emit_round(0, &hist).unwrap();
            let target = adv.realized_zeta();
            assert!(target <= zeta + 1e-12);
            let het = linear_heterogeneity(&fs).unwrap();
            assert!((het - target).abs() < 1e-12, "d={d} m={m}: {het} vs {target}");
            for b in betas(&fs) {
                assert!(b.norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_excess_heterogeneity() {
        assert!(spec(stoch(0.0), 2.1, 3, 2).build().is_err());
        assert!(spec(stoch(0.0), -0.1, 3, 2).build().is_err());
        assert!(spec(stoch(1.5), 0.0, 3, 2).build().is_err());
    }

    #[test]
    fn stochastic_is_oblivious() {
        let adv = spec(stoch(0.5), 0.3, 6, 3).build().unwrap();
        let mut h1 = History::new(3, false);
        let mut h2 = History::new(3, false);
        for t in 0..10 {
            let a = adv.emit_round(t, &h1).unwrap();
            let b = adv.emit_round(t, &h2).unwrap();
            assert_eq!(betas(&a), betas(&b));
            h1.push(vec![Vector::basis(6, 1, t as f64); 3], a).unwrap();
            h2.push(vec![Vector::basis(6, 2, -(t as f64)); 3], b).unwrap();
        }
    }

    #[test]
    fn adaptive_degenerate_history_uses_first_axis() {
        let adv = spec(AdversaryKind::AdaptiveLinear { shared: SharedRule::TrackMean, offsets: OffsetRule::Frozen }, 0.0, 3, 2)
            .build()
            .unwrap();
        let fs = adv.emit_round(0, &History::new(2, true)).unwrap();
        assert_eq!(betas(&fs)[0], Vector::basis(3, 0, 1.0));
    }

    #[test]
    fn adaptive_targets_previous_mean() {
        let adv = spec(AdversaryKind::AdaptiveLinear { shared: SharedRule::TrackMean, offsets: OffsetRule::Frozen }, 0.0, 2, 2)
            .build()
            .unwrap();
        let mut hist = History::new(2, true);
        let f0 = adv.emit_round(0, &hist).unwrap();
        let models = vec![Vector::from(vec![0.0, 2.0]), Vector::from(vec![0.0, 4.0])];
        hist.push(models, f0).unwrap();
        let f1 = adv.emit_round(1, &hist).unwrap();
        assert_eq!(betas(&f1)[0], Vector::from(vec![0.0, 1.0]));
    }

    #[test]
    fn adaptive_reads_only_past_rounds() {
        for rule in [OffsetRule::Frozen, OffsetRule::Targeted] {
            let adv = spec(AdversaryKind::AdaptiveLinear { shared: SharedRule::TrackMean, offsets: rule }, 0.5, 4, 3)
                .build()
                .unwrap();
            let mut hist = History::new(3, true);
            let mut rng = RngStream::new(1, 2);
            let mut emitted = Vec::new();
            for t in 0..8 {
                let fs = adv.emit_round(t, &hist).unwrap();
                emitted.push(betas(&fs));
                let models = (0..3)
                    .map(|_| Vector::from_fn(4, |_| rng.gaussian()))
                    .collect();
                hist.push(models, fs).unwrap();
            }
            for t in 0..8 {
                let cut = hist.truncated(t).unwrap();
                assert_eq!(betas(&adv.emit_round(t, &cut).unwrap()), emitted[t]);
            }
        }
    }

    #[test]
    fn targeted_offsets_respect_budget() {
        let adv = spec(AdversaryKind::AdaptiveLinear { shared: SharedRule::TrackMean, offsets: OffsetRule::Targeted }, 0.8, 5, 4)
            .build()
            .unwrap();
        let mut hist = History::new(4, false);
        let mut rng = RngStream::new(3, 3);
        for t in 0..30 {
            let fs = adv.emit_round(t, &hist).unwrap();
            assert!(linear_heterogeneity(&fs).unwrap() <= 0.8 + 1e-12);
            for b in betas(&fs) {
                assert!(b.norm() <= 1.0 + 1e-12);
            }
            let models = (0..4).map(|_| Vector::from_fn(5, |_| rng.gaussian())).collect();
            hist.push(models, fs).unwrap();
        }
    }

    #[test]
    fn emit_requires_matching_history() {
        let adv = spec(stoch(0.0), 0.0, 2, 1).build().unwrap();
        assert!(adv.emit_round(3, &History::new(1, false)).is_err());
    }

    #[test]
    fn huber_heterogeneity_bounded_everywhere() {
        let kind = AdversaryKind::StochasticHuber {
            smoothness: 2.0,
            center_norm: 0.5,
            spread: 0.2,
        };
        let adv = spec(kind, 0.6, 3, 4).build().unwrap();
        let fs = adv.emit_round(0, &History::new(4, false)).unwrap();
        let mut rng = RngStream::new(7, 7);
        for _ in 0..2000 {
            let x = Vector::from_fn(3, |_| 2.0 * rng.gaussian());
            assert!(heterogeneity_at(&fs, &x).unwrap() <= 0.6 + 1e-12);
        }
    }

    #[test]
    fn rademacher_walk_values() {
        assert_eq!(rademacher_expected_walk(1).unwrap(), 1.0);
        assert_eq!(rademacher_expected_walk(2).unwrap(), 1.0);
        assert_eq!(rademacher_expected_walk(4).unwrap(), 1.5);
        for t in 1..=20 {
            assert!(rademacher_expected_walk(t).unwrap() >= (t as f64).sqrt() / 2.0);
        }
        assert!(rademacher_expected_walk(21).is_err());
        assert!(rademacher_expected_walk(0).is_err());
    }

    #[test]
    fn fstar_examples() {
        let beta = Vector::from(vec![0.6, 0.8]);
        let f = CostFunction::linear(beta.clone(), 1.0).unwrap();
        let x_star = beta.scaled(-2.0);
        let fs = vec![vec![f.clone()], vec![f]];
        assert!((fstar_of_run(&fs, &x_star).unwrap() + 2.0).abs() < 1e-15);

        let f1 = CostFunction::linear(Vector::from(vec![1.0, 0.0]), 1.0).unwrap();
        let f2 = CostFunction::linear(Vector::from(vec![-1.0, 0.0]), 1.0).unwrap();
        let x = Vector::from(vec![0.3, 0.4]);
        assert_eq!(fstar_of_run(&[vec![f1], vec![f2]], &x).unwrap(), 0.0);
    }

    #[test]
    fn fstar_matches_recomputation() {
        let adv = spec(stoch(0.2), 0.4, 4, 3).build().unwrap();
        let mut hist = History::new(3, false);
        for t in 0..50 {
            let fs = adv.emit_round(t, &hist).unwrap();
            hist.push(vec![Vector::zeros(4); 3], fs).unwrap();
        }
        let x = Vector::from(vec![0.1, -0.2, 0.3, 0.0]);
        let direct: f64 = hist
            .functions()
            .iter()
            .flatten()
            .map(|f| f.as_linear().unwrap().dot(&x))
            .sum::<f64>()
            / (50.0 * 3.0);
        assert!((fstar_of_run(hist.functions(), &x).unwrap() - direct).abs() < 1e-10);
    }
}
