//! The round loop, hindsight comparators and the regret ledger.

use serde::{Deserialize, Serialize};

use crate::adversaries::{AdversaryKind, AdversarySpec, History};
use crate::algorithms::{communicate, consensus_distance, Algorithm, MachineState};
use crate::error::{config, invalid, Error, Result};
use crate::oracles::{CostFunction, OracleKind};
use crate::rng::{tags, RngStream};
use crate::schedule::{
    schedule_lemma1, schedule_lemma2, schedule_theorem3, schedule_theorem3_printed, schedule_theorem4,
    schedule_theorem5, Dims, Schedule, SmoothInputs,
};
use crate::vecgeom::{project_l2_ball, sample_ball, Vector};

/// How the step size and smoothing radius are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// The schedule matching the algorithm's feedback model.
    #[default]
    Auto,
    Theorem3,
    /// The `sqrt(M)/(dB)` variant of the one-point step size.
    Theorem3Printed,
    Theorem4,
    Theorem5 {
        #[serde(default)]
        smoothness: f64,
        #[serde(default)]
        fstar: Option<f64>,
    },
    Lemma1,
    Lemma2 {
        #[serde(default)]
        smoothness: f64,
        #[serde(default)]
        fstar: Option<f64>,
    },
    Manual {
        eta: f64,
        #[serde(default)]
        delta: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    /// Keep every queried point in the ledger (needed for [`RegretLedger::audit`]).
    pub record_queries: bool,
    /// Keep every emitted function in the ledger.
    pub keep_functions: bool,
    /// Random feasible points checked against the convex comparator.
    pub comparator_probes: usize,
    /// Suboptimality tolerance of the convex comparator; `None` means `1e-8 G B`.
    pub comparator_tol: Option<f64>,
    pub comparator_max_iter: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            record_queries: false,
            keep_functions: false,
            comparator_probes: 1000,
            comparator_tol: None,
            comparator_max_iter: 100_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub machines: usize,
    pub local_steps: usize,
    pub rounds: usize,
    pub dim: usize,
    pub lipschitz_g: f64,
    pub radius_b: f64,
    pub zeta: f64,
    pub algorithm: Algorithm,
    /// Feedback model; defaults to the one the algorithm consumes.
    #[serde(default)]
    pub oracle: Option<OracleKind>,
    pub adversary: AdversaryKind,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub seed: u64,
    #[serde(default)]
    pub options: RunOptions,
}

impl RunConfig {
    pub fn horizon(&self) -> usize {
        self.local_steps * self.rounds
    }

    pub fn validate(&self) -> Result<()> {
        if self.machines == 0 || self.local_steps == 0 || self.rounds == 0 || self.dim == 0 {
            return Err(config("machines, local_steps, rounds and dim must all be >= 1"));
        }
        if !(self.lipschitz_g > 0.0 && self.lipschitz_g.is_finite()) {
            return Err(config(format!("lipschitz_g must be positive, got {}", self.lipschitz_g)));
        }
        if !(self.radius_b > 0.0 && self.radius_b.is_finite()) {
            return Err(config(format!("radius_b must be positive, got {}", self.radius_b)));
        }
        if !(self.zeta >= 0.0 && self.zeta <= 2.0 * self.lipschitz_g) {
            return Err(config(format!("zeta = {} must lie in [0, 2G]", self.zeta)));
        }
        let oracle = self.oracle.unwrap_or(self.algorithm.oracle());
        self.algorithm.check_oracle(oracle)?;
        if let AdversaryKind::StochasticHuber { smoothness, .. } = self.adversary {
            if smoothness == 0.0 && self.zeta > 0.0 && self.machines > 1 {
                return Err(config("a flat Huber adversary cannot realize positive heterogeneity"));
            }
        }
        Ok(())
    }

    pub fn adversary_spec(&self) -> AdversarySpec {
        AdversarySpec {
            kind: self.adversary.clone(),
            lipschitz: self.lipschitz_g,
            zeta: self.zeta,
            dim: self.dim,
            machines: self.machines,
            seed: self.seed,
        }
    }

    /// Dimensions the schedule sees: a non-communicating learner is a single machine over `T` steps.
    pub fn schedule_dims(&self) -> Dims {
        let (m, k, r) = if self.algorithm.is_federated() {
            (self.machines, self.local_steps, self.rounds)
        } else {
            (1, 1, self.horizon())
        };
        Dims::new(self.lipschitz_g, self.radius_b, m, k, r, self.dim)
    }

    fn needs_pilot(&self) -> bool {
        matches!(
            self.schedule,
            ScheduleSpec::Theorem5 { smoothness, fstar: None } | ScheduleSpec::Lemma2 { smoothness, fstar: None }
                if smoothness > 0.0
        )
    }

    /// Resolve the schedule; `fstar` overrides a missing `F*`.
    pub fn resolve_schedule(&self, fstar: Option<f64>) -> Result<Schedule> {
        let dims = self.schedule_dims();
        let sigma = self.algorithm.oracle_sigma(self.dim, self.lipschitz_g);
        let sched = match &self.schedule {
            ScheduleSpec::Auto => match self.algorithm {
                Algorithm::Ncogd | Algorithm::FedOsgdFirstOrder { .. } => schedule_lemma1(&dims, sigma)?,
                Algorithm::NcogdOnePoint | Algorithm::FedPosgd => schedule_theorem3(&dims, self.zeta)?,
                Algorithm::NcogdTwoPoint | Algorithm::FedOsgd => schedule_theorem4(&dims)?,
            },
            ScheduleSpec::Theorem3 => schedule_theorem3(&dims, self.zeta)?,
            ScheduleSpec::Theorem3Printed => schedule_theorem3_printed(&dims, self.zeta)?,
            ScheduleSpec::Theorem4 => schedule_theorem4(&dims)?,
            ScheduleSpec::Theorem5 { smoothness, fstar: fs } => {
                schedule_theorem5(&dims, *smoothness, fs.or(fstar), self.zeta)?
            }
            ScheduleSpec::Lemma1 => schedule_lemma1(&dims, sigma)?,
            ScheduleSpec::Lemma2 { smoothness, fstar: fs } => schedule_lemma2(
                &dims,
                &SmoothInputs {
                    h: *smoothness,
                    fstar: fs.or(fstar),
                    sigma,
                    zeta: self.zeta,
                },
            )?,
            ScheduleSpec::Manual { eta, delta } => Schedule::manual(*eta, *delta)?,
        };
        if self.algorithm.is_zeroth_order() && !(sched.delta > 0.0) {
            return Err(config(format!(
                "{} needs a positive smoothing radius; the {} schedule gives {}",
                self.algorithm, sched.source, sched.delta
            )));
        }
        Ok(sched)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegretLedger {
    pub algorithm: String,
    pub adversary: String,
    pub machines: usize,
    pub local_steps: usize,
    pub rounds: usize,
    pub horizon: usize,
    pub dim: usize,
    pub lipschitz_g: f64,
    pub radius_b: f64,
    pub zeta: f64,
    pub seed: u64,
    pub schedule: Schedule,
    /// `F*` estimated by a pilot pass when the schedule needed one.
    pub pilot_fstar: Option<f64>,
    pub queries_per_round: usize,
    /// Losses at queried points, laid out `[t][m][j]`.
    pub losses: Vec<f64>,
    pub incurred_total: f64,
    pub comparator: Vector,
    /// `sum_t sum_m f_t^m(x*)`.
    pub comparator_total: f64,
    pub comparator_certified: bool,
    pub avg_regret: f64,
    pub fstar: f64,
    /// `(1/M) sum_m |x_t^m - mean_t|` at the start of every step.
    pub consensus: Vec<f64>,
    pub communications: usize,
    pub max_grad_norm: f64,
    /// For linear runs: per-machine regret against the shared comparator.
    pub machine_regret_shared: Option<Vec<f64>>,
    /// For linear runs: per-machine regret against each machine's own comparator.
    pub machine_regret_own: Option<Vec<f64>>,
    #[serde(skip)]
    pub functions: Option<Vec<Vec<CostFunction>>>,
    /// Queried points, laid out like `losses`.
    #[serde(skip)]
    pub queries: Option<Vec<Vector>>,
}

impl RegretLedger {
    pub fn consensus_mean(&self) -> f64 {
        if self.consensus.is_empty() {
            0.0
        } else {
            self.consensus.iter().sum::<f64>() / self.consensus.len() as f64
        }
    }

    pub fn loss_entries(&self) -> usize {
        self.losses.len()
    }

    /// Recompute the average regret from the stored functions and queried points
    /// alone, and compare with the recorded value. Returns the recomputed value.
    pub fn audit(&self, tol: f64) -> Result<f64> {
        let functions = self
            .functions
            .as_ref()
            .ok_or_else(|| invalid("audit needs the ledger to keep functions"))?;
        let queries = self
            .queries
            .as_ref()
            .ok_or_else(|| invalid("audit needs the ledger to record queried points"))?;
        let (m, q) = (self.machines, self.queries_per_round);
        if functions.len() != self.horizon || queries.len() != self.horizon * m * q || self.losses.len() != queries.len() {
            return Err(Error::Invariant("ledger shape does not match T, M and q".into()));
        }
        if self.comparator.norm() > self.radius_b * (1.0 + 1e-12) {
            return Err(Error::Invariant("comparator lies outside the ball".into()));
        }
        let mut incurred = 0.0;
        let mut comparator = 0.0;
        for (t, round) in functions.iter().enumerate() {
            for (i, f) in round.iter().enumerate() {
                comparator += f.eval(self.comparator.as_slice())?;
                for j in 0..q {
                    let idx = (t * m + i) * q + j;
                    let loss = f.eval(queries[idx].as_slice())?;
                    if (loss - self.losses[idx]).abs() > tol * loss.abs().max(1.0) {
                        return Err(Error::Invariant(format!(
                            "loss at step {t}, machine {i}, query {j}: stored {} but recomputed {loss}",
                            self.losses[idx]
                        )));
                    }
                    incurred += loss;
                }
            }
        }
        let qf = q as f64;
        let avg = (incurred - qf * comparator) / (qf * (m * self.horizon) as f64);
        if (avg - self.avg_regret).abs() > tol * avg.abs().max(1.0) {
            return Err(Error::Invariant(format!(
                "average regret {} does not match recomputed {avg}",
                self.avg_regret
            )));
        }
        Ok(avg)
    }
}

pub fn consensus_series(ledger: &RegretLedger) -> Vec<f64> {
    ledger.consensus.clone()
}

/// Hindsight minimizer over the ball for linear functions: `-B S/|S|`, or zero when `S = 0`.
/// Returns `None` if some function is not linear.
pub fn comparator_linear(functions: &[Vec<CostFunction>], radius: f64) -> Option<Vector> {
    let dim = functions.first()?.first()?.dim();
    let mut s = Vector::zeros(dim);
    for f in functions.iter().flatten() {
        s.axpy(1.0, f.as_linear()?);
    }
    Some(linear_minimizer(&s, radius))
}

fn linear_minimizer(s: &Vector, radius: f64) -> Vector {
    let n = s.norm();
    if n == 0.0 {
        Vector::zeros(s.dim())
    } else {
        s.scaled(-radius / n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexComparator {
    pub x: Vector,
    /// `F(x)` with `F` the average of all functions.
    pub value: f64,
    /// Frank-Wolfe gap `<grad F(x), x> + B |grad F(x)|`, an upper bound on `F(x) - min F`.
    pub gap: f64,
    pub iterations: usize,
    pub certified: bool,
}

/// Projected gradient descent on the average of all functions over the ball.
/// Steps are `1/H` when every function is `H`-smooth and `B/(G sqrt(k+1))` otherwise.
/// Certified when the duality gap is within `tol` and no probe improves on the result by more than `tol`.
pub fn comparator_convex(
    functions: &[Vec<CostFunction>],
    radius: f64,
    tol: f64,
    max_iter: usize,
    probes: usize,
    rng: &mut RngStream,
) -> Result<ConvexComparator> {
    let all: Vec<&CostFunction> = functions.iter().flatten().collect();
    let dim = all.first().ok_or_else(|| invalid("no functions"))?.dim();
    let n = all.len() as f64;
    let g_max = all.iter().map(|f| f.lipschitz()).fold(0.0, f64::max);
    let h_max = all.iter().map(|f| f.smoothness()).fold(0.0, f64::max);
    let smooth = h_max > 0.0 && h_max.is_finite();

    let value_grad = |x: &Vector, grad: &mut Vector| {
        grad.as_mut_slice().fill(0.0);
        let mut scratch = vec![0.0; dim];
        let mut value = 0.0;
        for f in &all {
            value += f.eval_unchecked(x.as_slice());
            f.grad_into(x.as_slice(), &mut scratch);
            for (g, s) in grad.as_mut_slice().iter_mut().zip(&scratch) {
                *g += s;
            }
        }
        grad.scale_mut(1.0 / n);
        value / n
    };
    let gap_of = |x: &Vector, grad: &Vector| grad.dot(x) + radius * grad.norm();

    let mut x = Vector::zeros(dim);
    let mut grad = Vector::zeros(dim);
    let mut value = value_grad(&x, &mut grad);
    let mut gap = gap_of(&x, &grad);
    let mut best = (x.clone(), value, gap);
    let mut iterations = 0;
    while iterations < max_iter && gap > tol {
        let step = if smooth {
            1.0 / h_max
        } else {
            radius / (g_max * ((iterations + 1) as f64).sqrt())
        };
        let mut y = x.clone();
        y.axpy(-step, &grad);
        x = project_l2_ball(&y, radius)?;
        value = value_grad(&x, &mut grad);
        gap = gap_of(&x, &grad);
        iterations += 1;
        if value < best.1 {
            best = (x.clone(), value, gap);
        }
    }
    if gap <= tol {
        best = (x, value, gap);
    }
    let (x, value, gap) = best;
    let mut probes_ok = true;
    let avg = |p: &Vector| all.iter().map(|f| f.eval_unchecked(p.as_slice())).sum::<f64>() / n;
    for _ in 0..probes {
        let p = sample_ball(rng, dim, radius)?;
        if avg(&p) < value - tol {
            probes_ok = false;
            break;
        }
    }
    Ok(ConvexComparator {
        certified: gap <= tol && probes_ok,
        x,
        value,
        gap,
        iterations,
    })
}

/// Execute one run.
pub fn run(cfg: &RunConfig) -> Result<RegretLedger> {
    cfg.validate()?;
    let mut pilot_fstar = None;
    if cfg.needs_pilot() {
        let mut pilot = cfg.clone();
        pilot.options.record_queries = false;
        pilot.options.keep_functions = false;
        let ledger = run_with(&pilot, pilot.resolve_schedule(None)?, None)?;
        pilot_fstar = Some(ledger.fstar);
    }
    let sched = cfg.resolve_schedule(pilot_fstar)?;
    run_with(cfg, sched, pilot_fstar)
}

fn run_with(cfg: &RunConfig, sched: Schedule, pilot_fstar: Option<f64>) -> Result<RegretLedger> {
    let adversary = cfg.adversary_spec().build()?;
    let (m, d, t_total) = (cfg.machines, cfg.dim, cfg.horizon());
    let alg = cfg.algorithm;
    let q = alg.queries_per_round();
    let b = cfg.radius_b;

    let mut states: Vec<MachineState> = (0..m)
        .map(|i| MachineState::new(i, Vector::zeros(d), RngStream::derive(cfg.seed, &[tags::MACHINE, i as u64])))
        .collect();
    let mut history = History::new(m, false);
    let mut losses = Vec::with_capacity(t_total * m * q);
    let mut queries = cfg.options.record_queries.then(|| Vec::with_capacity(t_total * m * q));
    let mut consensus = Vec::with_capacity(t_total);
    let mut communications = 0;
    let mut max_grad_norm: f64 = 0.0;

    for t in 0..t_total {
        consensus.push(consensus_distance(&states));
        let fs = adversary.emit_round(t, &history)?;
        let mut played = Vec::with_capacity(m);
        for (state, f) in states.iter_mut().zip(&fs) {
            played.push(match alg {
                Algorithm::NcogdOnePoint | Algorithm::FedPosgd => project_l2_ball(&state.x, b)?,
                _ => state.x.clone(),
            });
            let rec = alg.step(state, f, &sched, b)?;
            if !state.x.is_finite() || rec.losses.iter().any(|l| !l.is_finite()) {
                return Err(Error::Diverged {
                    round: t,
                    machine: state.id,
                });
            }
            max_grad_norm = max_grad_norm.max(rec.grad_norm);
            losses.extend_from_slice(&rec.losses);
            if let Some(qs) = queries.as_mut() {
                qs.extend(rec.points);
            }
        }
        history.push(played, fs)?;
        if alg.is_federated() && (t + 1) % cfg.local_steps == 0 {
            communicate(&mut states, t, cfg.local_steps);
            communications += 1;
        }
    }

    let functions = history.into_functions();
    let tol = cfg
        .options
        .comparator_tol
        .unwrap_or(1e-8 * cfg.lipschitz_g * cfg.radius_b);
    let (comparator, certified) = match comparator_linear(&functions, b) {
        Some(x) => (x, true),
        None => {
            let mut rng = RngStream::derive(cfg.seed, &[tags::COMPARATOR]);
            let c = comparator_convex(
                &functions,
                b,
                tol,
                cfg.options.comparator_max_iter,
                cfg.options.comparator_probes,
                &mut rng,
            )?;
            (c.x, c.certified)
        }
    };

    let mut comparator_total = 0.0;
    for f in functions.iter().flatten() {
        comparator_total += f.eval_unchecked(comparator.as_slice());
    }
    let incurred_total: f64 = losses.iter().sum();
    let qf = q as f64;
    let avg_regret = (incurred_total - qf * comparator_total) / (qf * (m * t_total) as f64);
    let fstar = comparator_total / (m * t_total) as f64;

    let (machine_regret_shared, machine_regret_own) = machine_regrets(&functions, &losses, &comparator, m, q, b)
        .map_or((None, None), |(s, o)| (Some(s), Some(o)));

    Ok(RegretLedger {
        algorithm: alg.name().into(),
        adversary: cfg.adversary.name().into(),
        machines: m,
        local_steps: cfg.local_steps,
        rounds: cfg.rounds,
        horizon: t_total,
        dim: d,
        lipschitz_g: cfg.lipschitz_g,
        radius_b: b,
        zeta: cfg.zeta,
        seed: cfg.seed,
        schedule: sched,
        pilot_fstar,
        queries_per_round: q,
        losses,
        incurred_total,
        comparator,
        comparator_total,
        comparator_certified: certified,
        avg_regret,
        fstar,
        consensus,
        communications,
        max_grad_norm,
        machine_regret_shared,
        machine_regret_own,
        functions: cfg.options.keep_functions.then_some(functions),
        queries,
    })
}

fn machine_regrets(
    functions: &[Vec<CostFunction>],
    losses: &[f64],
    shared: &Vector,
    m: usize,
    q: usize,
    radius: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let t_total = functions.len();
    let dim = shared.dim();
    let mut sums = vec![Vector::zeros(dim); m];
    let mut incurred = vec![0.0; m];
    for (t, round) in functions.iter().enumerate() {
        for (i, f) in round.iter().enumerate() {
            sums[i].axpy(1.0, f.as_linear()?);
            incurred[i] += losses[(t * m + i) * q..(t * m + i + 1) * q].iter().sum::<f64>();
        }
    }
    let qf = q as f64;
    let denom = qf * t_total as f64;
    let shared_r = (0..m)
        .map(|i| (incurred[i] - qf * sums[i].dot(shared)) / denom)
        .collect();
    let own_r = (0..m)
        .map(|i| (incurred[i] - qf * sums[i].dot(&linear_minimizer(&sums[i], radius))) / denom)
        .collect();
    Some((shared_r, own_r))
}
