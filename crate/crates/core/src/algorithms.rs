//! Learners: per-machine update steps and the averaging barrier.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimators::{one_point_estimate, two_point_estimate};
use crate::oracles::{noisy_grad, CostFunction, OracleKind};
use crate::rng::RngStream;
use crate::schedule::Schedule;
use crate::vecgeom::{project_l2_ball, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Online gradient descent per machine with exact gradients, no communication.
    Ncogd,
    /// Per-machine one-point bandit descent (lazy projection), no communication.
    NcogdOnePoint,
    /// Per-machine two-point bandit descent, no communication.
    NcogdTwoPoint,
    /// Federated one-point bandit descent with lazy projection.
    FedPosgd,
    /// Federated two-point bandit descent.
    FedOsgd,
    /// Federated descent driven by a noisy gradient oracle with noise level `sigma`.
    FedOsgdFirstOrder { sigma: f64 },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ncogd => "ncogd",
            Algorithm::NcogdOnePoint => "ncogd_one_point",
            Algorithm::NcogdTwoPoint => "ncogd_two_point",
            Algorithm::FedPosgd => "fedposgd",
            Algorithm::FedOsgd => "fedosgd",
            Algorithm::FedOsgdFirstOrder { .. } => "fedosgd_first_order",
        }
    }

    pub fn oracle(&self) -> OracleKind {
        match self {
            Algorithm::Ncogd => OracleKind::FirstOrder,
            Algorithm::NcogdOnePoint | Algorithm::FedPosgd => OracleKind::OnePoint,
            Algorithm::NcogdTwoPoint | Algorithm::FedOsgd => OracleKind::TwoPoint,
            Algorithm::FedOsgdFirstOrder { .. } => OracleKind::NoisyFirstOrder,
        }
    }

    pub fn is_federated(&self) -> bool {
        matches!(
            self,
            Algorithm::FedPosgd | Algorithm::FedOsgd | Algorithm::FedOsgdFirstOrder { .. }
        )
    }

    pub fn queries_per_round(&self) -> usize {
        self.oracle().queries_per_round()
    }

    /// Whether the step needs a positive smoothing radius.
    pub fn is_zeroth_order(&self) -> bool {
        matches!(self.oracle(), OracleKind::OnePoint | OracleKind::TwoPoint)
    }

    /// Variance bound of the gradient estimate fed to the update.
    pub fn oracle_sigma(&self, d: usize, g: f64) -> f64 {
        match *self {
            Algorithm::Ncogd => 0.0,
            Algorithm::NcogdOnePoint | Algorithm::FedPosgd => 2.0 * d as f64 * g,
            Algorithm::NcogdTwoPoint | Algorithm::FedOsgd => (d as f64).sqrt() * g,
            Algorithm::FedOsgdFirstOrder { sigma } => sigma,
        }
    }

    /// Checks that `oracle` is the feedback this algorithm consumes.
    pub fn check_oracle(&self, oracle: OracleKind) -> Result<()> {
        if oracle != self.oracle() {
            return Err(invalid(format!(
                "algorithm {} needs {} feedback but the configured oracle is {}",
                self.name(),
                self.oracle(),
                oracle
            )));
        }
        if let Algorithm::FedOsgdFirstOrder { sigma } = *self {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(invalid(format!("noise level must be nonnegative, got {sigma}")));
            }
        }
        Ok(())
    }

    /// One local step of machine `state` on `f`.
    pub fn step(&self, state: &mut MachineState, f: &CostFunction, sched: &Schedule, radius: f64) -> Result<StepRecord> {
        match *self {
            Algorithm::Ncogd => state.step_ncogd(f, sched.eta),
            Algorithm::NcogdOnePoint | Algorithm::FedPosgd => state.step_fedposgd(f, sched, radius),
            Algorithm::NcogdTwoPoint | Algorithm::FedOsgd => state.step_fedosgd(f, sched),
            Algorithm::FedOsgdFirstOrder { sigma } => state.step_fedosgd_first_order(f, sched, sigma),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Losses charged for one step, at exactly the queried points.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub losses: Vec<f64>,
    pub points: Vec<Vector>,
    /// Norm of the vector the iterate moved along (before scaling by eta).
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct MachineState {
    pub id: usize,
    pub x: Vector,
    pub rng: RngStream,
}

impl MachineState {
    pub fn new(id: usize, x: Vector, rng: RngStream) -> Self {
        Self { id, x, rng }
    }

    /// Play `x`, pay `f(x)`, move along the exact negative gradient.
    pub fn step_ncogd(&mut self, f: &CostFunction, eta: f64) -> Result<StepRecord> {
        let loss = f.eval(self.x.as_slice())?;
        let g = f.grad(self.x.as_slice())?;
        let played = self.x.clone();
        self.x.axpy(-eta, &g);
        Ok(StepRecord {
            losses: vec![loss],
            points: vec![played],
            grad_norm: g.norm(),
        })
    }

    /// Query `Proj_B(x) + delta u`; the one-point estimate updates the unprojected iterate.
    pub fn step_fedposgd(&mut self, f: &CostFunction, sched: &Schedule, radius: f64) -> Result<StepRecord> {
        let w = project_l2_ball(&self.x, radius)?;
        let q = one_point_estimate(f, &w, sched.delta, &mut self.rng)?;
        self.x.axpy(-sched.eta, &q.estimate);
        Ok(StepRecord {
            losses: q.values,
            points: q.query_points,
            grad_norm: q.estimate.norm(),
        })
    }

    /// Query `x +- delta u`, pay both values, step along the two-point estimate.
    pub fn step_fedosgd(&mut self, f: &CostFunction, sched: &Schedule) -> Result<StepRecord> {
        let q = two_point_estimate(f, &self.x, sched.delta, &mut self.rng)?;
        self.x.axpy(-sched.eta, &q.estimate);
        Ok(StepRecord {
            losses: q.values,
            points: q.query_points,
            grad_norm: q.estimate.norm(),
        })
    }

    pub fn step_fedosgd_first_order(&mut self, f: &CostFunction, sched: &Schedule, sigma: f64) -> Result<StepRecord> {
        let loss = f.eval(self.x.as_slice())?;
        let g = noisy_grad(f, self.x.as_slice(), sigma, &mut self.rng)?;
        let played = self.x.clone();
        self.x.axpy(-sched.eta, &g);
        Ok(StepRecord {
            losses: vec![loss],
            points: vec![played],
            grad_norm: g.norm(),
        })
    }
}

/// Replace every iterate by the machine average. Must only be called at the end
/// of a communication round, i.e. when `(t + 1) % k == 0`.
pub fn communicate(states: &mut [MachineState], t: usize, k: usize) {
    assert!(
        k > 0 && (t + 1) % k == 0,
        "communication at step {t} is off the every-{k}-steps schedule"
    );
    if states.len() < 2 {
        return;
    }
    let mean = Vector::mean(states.iter().map(|s| &s.x)).expect("nonempty machine set");
    for s in states.iter_mut() {
        s.x.as_mut_slice().copy_from_slice(mean.as_slice());
    }
}

/// `(1/M) sum_m |x^m - mean|`.
pub fn consensus_distance(states: &[MachineState]) -> f64 {
    if states.len() < 2 {
        return 0.0;
    }
    let mean = Vector::mean(states.iter().map(|s| &s.x)).expect("nonempty machine set");
    states.iter().map(|s| s.x.distance(&mean)).sum::<f64>() / states.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{schedule_theorem3, Dims};

    fn v(xs: &[f64]) -> Vector {
        Vector::new(xs.to_vec()).unwrap()
    }

    fn machine(id: usize, x: &[f64]) -> MachineState {
        MachineState::new(id, v(x), RngStream::new(5, id as u64))
    }

    fn sched(eta: f64, delta: f64) -> Schedule {
        Schedule::manual(eta, delta).unwrap()
    }

    #[test]
    fn ncogd_hand_step() {
        let f = CostFunction::linear(v(&[1.0, 0.0]), 1.0).unwrap();
        let mut s = machine(0, &[0.0, 0.0]);
        let rec = s.step_ncogd(&f, 0.1).unwrap();
        assert_eq!(rec.losses, vec![0.0]);
        assert_eq!(s.x, v(&[-0.1, 0.0]));
        let mut s = machine(0, &[0.3, 0.2]);
        s.step_ncogd(&f, 0.0).unwrap();
        assert_eq!(s.x, v(&[0.3, 0.2]));
    }

    #[test]
    fn ncogd_machines_do_not_couple() {
        let f = CostFunction::huber(v(&[0.5, -0.5]), 1.0, 1.0).unwrap();
        let mut a = machine(0, &[0.0, 0.0]);
        let mut b = machine(0, &[0.0, 0.0]);
        for _ in 0..50 {
            a.step_ncogd(&f, 0.1).unwrap();
            b.step_ncogd(&f, 0.1).unwrap();
        }
        assert_eq!(a.x, b.x);
    }

    #[test]
    fn one_point_query_geometry() {
        let f = CostFunction::linear(v(&[0.6, 0.8]), 1.0).unwrap();
        let mut s = machine(0, &[0.0, 0.0]);
        let rec = s.step_fedposgd(&f, &sched(0.01, 1.0), 1.0).unwrap();
        assert!((rec.points[0].norm() - 1.0).abs() < 1e-12);

        let mut s = machine(1, &[3.0, 0.0]);
        let rec = s.step_fedposgd(&f, &sched(0.01, 1.0), 1.0).unwrap();
        assert!(rec.points[0].norm() <= 2.0 + 1e-12);
        // unprojected iterate moves from its own position
        assert!(s.x.distance(&v(&[3.0, 0.0])) <= 0.01 * rec.grad_norm + 1e-15);
    }

    #[test]
    fn one_point_estimate_norm_bound_over_long_run() {
        let (d, g, b) = (6usize, 1.0, 1.0);
        let dims = Dims::new(g, b, 1, 1, 10_000, d);
        let sch = schedule_theorem3(&dims, 0.0).unwrap();
        let mut rng = RngStream::new(40, 0);
        let mut s = machine(0, &[0.0; 6]);
        for _ in 0..10_000 {
            let beta = crate::vecgeom::sample_ball(&mut rng, d, g).unwrap();
            let f = CostFunction::linear(beta, g).unwrap();
            let rec = s.step_fedposgd(&f, &sch, b).unwrap();
            assert!(rec.grad_norm <= 2.0 * d as f64 * g * (1.0 + 1e-12));
        }
    }

    #[test]
    fn two_point_orthogonal_direction_is_a_no_op() {
        let f = CostFunction::linear(v(&[1.0, 0.0]), 1.0).unwrap();
        let mut s = machine(0, &[0.2, 0.2]);
        let q = crate::estimators::two_point_along(&f, &s.x, 0.5, v(&[0.0, 1.0])).unwrap();
        assert_eq!(q.estimate, v(&[0.0, 0.0]));
        assert!(s.step_fedosgd(&f, &Schedule { delta: 0.0, ..sched(0.1, 1.0) }).is_err());
    }

    #[test]
    fn two_point_pays_both_points() {
        let f = CostFunction::linear(v(&[0.0, 1.0]), 1.0).unwrap();
        let mut s = machine(2, &[0.0, 0.0]);
        let rec = s.step_fedosgd(&f, &sched(0.1, 0.5)).unwrap();
        assert_eq!(rec.losses.len(), 2);
        assert!((rec.losses[0] + rec.losses[1]).abs() < 1e-15);
    }

    #[test]
    fn single_round_two_point_regret_symmetry() {
        // E[(f(x+du) + f(x-du))/2] - f(x*) = f(x) - f(x*) for linear f
        let f = CostFunction::linear(v(&[0.6, -0.8, 0.0]), 1.0).unwrap();
        let x0 = v(&[0.1, 0.2, 0.3]);
        let n = 20_000;
        let mut acc = 0.0;
        for i in 0..n {
            let mut s = MachineState::new(0, x0.clone(), RngStream::new(9, i));
            let rec = s.step_fedosgd(&f, &sched(0.1, 0.7)).unwrap();
            acc += 0.5 * (rec.losses[0] + rec.losses[1]);
        }
        let fx = f.eval(x0.as_slice()).unwrap();
        // exact by symmetry, up to rounding
        assert!((acc / n as f64 - fx).abs() < 1e-12);
    }

    #[test]
    fn first_order_noiseless_matches_ncogd() {
        let f = CostFunction::huber(v(&[0.2, 0.1]), 2.0, 1.0).unwrap();
        let mut a = machine(0, &[1.0, -1.0]);
        let mut b = machine(3, &[1.0, -1.0]);
        for _ in 0..40 {
            let ra = a.step_ncogd(&f, 0.05).unwrap();
            let rb = b.step_fedosgd_first_order(&f, &sched(0.05, 0.0), 0.0).unwrap();
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn communicate_averages() {
        let mut states = vec![machine(0, &[1.0, 0.0]), machine(1, &[0.0, 1.0])];
        communicate(&mut states, 3, 2);
        assert_eq!(states[0].x, v(&[0.5, 0.5]));
        assert_eq!(states[1].x, v(&[0.5, 0.5]));
        assert_eq!(consensus_distance(&states), 0.0);
        let mut one = vec![machine(0, &[2.0, 3.0])];
        communicate(&mut one, 0, 1);
        assert_eq!(one[0].x, v(&[2.0, 3.0]));
    }

    #[test]
    #[should_panic(expected = "off the every-4-steps schedule")]
    fn communicate_off_schedule_panics() {
        let mut states = vec![machine(0, &[1.0]), machine(1, &[0.0])];
        communicate(&mut states, 2, 4);
    }

    #[test]
    fn oracle_compatibility() {
        assert!(Algorithm::FedPosgd.check_oracle(OracleKind::FirstOrder).is_err());
        assert!(Algorithm::FedPosgd.check_oracle(OracleKind::OnePoint).is_ok());
        assert!(Algorithm::FedOsgdFirstOrder { sigma: -1.0 }
            .check_oracle(OracleKind::NoisyFirstOrder)
            .is_err());
        assert_eq!(Algorithm::FedOsgd.queries_per_round(), 2);
        assert!(!Algorithm::NcogdTwoPoint.is_federated());
    }

    #[test]
    fn local_trajectory_ignores_other_machines_until_averaging() {
        // machine 0's iterate depends only on its own replies between barriers
        let k = 4;
        let f0 = CostFunction::linear(v(&[0.3, -0.4]), 1.0).unwrap();
        let fa = CostFunction::linear(v(&[1.0, 0.0]), 1.0).unwrap();
        let fb = CostFunction::linear(v(&[0.0, -1.0]), 1.0).unwrap();
        let sch = sched(0.05, 0.2);
        let run = |other: &CostFunction| {
            let mut states = vec![machine(0, &[0.0, 0.0]), machine(1, &[0.0, 0.0])];
            let mut trace = Vec::new();
            for t in 0..2 * k {
                Algorithm::FedOsgd.step(&mut states[0], &f0, &sch, 1.0).unwrap();
                Algorithm::FedOsgd.step(&mut states[1], other, &sch, 1.0).unwrap();
                trace.push(states[0].x.clone());
                if (t + 1) % k == 0 {
                    communicate(&mut states, t, k);
                }
            }
            trace
        };
        let (a, b) = (run(&fa), run(&fb));
        assert_eq!(a[..k], b[..k]);
        assert_ne!(a[k], b[k]);
    }
}
