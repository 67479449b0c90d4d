//! Federated online and bandit convex optimization under intermittent communication.
//!
//! `M` machines each play `K` local steps between averaging rounds, for `R` rounds.
//! Every step an adversary hands each machine a convex cost; the machine sees a
//! gradient, a noisy gradient, or one or two function values, and regret is charged
//! at the points actually queried.

pub mod adversaries;
pub mod algorithms;
pub mod error;
pub mod estimators;
pub mod oracles;
pub mod rng;
pub mod schedule;
pub mod simulator;
pub mod vecgeom;

pub use adversaries::{Adversary, AdversaryKind, AdversarySpec, History, OffsetRule, SharedRule};
pub use algorithms::{communicate, Algorithm, MachineState, StepRecord};
pub use error::{Error, Result};
pub use oracles::{CostFunction, CostKind, OracleKind, OracleReply};
pub use rng::RngStream;
pub use schedule::{Dims, Schedule, ScheduleSource};
pub use simulator::{run, RegretLedger, RunConfig, RunOptions, ScheduleSpec};
pub use vecgeom::Vector;
