//! Command-line harness for the federated bandit simulator: run files, parameter
//! sweeps, log-log fits and the statistical verification suite.

pub mod config;
pub mod fit;
pub mod sweep;
pub mod verify;

pub use config::{parse_run_config, ConfigError};
pub use fit::{fit_csv, fit_loglog, FitResult};
pub use sweep::{SweepRow, SweepSpec, CSV_HEADER};
pub use verify::{run_all, Check, VerifySizes};
