//! Run configuration files.
//!
//! A run file is TOML with these keys:
//!
//! ```toml
//! machines = 4
//! local_steps = 8
//! rounds = 64
//! dim = 16
//! lipschitz_g = 1.0
//! radius_b = 1.0
//! zeta = 0.5
//! algorithm = "fedosgd"          # ncogd | ncogd_one_point | ncogd_two_point | fedposgd | fedosgd | fedosgd_first_order
//! sigma = 1.0                    # only for fedosgd_first_order
//! oracle = "two_point"           # optional: first_order | noisy_first_order | one_point | two_point
//! adversary = "stochastic_linear"  # or a table, e.g. { kind = "stochastic_huber", smoothness = 1.0, center_norm = 0.5 }
//! schedule = "auto"              # or a table, e.g. { kind = "manual", eta = 0.01, delta = 0.1 }
//! seed = 7
//! ```
//!
//! An optional `[options]` table sets [`RunOptions`](fedbco::RunOptions).

use std::fmt;

use fedbco::{Algorithm, AdversaryKind, OracleKind, RunConfig, RunOptions, ScheduleSpec};
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum ConfigError {
    /// The file does not match the schema.
    Parse(String),
    /// The file parses but describes an impossible or incompatible run.
    Invalid(String),
}

impl ConfigError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Parse(_) => 2,
            ConfigError::Invalid(_) => 3,
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "configuration error: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid run: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    machines: usize,
    local_steps: usize,
    rounds: usize,
    dim: usize,
    lipschitz_g: f64,
    radius_b: f64,
    zeta: f64,
    algorithm: String,
    #[serde(default)]
    sigma: Option<f64>,
    #[serde(default)]
    oracle: Option<String>,
    adversary: Value,
    schedule: Value,
    seed: u64,
    #[serde(default)]
    options: Option<RunOptions>,
}

pub fn parse_algorithm(name: &str, sigma: Option<f64>) -> Result<Algorithm, ConfigError> {
    let key: String = name
        .chars()
        .filter(|c| !matches!(c, '-' | '_' | ' '))
        .flat_map(char::to_lowercase)
        .collect();
    let alg = match key.as_str() {
        "ncogd" => Algorithm::Ncogd,
        "ncogdonepoint" => Algorithm::NcogdOnePoint,
        "ncogdtwopoint" => Algorithm::NcogdTwoPoint,
        "fedposgd" => Algorithm::FedPosgd,
        "fedosgd" => Algorithm::FedOsgd,
        "fedosgdfirstorder" => Algorithm::FedOsgdFirstOrder {
            sigma: sigma.ok_or_else(|| ConfigError::Parse("algorithm fedosgd_first_order needs the `sigma` key".into()))?,
        },
        _ => return Err(ConfigError::Parse(format!("unknown algorithm `{name}`"))),
    };
    Ok(alg)
}

pub fn parse_oracle(name: &str) -> Result<OracleKind, ConfigError> {
    Value::String(name.to_string())
        .try_into()
        .map_err(|_| ConfigError::Parse(format!("unknown oracle `{name}`")))
}

/// A bare string `"name"` is shorthand for the table `{ kind = "name" }`.
fn tagged<T: for<'de> Deserialize<'de>>(what: &str, v: Value) -> Result<T, ConfigError> {
    let table = match v {
        Value::String(s) => {
            let mut t = Table::new();
            t.insert("kind".into(), Value::String(s.to_lowercase()));
            t
        }
        Value::Table(t) => t,
        other => return Err(ConfigError::Parse(format!("`{what}` must be a string or a table, got {other}"))),
    };
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(format!("`{what}`: {}", e.message())))
}

/// Parse and validate a run file.
pub fn parse_run_config(text: &str) -> Result<RunConfig, ConfigError> {
    let table: Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    run_config_from_table(table)
}

/// Same as [`parse_run_config`] for an already-parsed table.
pub fn run_config_from_table(table: Table) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
    let cfg = RunConfig {
        machines: raw.machines,
        local_steps: raw.local_steps,
        rounds: raw.rounds,
        dim: raw.dim,
        lipschitz_g: raw.lipschitz_g,
        radius_b: raw.radius_b,
        zeta: raw.zeta,
        algorithm: parse_algorithm(&raw.algorithm, raw.sigma)?,
        oracle: raw.oracle.as_deref().map(parse_oracle).transpose()?,
        adversary: tagged::<AdversaryKind>("adversary", raw.adversary)?,
        schedule: tagged::<ScheduleSpec>("schedule", raw.schedule)?,
        seed: raw.seed,
        options: raw.options.unwrap_or_default(),
    };
    cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
machines = 1
local_steps = 1
rounds = 16
dim = 2
lipschitz_g = 1.0
radius_b = 1.0
zeta = 0.0
algorithm = "ncogd"
adversary = "stochastic_linear"
schedule = "auto"
seed = 7
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = parse_run_config(MINIMAL).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Ncogd);
        assert_eq!(cfg.adversary, AdversaryKind::StochasticLinear { mean_scale: 0.0 });
        assert_eq!(cfg.schedule, ScheduleSpec::Auto);
    }

    #[test]
    fn missing_key_is_a_parse_error() {
        let text = MINIMAL.replace("radius_b = 1.0\n", "");
        let err = parse_run_config(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("radius_b"));
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = MINIMAL.replace("dim = 2", "dim = = 2");
        let err = parse_run_config(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 5"), "{err}");
    }

    #[test]
    fn incompatible_oracle_is_invalid() {
        let text = MINIMAL.replace("\"ncogd\"", "\"FedPOSGD\"\noracle = \"first_order\"");
        let err = parse_run_config(&text).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("fedposgd"), "{err}");
    }

    #[test]
    fn tables_for_adversary_and_schedule() {
        let text = MINIMAL
            .replace(
                "adversary = \"stochastic_linear\"",
                "adversary = { kind = \"stochastic_huber\", smoothness = 2.0, center_norm = 0.5 }",
            )
            .replace("schedule = \"auto\"", "schedule = { kind = \"manual\", eta = 0.1 }");
        let cfg = parse_run_config(&text).unwrap();
        assert_eq!(
            cfg.adversary,
            AdversaryKind::StochasticHuber {
                smoothness: 2.0,
                center_norm: 0.5,
                spread: 0.0
            }
        );
        assert_eq!(cfg.schedule, ScheduleSpec::Manual { eta: 0.1, delta: 0.0 });
    }

    #[test]
    fn first_order_needs_sigma() {
        let text = MINIMAL.replace("\"ncogd\"", "\"fedosgd_first_order\"");
        assert_eq!(parse_run_config(&text).unwrap_err().exit_code(), 2);
        let text = MINIMAL.replace("\"ncogd\"", "\"fedosgd_first_order\"\nsigma = 0.5");
        assert_eq!(
            parse_run_config(&text).unwrap().algorithm,
            Algorithm::FedOsgdFirstOrder { sigma: 0.5 }
        );
    }

    #[test]
    fn unknown_names_rejected() {
        let text = MINIMAL.replace("\"ncogd\"", "\"sgd\"");
        assert_eq!(parse_run_config(&text).unwrap_err().exit_code(), 2);
        let text = MINIMAL.replace("seed = 7", "seed = 7\nbogus = 1");
        assert_eq!(parse_run_config(&text).unwrap_err().exit_code(), 2);
    }
}
