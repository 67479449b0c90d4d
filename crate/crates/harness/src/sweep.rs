//! Parameter sweeps: cartesian products of run configurations executed in parallel.
//!
//! A sweep file holds a `[base]` table in the run-file format, an `[axes]` table of
//! lists, `replicates` and `output`:
//!
//! ```toml
//! replicates = 8
//! output = "ncogd_horizon.csv"
//!
//! [base]
//! machines = 1
//! # ... every run-file key ...
//!
//! [axes]
//! horizon = [256, 512, 1024]   # sets rounds = horizon / local_steps
//! machines = [1, 4]
//! ```
//!
//! Supported axes: `algorithm`, `machines`, `dim`, `zeta`, `local_steps`, `rounds`,
//! `horizon`, `seed`. Replicate `i` of a point with seed `s` runs with seed `s + i`, so
//! points that differ only in other axes share their random streams.

use std::path::{Path, PathBuf};
use std::time::Instant;

use fedbco::RunConfig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::config::{run_config_from_table, ConfigError};

pub const DEFAULT_CAP: usize = 10_000;

/// Environment variable capping the number of worker threads.
pub const WORKERS_ENV: &str = "FEDBCO_WORKERS";

/// CSV columns, in order. Frozen.
pub const CSV_HEADER: &str =
    "run_id,algorithm,adversary,M,K,R,T,d,G,B,zeta,eta,delta,seed,avg_regret,consensus_mean,fstar,comparator_loss,wall_ms,status";

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axes {
    pub algorithm: Option<Vec<String>>,
    pub machines: Option<Vec<usize>>,
    pub dim: Option<Vec<usize>>,
    pub zeta: Option<Vec<f64>>,
    pub local_steps: Option<Vec<usize>>,
    pub rounds: Option<Vec<usize>>,
    pub horizon: Option<Vec<usize>>,
    pub seed: Option<Vec<u64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    base: Table,
    #[serde(default)]
    axes: Axes,
    #[serde(default = "one")]
    replicates: usize,
    output: PathBuf,
    #[serde(default)]
    cap: Option<usize>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: Table,
    pub axes: Axes,
    pub replicates: usize,
    pub output: PathBuf,
    pub cap: usize,
}

/// One expanded sweep point.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub run_id: usize,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub run_id: usize,
    pub algorithm: String,
    pub adversary: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "R")]
    pub r: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub d: usize,
    #[serde(rename = "G")]
    pub g: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub zeta: f64,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub seed: u64,
    pub avg_regret: Option<f64>,
    pub consensus_mean: Option<f64>,
    pub fstar: Option<f64>,
    pub comparator_loss: Option<f64>,
    pub wall_ms: u64,
    pub status: String,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawSweep = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if raw.replicates == 0 {
            return Err(ConfigError::Parse("replicates must be >= 1".into()));
        }
        if raw.axes.horizon.is_some() && raw.axes.rounds.is_some() {
            return Err(ConfigError::Parse("axes `horizon` and `rounds` are mutually exclusive".into()));
        }
        Ok(Self {
            base: raw.base,
            axes: raw.axes,
            replicates: raw.replicates,
            output: raw.output,
            cap: raw.cap.unwrap_or(DEFAULT_CAP),
        })
    }

    /// Number of runs the sweep expands to.
    pub fn size(&self) -> usize {
        let a = &self.axes;
        let len = |n: Option<usize>| n.unwrap_or(1).max(1);
        len(a.algorithm.as_ref().map(Vec::len))
            * len(a.machines.as_ref().map(Vec::len))
            * len(a.dim.as_ref().map(Vec::len))
            * len(a.zeta.as_ref().map(Vec::len))
            * len(a.local_steps.as_ref().map(Vec::len))
            * len(a.rounds.as_ref().or(a.horizon.as_ref()).map(Vec::len))
            * len(a.seed.as_ref().map(Vec::len))
            * self.replicates
    }

    /// Expand the cartesian product. Fails if the cap is exceeded or a point is invalid.
    pub fn expand(&self) -> Result<Vec<SweepPoint>, ConfigError> {
        if self.size() > self.cap {
            return Err(ConfigError::Parse(format!(
                "sweep expands to {} runs, above the cap of {}",
                self.size(),
                self.cap
            )));
        }
        let mut tables = vec![self.base.clone()];
        let a = &self.axes;
        product(&mut tables, "algorithm", a.algorithm.as_ref(), |s| Value::String(s.clone()));
        product(&mut tables, "machines", a.machines.as_ref(), |&v| Value::Integer(v as i64));
        product(&mut tables, "dim", a.dim.as_ref(), |&v| Value::Integer(v as i64));
        product(&mut tables, "zeta", a.zeta.as_ref(), |&v| Value::Float(v));
        product(&mut tables, "local_steps", a.local_steps.as_ref(), |&v| Value::Integer(v as i64));
        product(&mut tables, "rounds", a.rounds.as_ref(), |&v| Value::Integer(v as i64));
        product(&mut tables, "horizon", a.horizon.as_ref(), |&v| Value::Integer(v as i64));
        product(&mut tables, "seed", a.seed.as_ref(), |&v| Value::Integer(v as i64));

        let mut points = Vec::with_capacity(tables.len() * self.replicates);
        for mut table in tables {
            if let Some(Value::Integer(t)) = table.remove("horizon") {
                let k = table
                    .get("local_steps")
                    .and_then(Value::as_integer)
                    .ok_or_else(|| ConfigError::Parse("horizon axis needs base.local_steps".into()))?;
                if k <= 0 || t % k != 0 {
                    return Err(ConfigError::Parse(format!("horizon {t} is not a multiple of local_steps {k}")));
                }
                table.insert("rounds".into(), Value::Integer(t / k));
            }
            let config = run_config_from_table(table)?;
            for i in 0..self.replicates {
                let mut c = config.clone();
                c.seed = config.seed.wrapping_add(i as u64);
                points.push(SweepPoint {
                    run_id: points.len(),
                    config: c,
                });
            }
        }
        Ok(points)
    }
}

fn product<T>(tables: &mut Vec<Table>, key: &str, values: Option<&Vec<T>>, to_value: impl Fn(&T) -> Value) {
    let Some(values) = values else { return };
    if values.is_empty() {
        return;
    }
    *tables = tables
        .iter()
        .flat_map(|t| {
            values.iter().map(|v| {
                let mut t = t.clone();
                t.insert(key.into(), to_value(v));
                t
            })
        })
        .collect();
}

/// Execute one point; errors become a failed row.
pub fn run_point(point: &SweepPoint) -> SweepRow {
    let c = &point.config;
    let start = Instant::now();
    let result = fedbco::run(c);
    let wall_ms = start.elapsed().as_millis() as u64;
    let mut row = SweepRow {
        run_id: point.run_id,
        algorithm: c.algorithm.name().into(),
        adversary: c.adversary.name().into(),
        m: c.machines,
        k: c.local_steps,
        r: c.rounds,
        t: c.horizon(),
        d: c.dim,
        g: c.lipschitz_g,
        b: c.radius_b,
        zeta: c.zeta,
        eta: None,
        delta: None,
        seed: c.seed,
        avg_regret: None,
        consensus_mean: None,
        fstar: None,
        comparator_loss: None,
        wall_ms,
        status: "ok".into(),
    };
    match result {
        Ok(l) => {
            row.eta = Some(l.schedule.eta);
            row.delta = Some(l.schedule.delta);
            row.avg_regret = Some(l.avg_regret);
            row.consensus_mean = Some(l.consensus_mean());
            row.fstar = Some(l.fstar);
            row.comparator_loss = Some(l.comparator_total);
            if !l.comparator_certified {
                row.status = "ok: comparator not certified".into();
            }
        }
        Err(e) => row.status = format!("error: {e}"),
    }
    row
}

/// Run every point, in parallel when `workers > 1`. Rows come back in `run_id` order.
pub fn run_points(points: &[SweepPoint], workers: Option<usize>) -> Vec<SweepRow> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("thread pool");
            pool.install(|| points.par_iter().map(run_point).collect())
        }
        None => points.par_iter().map(run_point).collect(),
    }
}

pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok())
}

pub fn row_failed(row: &SweepRow) -> bool {
    row.status.starts_with("error")
}

/// Write rows as CSV and mirror them as a JSON array next to it (`.json` extension).
pub fn write_outputs(rows: &[SweepRow], csv_path: &Path) -> std::io::Result<PathBuf> {
    let mut w = csv::Writer::from_path(csv_path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let json_path = csv_path.with_extension("json");
    let json = serde_json::to_string_pretty(rows).map_err(std::io::Error::other)?;
    std::fs::write(&json_path, json)?;
    Ok(json_path)
}
