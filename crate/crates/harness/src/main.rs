use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use fedbco_harness::config::{parse_run_config, ConfigError};
use fedbco_harness::fit::fit_csv;
use fedbco_harness::sweep::{self, SweepSpec};
use fedbco_harness::verify::{run_all, VerifySizes};
use serde_json::json;

#[derive(Parser)]
#[command(name = "fedbco", version, about = "Federated bandit convex optimization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and append a record to its ledger file.
    Run {
        config: PathBuf,
        /// JSON-lines ledger to append to [default: <config>.ledger.jsonl]
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Expand and run a parameter sweep, writing CSV and JSON results.
    Sweep { spec: PathBuf },
    /// Fit log y against log x, optionally per group.
    Fit {
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        group: Option<String>,
    },
    /// Run the statistical verification suite.
    Verify,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))
}

fn fail(err: ConfigError) -> ExitCode {
    eprintln!("{err}");
    ExitCode::from(err.exit_code() as u8)
}

fn cmd_run(path: &Path, ledger: Option<PathBuf>) -> ExitCode {
    let cfg = match read(path).and_then(|t| parse_run_config(&t)) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    let start = Instant::now();
    let l = match fedbco::run(&cfg) {
        Ok(l) => l,
        Err(e) => return fail(ConfigError::Invalid(e.to_string())),
    };
    let wall_ms = start.elapsed().as_millis() as u64;
    println!("algorithm      {}", l.algorithm);
    println!("adversary      {}", l.adversary);
    println!("schedule       {} (eta = {:.6e}, delta = {:.6e})", l.schedule.source, l.schedule.eta, l.schedule.delta);
    println!("avg_regret     {:.6e}", l.avg_regret);
    println!("consensus_mean {:.6e}", l.consensus_mean());
    if !l.comparator_certified {
        println!("warning: comparator not certified");
    }

    let ledger = ledger.unwrap_or_else(|| {
        let mut p = path.as_os_str().to_owned();
        p.push(".ledger.jsonl");
        PathBuf::from(p)
    });
    let record = json!({
        "config": cfg,
        "schedule": l.schedule,
        "avg_regret": l.avg_regret,
        "consensus_mean": l.consensus_mean(),
        "fstar": l.fstar,
        "comparator_loss": l.comparator_total,
        "comparator_certified": l.comparator_certified,
        "communications": l.communications,
        "max_grad_norm": l.max_grad_norm,
        "wall_ms": wall_ms,
    });
    let appended = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&ledger)
        .and_then(|mut f| writeln!(f, "{record}"));
    if let Err(e) = appended {
        eprintln!("{}: {e}", ledger.display());
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn cmd_sweep(path: &Path) -> ExitCode {
    let spec = match read(path).and_then(|t| SweepSpec::parse(&t)) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let points = match spec.expand() {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let output = match path.parent() {
        Some(dir) if spec.output.is_relative() => dir.join(&spec.output),
        _ => spec.output.clone(),
    };
    eprintln!("running {} points", points.len());
    let rows = sweep::run_points(&points, sweep::workers_from_env());
    let json = match sweep::write_outputs(&rows, &output) {
        Ok(j) => j,
        Err(e) => {
            eprintln!("{}: {e}", output.display());
            return ExitCode::from(1);
        }
    };
    let failed = rows.iter().filter(|r| sweep::row_failed(r)).count();
    println!("wrote {} and {}", output.display(), json.display());
    if failed > 0 {
        eprintln!("{failed} of {} runs failed", rows.len());
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn cmd_fit(path: &Path, x: &str, y: &str, group: Option<&str>) -> ExitCode {
    let (fits, warnings) = match fit_csv(path, x, y, group) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let mut ok = true;
    for f in fits {
        match f {
            Ok(f) => println!(
                "{}slope {:.4} intercept {:.4} r2 {:.4} n {}",
                f.group.map(|g| format!("{g}: ")).unwrap_or_default(),
                f.slope,
                f.intercept,
                f.r_squared,
                f.n_points
            ),
            Err(e) => {
                eprintln!("{e}");
                ok = false;
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_verify() -> ExitCode {
    let checks = run_all(VerifySizes::default());
    for c in &checks {
        println!("{c}");
    }
    if checks.iter().all(|c| c.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, ledger } => cmd_run(&config, ledger),
        Command::Sweep { spec } => cmd_sweep(&spec),
        Command::Fit { csv, x, y, group } => cmd_fit(&csv, &x, &y, group.as_deref()),
        Command::Verify => cmd_verify(),
    }
}
