//! Command-line experiment runner.
//!
//! Exit codes: 0 success, 1 bad config / usage / missing bundle,
//! 2 consistency failure, 3 solver failure.

pub mod config;
pub mod experiments;
pub mod modelspec;
pub mod output;
pub mod report;
pub mod selftest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use self::config::ExperimentConfig;
use self::experiments::{execute, Status};
use self::output::{config_hash, Bundle};
use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONSISTENCY: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "flatrank", version, about = "Geodesic rank, flattening probes and CAT(0) checks on model manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config's `output`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed (overrides the config's `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Integrator tolerance (overrides `tolerances.integrator`).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiment described by --config.
    Run,
    /// Consolidated table and plot data from a result bundle.
    Report {
        /// Bundle directory written by `run`.
        bundle: PathBuf,
    },
    /// Print the model catalog and the model-string grammar.
    ListModels,
    /// Run the built-in invariant suite.
    SelfTest,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Consistency(_) => EXIT_CONSISTENCY,
        e if e.is_solver_failure() => EXIT_SOLVER,
        _ => EXIT_USAGE,
    }
}

fn fail(e: &Error) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(&Error::Usage("--threads must be positive".into()));
        }
        // A second initialisation (tests calling in-process) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Run => run(&cli),
        Command::Report { bundle } => report(bundle, cli.out.as_deref()),
        Command::ListModels => {
            println!("{:<40} {:<40} description", "syntax", "example");
            for (syntax, example, about) in modelspec::CATALOG {
                println!("{syntax:<40} {example:<40} {about}");
            }
            EXIT_OK
        }
        Command::SelfTest => self_test(cli.seed.unwrap_or(0), cli.out.as_deref()),
    }
}

/// Loads the config and applies the command-line overrides.
pub fn load_config(path: &Path, seed: Option<u64>, tol: Option<f64>) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = tol {
        cfg.tolerances.integrator = t;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> i32 {
    let Some(path) = &cli.config else {
        return fail(&Error::Usage("run needs --config <file>".into()));
    };
    let cfg = match load_config(path, cli.seed, cli.tol) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let Some(out_dir) = cli.out.clone().or_else(|| cfg.output.clone()) else {
        return fail(&Error::Usage("no output directory: set `output` in the config or pass --out".into()));
    };
    // The output location does not enter the hash or the echo, so a bundle
    // is reproducible wherever it is written.
    let echo = ExperimentConfig { output: None, ..cfg.clone() };
    let canonical = serde_json::to_string(&echo).expect("serialisable config");
    let hash = config_hash(&canonical);

    let outcome = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    let mut bundle = Bundle::default();
    for (name, table) in &outcome.tables {
        bundle.add_table(name, table, &hash);
    }
    let mut files = bundle.names();
    files.push("summary.json".into());
    let summary = json!({
        "config_hash": hash,
        "seed": cfg.seed,
        "operation": cfg.operation.name(),
        "model": cfg.model,
        "status": outcome.status.label(),
        "message": outcome.status.message(),
        "config": echo,
        "results": outcome.results,
        "files": files,
    });
    bundle.add_json("summary.json", &summary);
    if let Err(e) = bundle.commit(&out_dir) {
        return fail(&Error::Usage(format!("writing {}: {e}", out_dir.display())));
    }
    println!("{} {} -> {} [{}]", cfg.operation.name(), cfg.model, out_dir.display(), outcome.status.label());
    match outcome.status {
        Status::Ok => EXIT_OK,
        Status::Consistency(m) => {
            eprintln!("consistency failure: {m}");
            EXIT_CONSISTENCY
        }
        Status::Solver(m) => {
            eprintln!("solver failure: {m}");
            EXIT_SOLVER
        }
    }
}

fn report(bundle_dir: &Path, out: Option<&Path>) -> i32 {
    let bundle = match report::build_report(bundle_dir) {
        Ok(b) => b,
        Err(e) => return fail(&e),
    };
    let target = out.unwrap_or(bundle_dir);
    if let Err(e) = bundle.commit(target) {
        return fail(&Error::Usage(format!("writing {}: {e}", target.display())));
    }
    for name in bundle.names() {
        println!("{}", target.join(name).display());
    }
    EXIT_OK
}

fn self_test(seed: u64, out: Option<&Path>) -> i32 {
    let checks = selftest::run_suite(seed);
    let table = selftest::suite_table(&checks);
    let hash = config_hash(&format!("self-test seed={seed}"));
    let csv = table.to_csv(&hash);
    print!("{}", String::from_utf8_lossy(&csv));
    if let Some(dir) = out {
        let mut b = Bundle::default();
        b.add_table("self_test.csv", &table, &hash);
        if let Err(e) = b.commit(dir) {
            return fail(&Error::Usage(format!("writing {}: {e}", dir.display())));
        }
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        eprintln!("self-test: {} checks passed", checks.len());
        EXIT_OK
    } else {
        eprintln!("self-test: {failed} of {} checks failed", checks.len());
        EXIT_CONSISTENCY
    }
}
