//! `gltop`: run, sweep and check gliding-top simulations from TOML configs.

mod config;
mod output;
mod sweep;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gltop::checks::run_checks;
use gltop::integrator::{integrate, Termination};

use config::{parse_document, RunConfig};
use output::{run_report, write_trajectory_csv, CheckOutput, SCHEMA_VERSION};

/// Exit status for a run that finished but did not succeed (degenerate
/// reaction force, failed check suite, failed sweep points).
const EXIT_FAILED: u8 = 2;

#[derive(Parser)]
#[command(name = "gltop", version, about = "Gliding Lagrange top simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for outputs; relative output paths are resolved against it.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for the randomized check suites (overrides [check] seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write the CSV and JSON report.
    Run { config: PathBuf },
    /// Run a Cartesian grid of configurations and write a summary table.
    Sweep { config: PathBuf },
    /// Run the invariant suites at the configured parameters.
    Check { config: PathBuf },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let doc = parse_document(&read(path)?).with_context(|| format!("in {}", path.display()))?;
    let mut cfg = doc.validate().with_context(|| format!("in {}", path.display()))?;
    if let Some(s) = seed {
        cfg.check.seed = s;
    }
    Ok(cfg)
}

/// Where an output goes: configured paths are taken relative to `--out-dir`;
/// with `--out-dir` and no configured path, `default` inside it.
fn destination(configured: Option<&Path>, out_dir: Option<&Path>, default: &str) -> Option<PathBuf> {
    match (configured, out_dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(d)) => Some(d.join(default)),
        (None, None) => None,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn emit_json(value: &impl serde::Serialize, dest: Option<&Path>, quiet: bool) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match dest {
        Some(p) => {
            let mut f = create(p)?;
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None if !quiet => println!("{text}"),
        None => {}
    }
    Ok(())
}

fn run(cli: &Cli, path: &Path) -> Result<ExitCode> {
    let cfg = load(path, cli.seed)?;
    let out_dir = cli.out_dir.as_deref();
    let traj = integrate(&cfg.initial, &cfg.params, &cfg.friction, &cfg.integrator)?;

    if let Some(p) = destination(cfg.outputs.trajectory_csv.as_deref(), out_dir, "trajectory.csv") {
        let mut f = create(&p)?;
        write_trajectory_csv(&mut f, &traj, &cfg)?;
        f.flush()?;
    }
    let report = run_report(&traj, &cfg);
    let report_path = destination(cfg.outputs.report_json.as_deref(), out_dir, "report.json");
    emit_json(&report, report_path.as_deref(), cli.quiet)?;
    if !cli.quiet && report_path.is_some() {
        println!(
            "{:?} at t = {} s; limit {:?}",
            report.termination, report.final_time, report.convergence.limit
        );
    }

    if let Termination::DegenerateDenominator { t } = report.termination {
        eprintln!("error: reaction-force denominator vanished at t = {t} s");
        return Ok(ExitCode::from(EXIT_FAILED));
    }
    Ok(ExitCode::SUCCESS)
}

fn check(cli: &Cli, path: &Path) -> Result<ExitCode> {
    let cfg = load(path, cli.seed)?;
    let report = run_checks(&cfg.initial, &cfg.params, &cfg.friction, &cfg.integrator, &cfg.check)?;
    let out = CheckOutput {
        schema_version: SCHEMA_VERSION,
        passed: report.passed,
        settings: &cfg.check,
        suites: &report.suites,
    };
    let dest = destination(cfg.outputs.report_json.as_deref(), cli.out_dir.as_deref(), "check.json");
    emit_json(&out, dest.as_deref(), cli.quiet)?;
    if !cli.quiet && dest.is_some() {
        for s in &report.suites {
            println!("{} {}", if s.passed { "pass" } else { "FAIL" }, s.name);
        }
    }
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    })
}

fn sweep(cli: &Cli, path: &Path) -> Result<ExitCode> {
    let doc: toml::Value = toml::from_str(&read(path)?).with_context(|| format!("in {}", path.display()))?;
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let rows = sweep::run_sweep(doc, &out_dir).with_context(|| format!("in {}", path.display()))?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if !cli.quiet {
        println!("{} grid points, {failed} failed", rows.len());
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILED)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Sweep { config } => sweep(&cli, config),
        Command::Check { config } => check(&cli, config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
