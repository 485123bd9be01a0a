//! `forced-waves` command-line driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use clap::Parser;
use commands::{Command, Ctx};
use config::{RunConfig, SCHEMA};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(
    name = "forced-waves",
    version,
    about = "Forced waves of a three-species system with a shifting environment"
)]
struct Cli {
    /// Subcommand to run.
    #[arg(value_enum, required_unless_present = "print_schema")]
    command: Option<Command>,
    /// TOML run configuration.
    #[arg(long, value_name = "PATH", required_unless_present = "print_schema")]
    config: Option<PathBuf>,
    /// Output directory for reports and CSV files.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for `sweep.speeds`.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
    /// Overrides both the verification and the solver tolerance.
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
    /// Overrides `bounds.construction`, the bounds whose midpoint seeds `solve`.
    #[arg(long, value_name = "NAME")]
    seed_scenario: Option<String>,
    /// Prints the documented default configuration and exits.
    #[arg(long)]
    print_schema: bool,
}

fn resolve(cli: &Cli) -> Result<Ctx, CliError> {
    let path = cli.config.as_deref().expect("required by clap");
    let mut cfg = RunConfig::load(path)?;
    if let Some(tol) = cli.tol {
        if !(tol > 0.0) {
            return Err(CliError::Config(format!(
                "--tol must be positive, got {tol}"
            )));
        }
        cfg.bounds.verify_tol = tol;
        cfg.solver.tol = tol;
    }
    if let Some(name) = &cli.seed_scenario {
        cfg.bounds.construction = Some(name.clone());
    }
    if cli.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let base = commands::config_base(Some(path));
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(|d| base.join(d)));
    cfg.output_dir = out.clone();
    Ok(Ctx { cfg, base, out })
}

/// Rendered report, if any, and the verdict of one run.
type RunResult = (Option<String>, Result<(), CliError>);

/// Runs one context and renders its report.
fn run_one(cmd: Command, ctx: &Ctx) -> RunResult {
    match commands::run(cmd, ctx) {
        Ok(outcome) => {
            let value = commands::envelope(cmd, ctx, &outcome);
            if let Err(e) = commands::write_report(ctx, cmd, &value) {
                return (None, Err(e));
            }
            let text = serde_json::to_string_pretty(&value).expect("reports serialise");
            (Some(text), outcome.verdict)
        }
        Err(e) => (None, Err(e)),
    }
}

fn sweep_contexts(ctx: &Ctx) -> Vec<Ctx> {
    ctx.cfg
        .sweep
        .speeds
        .iter()
        .map(|&s| {
            let mut sub = ctx.clone();
            sub.cfg.speed = Some(s);
            sub.cfg.sweep.speeds.clear();
            sub.out = ctx.out.as_ref().map(|d| d.join(format!("s_{s}")));
            sub.cfg.output_dir = sub.out.clone();
            sub
        })
        .collect()
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cmd = cli.command.expect("required by clap");
    let ctx = resolve(cli)?;
    let runs = if ctx.cfg.sweep.speeds.is_empty() {
        vec![ctx]
    } else {
        sweep_contexts(&ctx)
    };
    let mut results: Vec<Option<RunResult>> = (0..runs.len()).map(|_| None).collect();
    let jobs = cli.jobs.min(runs.len()).max(1);
    for (chunk_runs, chunk_out) in runs.chunks(jobs).zip(results.chunks_mut(jobs)) {
        std::thread::scope(|scope| {
            for (c, slot) in chunk_runs.iter().zip(chunk_out.iter_mut()) {
                scope.spawn(move || *slot = Some(run_one(cmd, c)));
            }
        });
    }
    let mut worst: Result<(), CliError> = Ok(());
    for (text, verdict) in results.into_iter().flatten() {
        if let Some(t) = text {
            println!("{t}");
        }
        if let Err(e) = verdict {
            eprintln!("error: {e}");
            let replace = match &worst {
                Ok(()) => true,
                Err(w) => e.exit_code() > w.exit_code(),
            };
            if replace {
                worst = Err(e);
            }
        }
    }
    worst.map_err(|e| CliError::Reported(e.exit_code()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.print_schema {
        print!("{SCHEMA}");
        return ExitCode::SUCCESS;
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::Reported(_)) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
