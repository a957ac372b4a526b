//! `rankone`: certificates, laminates, synthesis, analysis and lifts.
//!
//! Exit codes: 0 success, 1 negative mathematical result, 2 invalid input
//! or any other error (reported as JSON on stderr).

mod cmd;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "rankone", version, about = "Split-matrix certificates, laminates and convex integration")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// TOML or JSON run configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: $RANKONE_OUT, else stdout only).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    depth: Option<usize>,
    #[arg(long, global = true)]
    cell_budget: Option<usize>,
    /// Cells per axis for analyzer and lift grids.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Algebraic tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    no_svg: bool,
    #[arg(long, global = true)]
    no_csv: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// T_N configurations.
    #[command(subcommand)]
    Tn(cmd::tn::TnCmd),
    /// Laminates of finite order.
    #[command(subcommand)]
    Laminate(cmd::lam::LamCmd),
    /// Piecewise-affine realization of a splitting tree.
    #[command(subcommand)]
    Synth(cmd::synth::SynthCmd),
    /// Gradient-field statistics for map families.
    #[command(subcommand)]
    Analyze(cmd::analyze::AnalyzeCmd),
    /// Contact lifts to the Heisenberg group.
    #[command(subcommand)]
    Heis(cmd::heis::HeisCmd),
    /// Recompute the minor-estimate constants.
    Calibrate(cmd::calibrate::CalibrateArgs),
}

/// Successful outcome of a command.
pub enum Outcome {
    Ok,
    /// A well-posed question answered in the negative.
    Negative,
}

#[derive(Serialize)]
struct ErrorReport {
    schema_version: u32,
    error: String,
    message: String,
}

fn fail(kind: &str, message: String) -> ExitCode {
    let r = ErrorReport { schema_version: output::SCHEMA_VERSION, error: kind.to_string(), message };
    eprintln!("{}", serde_json::to_string(&r).expect("error report serializes"));
    ExitCode::from(2)
}

/// argv without the program name, the output directory and the thread cap,
/// so the manifest depends on neither.
fn recorded_command() -> Vec<String> {
    let mut out = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--out" || a == "--threads" {
            args.next();
        } else if !a.starts_with("--out=") && !a.starts_with("--threads=") {
            out.push(a);
        }
    }
    out
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    let g = cli.global;
    let flags = Overrides {
        delta: g.delta,
        depth: g.depth,
        cell_budget: g.cell_budget,
        grid: g.grid,
        seed: g.seed,
        threads: g.threads,
        tol: g.tol,
        out: g.out,
        no_svg: g.no_svg,
        no_csv: g.no_csv,
    };
    let cfg = RunConfig::load(g.config.as_deref(), &flags)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global()?;
    }
    let mut sink = output::Sink::new(&cfg, recorded_command());
    let outcome = match cli.command {
        Command::Tn(c) => cmd::tn::run(c, &cfg, &mut sink)?,
        Command::Laminate(c) => cmd::lam::run(c, &cfg, &mut sink)?,
        Command::Synth(c) => cmd::synth::run(c, &cfg, &mut sink)?,
        Command::Analyze(c) => cmd::analyze::run(c, &cfg, &mut sink)?,
        Command::Heis(c) => cmd::heis::run(c, &cfg, &mut sink)?,
        Command::Calibrate(a) => cmd::calibrate::run(a, &cfg, &mut sink)?,
    };
    sink.finish()?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_string()),
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e) => match e.downcast_ref::<rankone_core::Error>() {
            Some(le) => fail(le.kind(), format!("{e:#}")),
            None => fail("error", format!("{e:#}")),
        },
    }
}
