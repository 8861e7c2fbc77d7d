//! Command-line front end: JSON configuration in, CSV/JSON data and SVG
//! plots out.
//!
//! Exit codes: 0 pass, 1 fail, 2 inconclusive, 3 usage or config error,
//! 4 numerical abort.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, Outcome};

use commands::Log;
use output::{write_atomic, OutDir};
use plot::PlotStyle;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "FOLIFLOW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "foliflow", version, about = "Angle-field evolution and curve shortening flow of plane foliations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stationary residual of the configured field.
    Residual(RunArgs),
    /// Evolve the initial angle field with the explicit scheme.
    SolvePde(RunArgs),
    /// Trace foliation sheets through the seeds and tabulate their defects.
    Reconstruct(RunArgs),
    /// Flow leaves through the seeds by curve shortening.
    FlowCurves(RunArgs),
    /// Compare the PDE solution against flowed and re-extracted leaves.
    CrossValidate(RunArgs),
    /// Render CSV outputs as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed point "x,y"; repeatable, replaces the config's seeds.
    #[arg(long = "seed", value_parser = parse_seed, allow_hyphen_values = true)]
    pub seeds: Vec<[f64; 2]>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// CSV files written by the other commands.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Directory for the SVGs; by default each lands next to its input.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Canvas width in pixels.
    #[arg(long, default_value_t = 800)]
    pub width: u32,
    /// Stroke width in data units.
    #[arg(long)]
    pub stroke_width: Option<f64>,
    #[arg(long)]
    pub quiet: bool,
}

fn parse_seed(s: &str) -> Result<[f64; 2], String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected \"x,y\", got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<f64>().ok().filter(|v| v.is_finite());
    match (p(x), p(y)) {
        (Some(x), Some(y)) => Ok([x, y]),
        _ => Err(format!("expected two finite numbers \"x,y\", got {s:?}")),
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if !args.seeds.is_empty() {
        cfg.seeds = args.seeds.clone();
        cfg.validate().map_err(|(_, msg)| CliError::Config(format!("--seed: {msg}")))?;
    }
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &RunConfig) -> Result<OutDir, CliError> {
    let root = args
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("foliflow-out"));
    OutDir::new(root)
}

fn plot(args: &PlotArgs) -> Result<Outcome, CliError> {
    if let Some(w) = args.stroke_width {
        if !(w > 0.0 && w.is_finite()) {
            return Err(CliError::Usage(format!("--stroke-width must be positive, got {w}")));
        }
    }
    let style = PlotStyle { width_px: args.width.max(1), stroke_width: args.stroke_width };
    let log = Log { quiet: args.quiet };
    for input in &args.inputs {
        let svg = plot::render_file(input, style)?;
        let target = match &args.out {
            Some(dir) => {
                let stem = input.file_stem().unwrap_or_default();
                dir.join(stem).with_extension("svg")
            }
            None => input.with_extension("svg"),
        };
        write_atomic(&target, svg.as_bytes())?;
        log.say(format!("plot: {}", target.display()));
    }
    Ok(Outcome::Pass)
}

/// Runs a parsed command on the current rayon pool.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let (args, f): (&RunArgs, fn(&RunConfig, &mut OutDir, Log) -> Result<Outcome, CliError>) = match &cli.command {
        Command::Plot(p) => return plot(p),
        Command::Residual(a) => (a, commands::residual),
        Command::SolvePde(a) => (a, commands::solve_pde),
        Command::Reconstruct(a) => (a, commands::reconstruct),
        Command::FlowCurves(a) => (a, commands::flow_curves),
        Command::CrossValidate(a) => (a, commands::cross_validate),
    };
    let cfg = load(args)?;
    let mut out = out_dir(args, &cfg)?;
    f(&cfg, &mut out, Log { quiet: args.quiet })
}

/// Worker cap from [`THREADS_ENV`], if set.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    let result = thread_cap().and_then(|cap| match cap {
        None => run(&cli),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} workers: {e}")))?
            .install(|| run(&cli)),
    });
    match result {
        Ok(outcome) => outcome.exit_code(),
        Err(e) => {
            eprintln!("foliflow: {e}");
            e.exit_code()
        }
    }
}
