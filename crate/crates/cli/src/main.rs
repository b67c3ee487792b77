//! `spinmarket` — reproducible spin-market pipeline.
//!
//! Subcommands mirror the pipeline stages: `simulate` runs the lattice and
//! writes the per-day tables, `analyze` turns a finished run directory into
//! moment estimates and fits, `theory` tabulates the exact finite-sample
//! law, `oracle` validates the whole analysis chain on synthetic Gaussian
//! data, and `report` renders a saved summary as a comparison table.
//!
//! Exit status: 0 on success, 1 for configuration/usage errors (including
//! malformed inputs), 2 for runtime failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinmarket::config::{InitMode, RngId, RunConfig, OUTPUT_DIR_ENV};
use spinmarket::pipeline::{self, AnalyzeOptions};

#[derive(Parser)]
#[command(
    name = "spinmarket",
    version,
    about = "Spin-market simulator with realized-volatility moment analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the lattice simulation and write daily return / RV tables.
    Simulate(SimulateArgs),
    /// Compute moments and fits from a completed simulation directory.
    Analyze(AnalyzeArgs),
    /// Tabulate the exact finite-sample density and its moments.
    Theory(TheoryArgs),
    /// Check the analysis chain against synthetic Gaussian data.
    Oracle(OracleArgs),
    /// Render a saved summary as a theory-vs-measured table.
    Report(ReportArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML config file; defaults fill in any missing key.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Lattice side length (the lattice has L x L sites).
    #[arg(short = 'L', long, value_name = "SIDE")]
    side: Option<usize>,
    /// Inverse temperature.
    #[arg(long)]
    beta: Option<f64>,
    /// Global feedback strength.
    #[arg(long)]
    alpha: Option<f64>,
    /// Nearest-neighbor coupling J.
    #[arg(short = 'J', long)]
    coupling: Option<f64>,
    /// Log-price scale.
    #[arg(long)]
    lambda: Option<f64>,
    /// Initial spin configuration: "ordered" or "random".
    #[arg(long)]
    init_mode: Option<InitMode>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// RNG family: "chacha8", "chacha12" or "chacha20".
    #[arg(long)]
    rng_id: Option<RngId>,
    /// Sweeps discarded before measurement.
    #[arg(long)]
    thermalization_sweeps: Option<usize>,
    /// Sweeps recorded as trading days.
    #[arg(long)]
    measurement_sweeps: Option<usize>,
    /// Comma-separated intraday sampling intervals in ticks.
    #[arg(long, value_delimiter = ',', value_name = "DT,DT,...")]
    delta_t_grid: Option<Vec<usize>>,
    /// Inclusive fit window as "LO,HI" in ticks.
    #[arg(long, value_parser = parse_fit_range, value_name = "LO,HI")]
    fit_range: Option<(usize, usize)>,
    /// Days per jackknife block.
    #[arg(long)]
    jackknife_block: Option<usize>,
    /// Output directory (SPINMARKET_OUTPUT_DIR overrides).
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Also dump every spin sum as little-endian i16 (small lattices only).
    #[arg(long)]
    tick_dump: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Directory written by `simulate`.
    #[arg(long, value_name = "DIR")]
    input_dir: PathBuf,
    /// Where to write analysis artifacts (default: the input directory;
    /// SPINMARKET_OUTPUT_DIR overrides).
    #[arg(long, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Override the fit window as "LO,HI" in ticks.
    #[arg(long, value_parser = parse_fit_range, value_name = "LO,HI")]
    fit_range: Option<(usize, usize)>,
    /// Override the jackknife block length in days.
    #[arg(long)]
    jackknife_block: Option<usize>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Comma-separated intervals-per-day values to tabulate.
    #[arg(long, value_delimiter = ',', required = true, value_name = "N,N,...")]
    n_values: Vec<u64>,
    /// Highest moment half-order to tabulate (moments up to x^(2k)).
    #[arg(long, default_value_t = 5)]
    k_max: u32,
    /// Sample count for each density curve.
    #[arg(long, default_value_t = 201)]
    density_points: usize,
    /// Output directory (SPINMARKET_OUTPUT_DIR overrides).
    #[arg(long, value_name = "DIR", default_value = "theory_out")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Comma-separated intervals-per-day values to test.
    #[arg(long, value_delimiter = ',', required = true, value_name = "N,N,...")]
    n: Vec<u64>,
    /// Synthetic days per n value.
    #[arg(long, default_value_t = 100_000)]
    days: usize,
    /// Interval-return standard deviation (results are sigma-free).
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// RNG seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Days per jackknife block.
    #[arg(long, default_value_t = 100)]
    block: usize,
    /// Output directory (SPINMARKET_OUTPUT_DIR overrides).
    #[arg(long, value_name = "DIR", default_value = "oracle_out")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Path to a summary.json written by `analyze`.
    #[arg(long, value_name = "FILE")]
    summary: PathBuf,
}

fn parse_fit_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected \"LO,HI\", got \"{s}\""))?;
    let lo = lo
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("bad fit-range low end \"{lo}\": {e}"))?;
    let hi = hi
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("bad fit-range high end \"{hi}\": {e}"))?;
    Ok((lo, hi))
}

/// The output-directory environment override, when set and non-empty.
fn env_output_dir() -> Option<PathBuf> {
    match std::env::var(OUTPUT_DIR_ENV) {
        Ok(dir) if !dir.is_empty() => Some(PathBuf::from(dir)),
        _ => None,
    }
}

fn cmd_simulate(args: SimulateArgs) -> spinmarket::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = args.side {
        cfg.side = v;
    }
    if let Some(v) = args.beta {
        cfg.beta = v;
    }
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.coupling {
        cfg.coupling = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.init_mode {
        cfg.init_mode = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.rng_id {
        cfg.rng_id = v;
    }
    if let Some(v) = args.thermalization_sweeps {
        cfg.thermalization_sweeps = v;
    }
    if let Some(v) = args.measurement_sweeps {
        cfg.measurement_sweeps = v;
    }
    if let Some(v) = args.delta_t_grid {
        cfg.delta_t_grid = v;
    }
    if let Some(v) = args.fit_range {
        cfg.fit_range = v;
    }
    if let Some(v) = args.jackknife_block {
        cfg.jackknife_block = v;
    }
    if let Some(v) = args.output_dir {
        cfg.output_dir = v;
    }
    if args.tick_dump {
        cfg.tick_dump = true;
    }
    cfg.apply_env_override();
    cfg.validate()?;

    let run = pipeline::simulate_to_dir(&cfg)?;
    for w in &run.manifest.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "simulated {} days on a {}x{} lattice (seed {})",
        run.table.n_days(),
        cfg.side,
        cfg.side,
        cfg.seed
    );
    for out in &run.manifest.outputs {
        println!("wrote {}", cfg.output_dir.join(&out.path).display());
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> spinmarket::Result<()> {
    let opts = AnalyzeOptions {
        fit_range: args.fit_range,
        jackknife_block: args.jackknife_block,
        output_dir: env_output_dir().or(args.output_dir),
    };
    let out_dir = opts
        .output_dir
        .clone()
        .unwrap_or_else(|| args.input_dir.clone());
    let run = pipeline::analyze_to_dir(&args.input_dir, &opts)?;
    for w in &run.analysis.warnings {
        eprintln!("warning: {w}");
    }
    if let Some((value, stderr)) = run.analysis.variance_dt1 {
        println!("variance at delta_t = 1: {value} +- {stderr}");
    }
    for fit in &run.analysis.fits {
        println!(
            "k = {}: C = {} +- {} (chi2/dof = {:.3})",
            fit.k,
            fit.amplitude,
            fit.amplitude_err,
            fit.chi2 / fit.dof.max(1) as f64
        );
    }
    for out in &run.manifest.outputs {
        println!("wrote {}", out_dir.join(&out.path).display());
    }
    Ok(())
}

fn cmd_theory(args: TheoryArgs) -> spinmarket::Result<()> {
    let out_dir = env_output_dir().unwrap_or(args.output_dir);
    pipeline::theory_to_dir(&args.n_values, args.k_max, args.density_points, &out_dir)?;
    println!(
        "tabulated {} n values up to k = {} -> {}",
        args.n_values.len(),
        args.k_max,
        out_dir.display()
    );
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> spinmarket::Result<()> {
    let out_dir = env_output_dir().unwrap_or(args.output_dir);
    let outcome = pipeline::oracle_to_dir(
        &args.n,
        args.days,
        args.sigma,
        args.seed,
        args.block,
        &out_dir,
    )?;
    println!(
        "oracle over n = {:?}, {} days each: max |deviation| = {:.3} sigma",
        args.n, args.days, outcome.max_abs_deviation_sigma
    );
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> spinmarket::Result<()> {
    print!("{}", pipeline::report(&args.summary)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are successes; anything else is a
            // usage failure and exits 1 per the pipeline's convention.
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            err.print().expect("cannot write to stderr");
            return ExitCode::from(code);
        }
    };

    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Theory(args) => cmd_theory(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_usage() { 1 } else { 2 })
        }
    }
}
