//! CLI for Monte-Carlo sweeps, convergence traces, and solver self-checks.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cran_mm::emit::{emit_convergence_trace, emit_results, hash_bytes};
use cran_mm::sweep::{run_sweep, SweepSpec, SweptParameter};
use cran_mm_core::combining::{build_combiner, Scheme};
use cran_mm_core::config::load_config;
use cran_mm_core::oracle::{grid_search_small, scalar_closed_form, scalar_instance_family};
use cran_mm_core::scenario::ChannelRealization;
use cran_mm_core::mm_solve;

#[derive(Parser)]
#[command(name = "cran-mm", version, about = "Monte-Carlo sweeps for an uplink compress-and-forward network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep one parameter across values, averaging sum-rates over trials.
    Run(RunArgs),
    /// Solve a single instance and emit its iteration-vs-objective trace.
    Converge(ConvergeArgs),
    /// Cross-check the solver against its independent reference solutions.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// System configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Which parameter the sweep varies.
    #[arg(long, value_enum)]
    sweep: SweepAxis,
    /// Comma-separated grid points: dBm for power axes, element counts for nc.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Comma-separated subset of mr,zf.
    #[arg(long, value_delimiter = ',', default_value = "mr,zf")]
    schemes: Vec<SchemeArg>,
    /// Independent channel realizations per cell.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for sweep.csv and sweep_meta.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConvergeArgs {
    /// System configuration JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemeArg::Zf)]
    scheme: SchemeArg,
    /// Directory for convergence.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Which reference to check the solver against.
    #[arg(long, value_enum)]
    check: OracleCheck,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepAxis {
    /// UE transmit power in dBm.
    Pu,
    /// Per-RRH fronthaul power ceiling in dBm.
    Phmax,
    /// CU array elements.
    Nc,
}

impl From<SweepAxis> for SweptParameter {
    fn from(axis: SweepAxis) -> Self {
        match axis {
            SweepAxis::Pu => SweptParameter::PUeDbm,
            SweepAxis::Phmax => SweptParameter::PHMaxDbm,
            SweepAxis::Nc => SweptParameter::NC,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Mr,
    Zf,
}

impl From<SchemeArg> for Scheme {
    fn from(arg: SchemeArg) -> Self {
        match arg {
            SchemeArg::Mr => Scheme::Mr,
            SchemeArg::Zf => Scheme::Zf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleCheck {
    /// Solver versus the single-link closed form, 50 instances.
    Scalar,
    /// Exhaustive grid versus the closed form, 50 instances.
    Grid,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run(args) => run(args),
        Command::Converge(args) => converge(args),
        Command::Oracle(args) => oracle(args),
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let bytes = fs::read(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut base = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    let spec = SweepSpec {
        swept_parameter: args.sweep.into(),
        values: args.values,
        schemes: args.schemes.into_iter().map(Scheme::from).collect(),
        trials: args.trials,
        base,
    };

    let mut result = run_sweep(&spec)?;
    // The sidecar should identify the file the user pointed at, not our
    // re-serialization of it.
    result.config_hash = hash_bytes(&bytes);
    let (csv_path, meta_path) = emit_results(&result, &args.out)?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", meta_path.display());

    let invalid = result.cells.iter().filter(|c| !c.valid).count();
    if invalid > 0 {
        eprintln!("{invalid} cell(s) had no successful trials");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn converge(args: ConvergeArgs) -> Result<ExitCode> {
    let cfg = load_config(&args.config)?;
    let channels = ChannelRealization::sample(&cfg, cfg.seed, 0)?;
    let combiner = build_combiner(&channels.b, &channels.g, args.scheme.into())?;
    let result = mm_solve(&channels, &combiner, &cfg)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join("convergence.csv");
    emit_convergence_trace(&result, &path)?;
    println!(
        "wrote {} ({} iterations, final objective {:.4} bits/s/Hz, {:?})",
        path.display(),
        result.trace.iterations,
        result.sum_rate,
        result.trace.status,
    );
    Ok(ExitCode::SUCCESS)
}

const ORACLE_INSTANCES: usize = 50;
const ORACLE_TOL: f64 = 0.01;

fn oracle(args: OracleArgs) -> Result<ExitCode> {
    let mut worst: f64 = 0.0;
    for instance in scalar_instance_family(ORACLE_INSTANCES, 1) {
        let truth = scalar_closed_form(&instance);
        let (mut cfg, channels) = instance.to_system()?;
        let estimate = match args.check {
            OracleCheck::Scalar => {
                cfg.solver.rel_tol = 1e-8;
                cfg.solver.max_iters = 300;
                let combiner = build_combiner(&channels.b, &channels.g, Scheme::Mr)?;
                mm_solve(&channels, &combiner, &cfg)?.sum_rate
            }
            OracleCheck::Grid => {
                let combiner = build_combiner(&channels.b, &channels.g, Scheme::Mr)?;
                grid_search_small(&channels, &combiner, &cfg, 200)?.objective
            }
        };
        worst = worst.max((estimate - truth.rate).abs() / truth.rate.max(1e-12));
    }

    let name = match args.check {
        OracleCheck::Scalar => "solver vs closed form",
        OracleCheck::Grid => "grid vs closed form",
    };
    if worst > ORACLE_TOL {
        bail!("{name}: worst relative gap {worst:.3e} exceeds {ORACLE_TOL}");
    }
    println!("{name}: worst relative gap {worst:.3e} over {ORACLE_INSTANCES} instances");
    Ok(ExitCode::SUCCESS)
}
