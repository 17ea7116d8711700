use clap::{Args, Parser, Subcommand};
use nelson::config::ExperimentConfig;
use nelson::report::{gnuplot_script, ResultTable};
use nelson::{run, NelsonError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical experiments for a confined particle coupled to a massive
/// variable-coefficient boson field.
#[derive(Parser)]
#[command(name = "nelson", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct RunArgs {
    /// experiment configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// output directory for CSV tables
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// override the solver seed from the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// size of the worker thread pool (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest eigenpairs of the full Hamiltonian with diagnostics
    Groundstate(RunArgs),
    /// Infrared cutoff sweep (sigma) or mass-decay sweep (p)
    IrSweep(RunArgs),
    /// Truncation sweep over n_max, modes or grid resolution
    Convergence(RunArgs),
    /// Heat-kernel and operator bound checks
    Verify(RunArgs),
    /// Ground energy of the exterior-restricted Hamiltonian vs radius
    Ionization(RunArgs),
    /// Emit a gnuplot script for an existing result CSV
    Plot {
        /// CSV file produced by another subcommand
        csv: PathBuf,
    },
}

/// 0 = pass, 1 = a verified bound or invariant failed, 2 = invalid
/// configuration, 3 = a solver failed to converge.
fn exit_for(err: &NelsonError) -> u8 {
    match err {
        NelsonError::Config(_) | NelsonError::InvalidGrid(_) => 2,
        NelsonError::NoConvergence { .. } | NelsonError::CgNoConvergence { .. } => 3,
        _ => 1,
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, NelsonError> {
    let cfg = ExperimentConfig::from_file(&args.config)?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn emit(tables: &[ResultTable], out: &PathBuf) -> Result<(), NelsonError> {
    for t in tables {
        let path = t.write_csv(out)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn with_pool<T>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T, NelsonError> + Send,
) -> Result<T, NelsonError>
where
    T: Send,
{
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| NelsonError::Config(format!("worker pool: {e}")))?;
            pool.install(f)
        }
        None => f(),
    }
}

fn run_cmd(cmd: &Command) -> Result<u8, NelsonError> {
    match cmd {
        Command::Groundstate(args) => {
            let cfg = load_config(args)?;
            let seed = args.seed.unwrap_or(cfg.solver.seed);
            let table = with_pool(args.workers, || run::run_groundstate(&cfg, seed))?;
            println!(
                "ground energy = {:.12e}",
                table.rows.first().map(|r| r[1]).unwrap_or(f64::NAN)
            );
            emit(std::slice::from_ref(&table), &args.out)?;
            Ok(0)
        }
        Command::IrSweep(args) => {
            let cfg = load_config(args)?;
            let seed = args.seed.unwrap_or(cfg.solver.seed);
            let table = with_pool(args.workers, || run::run_ir_sweep(&cfg, seed))?;
            emit(std::slice::from_ref(&table), &args.out)?;
            Ok(0)
        }
        Command::Convergence(args) => {
            let cfg = load_config(args)?;
            let seed = args.seed.unwrap_or(cfg.solver.seed);
            let (table, monotone) =
                with_pool(args.workers, || run::run_convergence(&cfg, seed))?;
            emit(std::slice::from_ref(&table), &args.out)?;
            if !monotone {
                eprintln!("FAIL: energy is not monotone in the truncation parameter");
                return Ok(1);
            }
            Ok(0)
        }
        Command::Verify(args) => {
            let cfg = load_config(args)?;
            let seed = args.seed.unwrap_or(cfg.solver.seed);
            let (tables, all_passed) = with_pool(args.workers, || run::run_verify(&cfg, seed))?;
            emit(&tables, &args.out)?;
            if let Some(summary) = tables.last() {
                for note in &summary.notes {
                    println!("{note}");
                }
            }
            Ok(if all_passed { 0 } else { 1 })
        }
        Command::Ionization(args) => {
            let cfg = load_config(args)?;
            let seed = args.seed.unwrap_or(cfg.solver.seed);
            let table = with_pool(args.workers, || run::run_ionization(&cfg, seed))?;
            emit(std::slice::from_ref(&table), &args.out)?;
            Ok(0)
        }
        Command::Plot { csv } => {
            let script = gnuplot_script(csv)?;
            println!("wrote {}", script.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_cmd(&cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
