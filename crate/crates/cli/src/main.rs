//! `ptlstep`: run time-stepping experiments and the stability/speedup/convergence
//! analyses, writing CSV.

mod config;
mod experiment;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ptlstep::analysis::{amplification_sweep, convergence_study, speedup_table, AmpScheme, ConvergencePreset};
use ptlstep::io::{write_amplification, write_speedup};
use ptlstep::{SchemeConfig, SchemeKind};

use config::{ConfigError, Source};
use experiment::Experiment;

#[derive(Debug, Parser)]
#[command(name = "ptlstep", version, about = "Stiff diffusion time stepping with PTL cycling")]
struct Cli {
    /// Worker threads (default: all cores). Runs are bit-reproducible with 1.
    #[arg(long, global = true, env = "PTLSTEP_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config; writes the final fields
    /// and the per-cycle report into the config's output directory.
    Run {
        config: PathBuf,
        /// Suppress the per-step summary.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Amplification factor versus mode angle θ ∈ (0, π] at a fixed ratio r = Δt/Δt_euler.
    Ampfactor {
        /// Comma-separated: euler, be, rkl2, rkg2, rkg2-even, exact.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        schemes: Vec<AmpScheme>,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 512)]
        n_theta: usize,
    },
    /// Estimated STS speedup r/s over Euler for every integer r in [rmin, rmax].
    Speedup {
        #[arg(long)]
        rmin: u64,
        #[arg(long)]
        rmax: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "rkl2,rkg2")]
        schemes: Vec<SchemeKind>,
    },
    /// Temporal convergence study on a preset problem; prints the fitted order.
    Convergence {
        /// euler, be, rkl2 or rkg2.
        #[arg(long)]
        scheme: SchemeKind,
        /// heat1d or aniso2d.
        #[arg(long)]
        problem: ConvergencePreset,
        /// Comma-separated step counts (default: a preset-specific ladder of 4 halvings).
        #[arg(long, value_delimiter = ',')]
        steps: Vec<usize>,
        /// CSV of `n_steps,dt,error`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Usage(String),
    Numeric(ptlstep::Error),
    Io(io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numeric(e) => write!(f, "error: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ptlstep::Error> for CliError {
    fn from(e: ptlstep::Error) -> Self {
        match e {
            ptlstep::Error::Io(e) => CliError::Io(e),
            e => CliError::Numeric(e),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Numeric(_) => 1,
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, quiet } => {
            let src = Source::read(&config).map_err(CliError::Config)?;
            let cfg = src.parse().map_err(CliError::Config)?;
            let exp = Experiment::from_config(&cfg, &src)?;
            let outer_dt = exp.outer_dt;
            let summary = exp.run(|k, r| {
                if !quiet {
                    println!(
                        "step {k}: {} cycles, {} stages/iterations, dt_euler {:e}, outer_dt {:e}",
                        r.n_cycles(),
                        r.total_iters(),
                        r.dt_euler,
                        outer_dt
                    );
                }
            })?;
            if !quiet {
                println!(
                    "total: {} cycles, simulated time {:e}",
                    summary.report.n_cycles(),
                    summary.report.total_dt()
                );
                for p in &summary.written {
                    println!("wrote {}", p.display());
                }
            }
        }
        Command::Ampfactor { schemes, r, out, n_theta } => {
            if !(r > 0.0 && r.is_finite()) {
                return Err(CliError::Usage(format!("--r must be positive, got {r}")));
            }
            let rows = amplification_sweep(&schemes, r, n_theta).map_err(|e| CliError::Usage(e.to_string()))?;
            write_amplification(&rows, File::create(&out)?)?;
        }
        Command::Speedup { rmin, rmax, out, schemes } => {
            let rows = speedup_table(&schemes, rmin, rmax).map_err(|e| CliError::Usage(e.to_string()))?;
            write_speedup(&rows, File::create(&out)?)?;
        }
        Command::Convergence { scheme, problem, steps, out } => {
            let steps = if steps.is_empty() { problem.default_steps(scheme) } else { steps };
            if steps.len() < 2 || steps.contains(&0) {
                return Err(CliError::Usage("need at least two positive step counts".into()));
            }
            let prob = problem.build()?;
            let res = convergence_study(&SchemeConfig::new(scheme), &prob, &steps)?;
            if let Some(out) = out {
                let mut w = io::BufWriter::new(File::create(&out)?);
                writeln!(w, "n_steps,dt,error")?;
                for ((n, dt), e) in steps.iter().zip(&res.dts).zip(&res.errors) {
                    writeln!(w, "{n},{dt:?},{e:?}")?;
                }
                w.flush()?;
            }
            println!("scheme {} problem {problem}", scheme.name());
            for (dt, e) in res.dts.iter().zip(&res.errors) {
                println!("  dt {dt:e}  error {e:e}");
            }
            println!("order {:.4}", res.order);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
