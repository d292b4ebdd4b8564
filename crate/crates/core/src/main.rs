use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use quasiguide::cli::{cmd_solve, cmd_validate, Case, RunConfig, ValidateOptions};

#[derive(Parser)]
#[command(
    name = "quasiguide",
    version,
    about = "Transmission problems between periodic half-planes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to SOLVER_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and write u.csv and manifest.
    Solve,
    /// Run a validation case and write its error table.
    Validate {
        /// One of homogeneous, rational, riccati-oracle, oracle3d, invariance-period, invariance-data.
        case: String,
    },
}

fn threads(cli: &Cli) -> anyhow::Result<Option<usize>> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var("SOLVER_THREADS") {
        Ok(v) => {
            Ok(Some(v.trim().parse().with_context(|| {
                format!("invalid SOLVER_THREADS '{v}'")
            })?))
        }
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = threads(&cli)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::Solve => {
            let path = cli.config.as_ref().context("solve needs --config <path>")?;
            let cfg = RunConfig::from_file(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
            let s = cmd_solve(&cfg, &out).context("solve")?;
            println!("wrote {}", out.join("u.csv").display());
            println!(
                "spectral radius {:.6}, riccati residual {:.3e}, decay slope {:.4}, sweep {:.1} s",
                s.max_spectral_radius, s.max_riccati_residual, s.alpha, s.seconds_sweep
            );
            if let Some((e0, e1)) = s.reference_errors {
                println!("eps0 {e0:.4e}, eps1 {e1:.4e}");
            }
            Ok(true)
        }
        Command::Validate { case } => {
            let case: Case = case.parse()?;
            let opts = match &cli.config {
                Some(p) => ValidateOptions::parse(
                    &std::fs::read_to_string(p)
                        .with_context(|| format!("reading {}", p.display()))?,
                )?,
                None => ValidateOptions::default(),
            };
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let report = cmd_validate(case, &opts, &out)
                .with_context(|| format!("validate {}", case.name()))?;
            print!("{}", report.csv());
            for c in &report.checks {
                println!("{}", c.line());
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
