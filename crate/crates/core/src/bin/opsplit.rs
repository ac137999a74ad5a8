use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opsplit::cli::{self, CellStatus, CliError, ExitStatus, RunConfig, OUTPUT_DIR_ENV};

/// Operator-splitting experiments: fused Lasso, sparse-view CT, LRTV super-resolution.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (preset, solver, J, eps) cell of a TOML configuration.
    Run {
        config: PathBuf,
    },
    /// Run a self-check suite: prox, operators, equivalence or all.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the default configuration of fused-lasso, constrained-tv-ct or lrtv-sr.
    PrintDefaultConfig {
        experiment: String,
    },
}

fn execute(command: Command) -> Result<ExitStatus, CliError> {
    match command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let dir = cli::resolve_output_dir(&cfg.output_dir, std::env::var_os(OUTPUT_DIR_ENV));
            let report = cli::run(&cfg, &dir)?;
            for o in &report.outcomes {
                let iters = match o.status {
                    CellStatus::Converged => o.iterations.to_string(),
                    CellStatus::MaxIter => "MAXITER".into(),
                    CellStatus::Diverged => format!("diverged at {}", o.iterations),
                };
                println!(
                    "{:<8} {:<14} J={:<3} eps={:<6e} iters={iters:<10} objective={:.10e} snr={}",
                    o.cell.preset.name(),
                    o.cell.solver.name(),
                    o.cell.inner_iters,
                    o.cell.eps,
                    o.final_objective,
                    o.snr_db.map_or("-".into(), |s| format!("{s:.4}"))
                );
            }
            println!("summary: {}", report.summary_path.display());
            Ok(report.status())
        }
        Command::Verify { suite, seed } => {
            let (checks, status) = cli::run_verify(&suite, seed)?;
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} checks, {failed} failed", checks.len());
            Ok(status)
        }
        Command::PrintDefaultConfig { experiment } => {
            print!("{}", cli::print_default_config(&experiment)?);
            Ok(ExitStatus::Ok)
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let status = execute(args.command).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.status
    });
    ExitCode::from(status.code() as u8)
}
