use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use senstune_cli::run::{self, RunOptions};
use senstune_cli::CliError;

#[derive(Parser)]
#[command(
    name = "senstune",
    version,
    about = "Gradient-based controller tuning by sensitivity propagation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long)]
    workers: Option<usize>,
    /// Override sim.seed
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            out: self.out.clone(),
            workers: self.workers,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tune the gains on the training trajectories
    Tune {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep the uncertainty grid with every ablation
    Grid {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate fixed gains on the evaluation trajectories
    Eval {
        #[command(flatten)]
        common: Common,
        /// theta.json from a tuning run (default: tune.theta0)
        #[arg(long)]
        theta: Option<PathBuf>,
    },
    /// Check the sensitivity gradient against finite differences and the reverse pass
    VerifyGradient {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        theta: Option<PathBuf>,
        /// Finite-difference step
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Dump one rollout step by step
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        theta: Option<PathBuf>,
        /// Index into the training trajectories
        #[arg(long, default_value_t = 0)]
        trajectory: usize,
        /// Also write sensitivity.csv
        #[arg(long)]
        sensitivity: bool,
    },
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Tune { common } => {
            let out = run::cmd_tune(&common.config, &common.options())?;
            let last = out.history.last().map(|it| it.loss).unwrap_or(f64::NAN);
            println!(
                "{} iterations, stop {:?}, final loss {last:.6e}, best iteration {:?}",
                out.history.len(),
                out.stop,
                out.best_iteration
            );
        }
        Command::Grid { common } => {
            let rows = run::cmd_grid(&common.config, &common.options())?;
            let bad = rows.iter().filter(|r| r.status != "ok").count();
            println!("{} jobs, {bad} diverged or failed", rows.len());
        }
        Command::Eval { common, theta } => {
            let rows = run::cmd_eval(&common.config, theta.as_deref(), &common.options())?;
            for r in rows {
                match r.evaluation {
                    Some(e) => println!(
                        "{:<12} loss {:.6e} rmse {:.4}",
                        r.trajectory, e.loss, e.rmse
                    ),
                    None => println!("{:<12} {}", r.trajectory, r.status),
                }
            }
        }
        Command::VerifyGradient { common, theta, eps } => {
            let report =
                run::cmd_verify_gradient(&common.config, theta.as_deref(), eps, &common.options())?;
            for c in &report.checks {
                println!(
                    "{:<12} fd {:.3e} reverse {:.3e}",
                    c.trajectory, c.max_rel_error_fd, c.max_rel_error_reverse
                );
            }
            println!("{}", if report.passed { "PASS" } else { "FAIL" });
            if !report.passed {
                return Err(CliError::Other("gradient check failed".into()));
            }
        }
        Command::Simulate {
            common,
            theta,
            trajectory,
            sensitivity,
        } => {
            let loss = run::cmd_simulate(
                &common.config,
                theta.as_deref(),
                trajectory,
                sensitivity,
                &common.options(),
            )?;
            println!("loss {loss:.6e}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
