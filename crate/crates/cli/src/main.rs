use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bsfl::experiment::{compare_optimizers, load_config, run_experiment, write_race, RunOverrides};
use bsfl::optimizer::binomial;

#[derive(Parser)]
#[command(name = "bsfl", version, about = "Federated client-scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (policy, seed) pair and write metrics, summary and plots.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// SA versus ALSA energy race over random score tables (`race` section).
    CompareOptimizers {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct Flags {
    /// Overrides the config's output_dir (default: results).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long)]
    parallelism: Option<usize>,
    /// Skip SVG output.
    #[arg(long)]
    no_plots: bool,
}

impl Flags {
    fn overrides(&self) -> Result<RunOverrides> {
        if self.parallelism == Some(0) {
            bail!("--parallelism must be at least 1");
        }
        Ok(RunOverrides {
            output_dir: self.output_dir.clone(),
            parallelism: self.parallelism,
            no_plots: self.no_plots,
        })
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, flags } => {
            let cfg = load(&config)?;
            let ov = flags.overrides()?;
            let (summary, _) = run_experiment(&cfg, &ov)?;
            let dir = ov.output_dir(&cfg);
            println!("{:<24} {:>6} {:>9} {:>14} {:>12}", "policy", "seed", "rounds", "regret", "test_loss");
            for r in &summary.runs {
                println!(
                    "{:<24} {:>6} {:>9} {:>14} {:>12}",
                    r.policy,
                    r.seed,
                    r.rounds_completed,
                    r.final_regret.map_or("-".into(), |v| format!("{v:.3}")),
                    r.final_loss.map_or("-".into(), |v| format!("{v:.5}")),
                );
            }
            println!("wrote {} ({:.1}s)", dir.display(), summary.wall_seconds);
        }
        Command::CompareOptimizers { config, flags } => {
            let cfg = load(&config)?;
            let Some(race) = &cfg.race else {
                bail!("invalid config field `race`: compare-optimizers needs a race section");
            };
            let ov = flags.overrides()?;
            let report = compare_optimizers(race, ov.workers())?;
            let dir = ov.output_dir(&cfg);
            write_race(&dir, &report, ov.no_plots)?;
            println!(
                "{} instances, K={} m={} steps={}: ALSA wins {}, ties {}, SA wins {} (ALSA >= SA in {:.1}%)",
                race.instances,
                race.num_clients,
                race.num_channels,
                race.steps,
                report.alsa_wins,
                report.ties,
                report.sa_wins,
                100.0 * report.alsa_win_or_tie_rate
            );
            if let (Some(s), Some(a)) = (report.sa_exact_hits, report.alsa_exact_hits) {
                println!("exact optimum reached: SA {s}, ALSA {a}");
            }
            println!("wrote {}", dir.join("race").display());
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let s = &cfg.scenario;
            println!(
                "ok: K={} m={} ({} candidate sets), {} policies, {} seeds",
                s.num_clients,
                s.num_channels,
                binomial(s.num_clients, s.num_channels),
                cfg.policies.len(),
                cfg.seeds.len()
            );
        }
    }
    Ok(())
}

fn load(path: &std::path::Path) -> Result<bsfl::experiment::ExperimentConfig> {
    load_config(path).with_context(|| format!("{}", path.display()))
}
