use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use trafficlab::charts::render_charts;
use trafficlab::compare::{compare_dirs, summary_text, write_report};
use trafficlab::experiment::{run_experiment, ExperimentConfig, Mode};
use trafficlab::train::{run_training, TrainConfig, DESK_CONFIG, MAIN_CONFIG};
use trafficlab_core::{ExecMode, Scenario};

/// Real-time factor the engine is expected to sustain on the main preset.
const TARGET_SPEEDUP: f64 = 20.0;

#[derive(Parser)]
#[command(name = "trafficlab", version, about = "Traffic signal control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a scenario's road network, report on it and optionally save it
    Gen {
        /// Preset name or scenario TOML
        #[arg(long, default_value = "main")]
        scenario: String,
        /// Overrides the city generator seed
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the network JSON
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run episodes and write per-seed metrics
    Run {
        /// Experiment TOML; the flags below are used when it is absent
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "main")]
        scenario: String,
        /// Trained checkpoint; without one the baseline runs
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Comma-separated seeds
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
        seeds: Vec<u64>,
        /// Run exactly this seed instead of the list
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out/run")]
        out: PathBuf,
        /// Run everything on the calling thread
        #[arg(long)]
        sequential: bool,
        /// Record the world hash every N ticks in each seed's hashes.csv
        #[arg(long)]
        hash_every: Option<u64>,
    },
    /// Train a policy
    Train {
        /// Training TOML; `desk` and `main` name the bundled configs
        #[arg(long, default_value = "desk")]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Compare two run directories and draw charts
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "out/compare")]
        out: PathBuf,
    },
}

fn exec(sequential: bool) -> ExecMode {
    if sequential {
        ExecMode::Sequential
    } else {
        ExecMode::default()
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen { scenario, seed, out } => {
            let mut sc = Scenario::resolve(&scenario)?;
            if let (Some(s), trafficlab_core::scenario::NetworkSpec::City { seed: city_seed, .. }) = (seed, &mut sc.network) {
                *city_seed = s;
            }
            let net = sc.build_network()?;
            let report = net.validate();
            println!(
                "{}: {} containers, {} signals, {} obstacles, valid: {}",
                sc.name,
                net.containers.len(),
                net.signals.len(),
                net.obstacles.len(),
                report.is_valid()
            );
            if let Some(out) = out {
                net.save(&out)?;
                println!("wrote {}", out.display());
            }
        }
        Command::Run { config, scenario, checkpoint, seeds, seed, out, sequential, hash_every } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(&p)?,
                None => ExperimentConfig {
                    scenario,
                    mode: checkpoint.map_or(Mode::Baseline, |checkpoint| Mode::Policy { checkpoint }),
                    seeds,
                    output: out,
                    duration: None,
                    sequential,
                    hash_every,
                },
            };
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if hash_every.is_some() {
                cfg.hash_every = hash_every;
            }
            let summaries = run_experiment(&cfg)?;
            for s in &summaries {
                println!(
                    "seed {}: reward {:.4} serious {} vv {} vnv {} removed {}/{} speedup {:.1}x hash {:016x}",
                    s.seed, s.reward, s.serious, s.vv, s.vnv, s.removed, s.spawned, s.speedup, s.hash
                );
                if !s.accounting_ok {
                    eprintln!("warning: accounting identities failed for seed {}", s.seed);
                }
                if s.speedup < TARGET_SPEEDUP {
                    eprintln!("warning: seed {} ran at {:.1}x real time, below {TARGET_SPEEDUP}x", s.seed, s.speedup);
                }
            }
            println!("wrote {}", cfg.output.display());
        }
        Command::Train { config, seed, output, sequential } => {
            let mut cfg = match config.as_str() {
                "desk" => TrainConfig::from_toml(DESK_CONFIG)?,
                "main" => TrainConfig::from_toml(MAIN_CONFIG)?,
                path => TrainConfig::load(std::path::Path::new(path))?,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = output {
                cfg.output = o;
            }
            let outcome = run_training(&cfg, exec(sequential))?;
            for row in &outcome.log {
                println!(
                    "step {:>9} episodes {:>6} reward {:>10.4} policy {:>8.4} value {:>9.4} v {:>8.4} curiosity {:.4}",
                    row.step, row.episodes, row.cumulative_reward, row.policy_loss, row.value_loss, row.value_estimate, row.curiosity_reward
                );
            }
            println!("wrote {}", outcome.final_checkpoint.display());
        }
        Command::Compare { baseline, model, out } => {
            let report = compare_dirs(&baseline, &model).context("comparing runs")?;
            write_report(&report, &out)?;
            let charts = render_charts(&report, &baseline, &model, &out)?;
            print!("{}", summary_text(&report));
            println!("wrote report and {} charts to {}", charts.len(), out.display());
        }
    }
    Ok(())
}
