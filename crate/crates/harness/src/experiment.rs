//! Baseline, fixed-action and trained-policy runs over a list of seeds.
//!
//! Each seed writes `seed-<n>/metrics.csv` (one capture at the end of the
//! episode), `collisions.csv`, `signals.csv` and `timeline.csv` (one row per
//! decision window). `summary.csv` collects one row per seed. With
//! `hash_every` set, `hashes.csv` records the world hash at that tick stride.

use anyhow::{bail, ensure, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use trafficlab_core::env::{EnvError, StepOutcome, TrafficEnv};
use trafficlab_core::metrics::{
    collision_rows, fmt6, signal_rows, write_csv, write_metrics_csv, COLLISION_COLUMNS, SIGNAL_COLUMNS,
};
use trafficlab_core::{ExecMode, Scenario, World};
use trafficlab_ppo::{load_checkpoint, Agent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    /// Reset-time draws held for the whole episode, no agent.
    Baseline,
    Policy { checkpoint: PathBuf },
    FixedAction { action: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset name or scenario TOML path.
    pub scenario: String,
    pub mode: Mode,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Overrides the scenario's episode length in seconds.
    #[serde(default)]
    pub duration: Option<f64>,
    #[serde(default)]
    pub sequential: bool,
    /// Writes the world hash every this many ticks to `hashes.csv`.
    #[serde(default)]
    pub hash_every: Option<u64>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.seeds.is_empty(), "experiment needs at least one seed");
        ensure!(self.hash_every != Some(0), "hash_every must be positive");
        if let Mode::Policy { checkpoint } = &self.mode {
            ensure!(checkpoint.is_file(), "checkpoint {} does not exist", checkpoint.display());
        }
        Ok(())
    }

    pub fn exec(&self) -> ExecMode {
        if self.sequential {
            ExecMode::Sequential
        } else {
            ExecMode::default()
        }
    }
}

pub const TIMELINE_COLUMNS: &[&str] = &[
    "time",
    "alive",
    "spawned",
    "removed",
    "serious",
    "vv_collisions",
    "vnv_collisions",
    "pass_throughs",
    "mean_stopped",
    "mean_distance",
    "speed_limit",
    "reward",
    "hash",
];

pub const SUMMARY_COLUMNS: &[&str] = &[
    "seed",
    "reward",
    "serious",
    "vv_collisions",
    "vnv_collisions",
    "total_collisions",
    "spawned",
    "removed",
    "alive",
    "pass_throughs",
    "mean_distance",
    "mean_stopped",
    "accounting_ok",
    "hash",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    pub reward: f64,
    pub serious: u64,
    pub vv: u64,
    pub vnv: u64,
    pub total: u64,
    pub spawned: u64,
    pub removed: u64,
    pub alive: u64,
    pub pass_throughs: u64,
    pub mean_distance: f64,
    pub mean_stopped: f64,
    pub accounting_ok: bool,
    pub hash: u64,
    /// Simulated seconds per wall-clock second; not written to disk.
    pub speedup: f64,
}

impl SeedSummary {
    fn row(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            fmt6(self.reward),
            self.serious.to_string(),
            self.vv.to_string(),
            self.vnv.to_string(),
            self.total.to_string(),
            self.spawned.to_string(),
            self.removed.to_string(),
            self.alive.to_string(),
            self.pass_throughs.to_string(),
            fmt6(self.mean_distance),
            fmt6(self.mean_stopped),
            u8::from(self.accounting_ok).to_string(),
            format!("{:016x}", self.hash),
        ]
    }
}

enum Controller {
    Baseline,
    Policy(Box<Agent<f32>>),
    Fixed(Vec<f64>),
}

impl Controller {
    fn window(
        &self,
        env: &mut TrafficEnv,
        obs: &[f64],
        rng: &mut ChaCha8Rng,
        on_tick: impl FnMut(&World),
    ) -> Result<StepOutcome, EnvError> {
        match self {
            Controller::Baseline => {}
            Controller::Policy(agent) => env.apply_action(&agent.action(obs, rng, true))?,
            Controller::Fixed(a) => env.apply_action(a)?,
        }
        env.advance_window_with(on_tick)
    }
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

/// One full episode; outputs go to `dir`.
fn run_seed(env: &mut TrafficEnv, ctl: &Controller, seed: u64, dir: &Path, hash_every: Option<u64>) -> Result<SeedSummary> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let started = std::time::Instant::now();
    let mut obs = env.reset(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut timeline = Vec::new();
    let mut reward = 0.0;
    let mut hashes = Vec::new();
    while !env.is_done() {
        let out = ctl.window(env, &obs, &mut rng, |w| {
            if let Some(n) = hash_every {
                if w.clock.tick_index % n == 0 {
                    hashes.push(vec![w.clock.tick_index.to_string(), format!("{:016x}", w.hash())]);
                }
            }
        })?;
        reward += out.reward.total;
        obs = out.observation;
        let w = env.world();
        let n = w.metrics.len().max(1) as f64;
        let stopped: f64 = w.metrics.iter().map(|m| m.stopped_ticks as f64 * w.clock.dt).sum();
        let distance: f64 = w.metrics.iter().map(|m| m.distance_total).sum();
        let limit = w.vehicles.first().map_or(0.0, |v| v.params.speed_limit);
        timeline.push(vec![
            fmt6(w.sim_time()),
            w.global.active_vehicles.to_string(),
            w.global.spawned_vehicles.to_string(),
            w.global.removed_vehicles.to_string(),
            w.global.serious_collisions.to_string(),
            w.global.vv_collisions.to_string(),
            w.global.vnv_collisions.to_string(),
            w.global.pass_throughs.to_string(),
            fmt6(stopped / n),
            fmt6(distance / n),
            fmt6(limit),
            fmt6(out.reward.total),
            format!("{:016x}", w.hash()),
        ]);
    }
    let elapsed = started.elapsed().as_secs_f64();
    let world = env.world_mut();
    world.flush_collision_log();
    let world = env.world();
    let dt = world.clock.dt;
    let t = world.sim_time();
    write_metrics_csv(&dir.join("metrics.csv"), &[(t, world.metrics.clone())], &env.scenario.fuel, dt)?;
    write_csv(&dir.join("collisions.csv"), COLLISION_COLUMNS, &collision_rows(&world.collision_log))?;
    write_csv(&dir.join("signals.csv"), SIGNAL_COLUMNS, &signal_rows(t, &world.signal_records()))?;
    write_csv(&dir.join("timeline.csv"), TIMELINE_COLUMNS, &timeline)?;
    if hash_every.is_some() {
        write_csv(&dir.join("hashes.csv"), &["tick", "hash"], &hashes)?;
    }

    let g = &world.global;
    let n = world.metrics.len().max(1) as f64;
    Ok(SeedSummary {
        seed,
        reward,
        serious: g.serious_collisions,
        vv: g.vv_collisions,
        vnv: g.vnv_collisions,
        total: g.total_collisions,
        spawned: g.spawned_vehicles,
        removed: g.removed_vehicles,
        alive: g.active_vehicles,
        pass_throughs: g.pass_throughs,
        mean_distance: world.metrics.iter().map(|m| m.distance_total).sum::<f64>() / n,
        mean_stopped: world.metrics.iter().map(|m| m.stopped_ticks as f64 * dt).sum::<f64>() / n,
        accounting_ok: world.accounting_holds(),
        hash: world.hash(),
        speedup: t / elapsed.max(1e-9),
    })
}

/// Runs every seed (concurrently when the execution mode allows) and writes
/// `summary.csv`. Outputs do not depend on the execution mode.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SeedSummary>> {
    cfg.validate()?;
    let mut scenario = Scenario::resolve(&cfg.scenario)?;
    if let Some(d) = cfg.duration {
        scenario.episode.duration = d;
    }
    let net = Arc::new(scenario.build_network()?);
    let ctl = match &cfg.mode {
        Mode::Baseline => Controller::Baseline,
        Mode::Policy { checkpoint } => {
            let (agent, _) = load_checkpoint::<f32>(checkpoint)?;
            let env = TrafficEnv::with_network(scenario.clone(), Arc::clone(&net));
            if agent.obs_len() != env.observation_len() || agent.act_len() != env.action_len() {
                bail!(
                    "checkpoint expects {} observations / {} actions, scenario '{}' has {} / {}",
                    agent.obs_len(),
                    agent.act_len(),
                    scenario.name,
                    env.observation_len(),
                    env.action_len()
                );
            }
            Controller::Policy(Box::new(agent))
        }
        Mode::FixedAction { action } => Controller::Fixed(action.clone()),
    };
    std::fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    let exec = cfg.exec();
    let one = |seed: u64| {
        let mut env = TrafficEnv::with_network(scenario.clone(), Arc::clone(&net));
        env.exec = exec;
        run_seed(&mut env, &ctl, seed, &seed_dir(&cfg.output, seed), cfg.hash_every).with_context(|| format!("seed {seed}"))
    };
    let results: Vec<Result<SeedSummary>> = if exec.is_parallel() {
        cfg.seeds.par_iter().map(|&s| one(s)).collect()
    } else {
        cfg.seeds.iter().map(|&s| one(s)).collect()
    };
    let summaries = results.into_iter().collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = summaries.iter().map(SeedSummary::row).collect();
    write_csv(&cfg.output.join("summary.csv"), SUMMARY_COLUMNS, &rows)?;
    Ok(summaries)
}
