//! Training runs driven by a TOML file laid out like the usual
//! `hyperparameters` / `network_settings` / `reward_signals` schema.

use crate::simenv::SimEnv;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use trafficlab_core::{ExecMode, Scenario};
use trafficlab_ppo::{load_checkpoint, Hyperparams, SummaryRow, Trainer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Linear,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    pub batch_size: usize,
    pub buffer_size: usize,
    pub learning_rate: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub lambd: f64,
    pub num_epoch: usize,
    pub learning_rate_schedule: Schedule,
    #[serde(default = "linear")]
    pub beta_schedule: Schedule,
    #[serde(default = "linear")]
    pub epsilon_schedule: Schedule,
}

fn linear() -> Schedule {
    Schedule::Linear
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub normalize: bool,
    pub hidden_units: usize,
    pub num_layers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrinsicSection {
    pub gamma: f64,
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CuriositySection {
    pub gamma: f64,
    pub strength: f64,
    pub encoding_size: usize,
    #[serde(default = "curiosity_layers")]
    pub num_layers: usize,
    pub learning_rate: f64,
}

fn curiosity_layers() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardSignals {
    pub extrinsic: ExtrinsicSection,
    pub curiosity: Option<CuriositySection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub run_id: String,
    /// Preset name or scenario TOML path.
    pub scenario: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Warm start from an earlier run's checkpoint.
    #[serde(default)]
    pub init_from: Option<PathBuf>,
    pub max_steps: u64,
    pub time_horizon: usize,
    pub summary_freq: u64,
    pub checkpoint_interval: u64,
    pub hyperparameters: HyperSection,
    pub network_settings: NetworkSection,
    pub reward_signals: RewardSignals,
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

/// Full-scale settings from the published configuration.
pub const MAIN_CONFIG: &str = include_str!("../configs/train_main.toml");
/// Small network and short budget for one desktop core.
pub const DESK_CONFIG: &str = include_str!("../configs/train_desk.toml");

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn hyperparams(&self) -> Hyperparams {
        let h = &self.hyperparameters;
        let n = &self.network_settings;
        let e = &self.reward_signals.extrinsic;
        let mut hp = Hyperparams {
            batch_size: h.batch_size,
            buffer_size: h.buffer_size,
            learning_rate: h.learning_rate,
            learning_rate_decay: h.learning_rate_schedule == Schedule::Linear,
            beta: h.beta,
            beta_decay: h.beta_schedule == Schedule::Linear,
            epsilon: h.epsilon,
            epsilon_decay: h.epsilon_schedule == Schedule::Linear,
            lambda: h.lambd,
            num_epoch: h.num_epoch,
            gamma: e.gamma,
            extrinsic_strength: e.strength,
            hidden_units: n.hidden_units,
            num_layers: n.num_layers,
            normalize: n.normalize,
            curiosity_strength: 0.0,
            max_steps: self.max_steps,
            time_horizon: self.time_horizon,
            checkpoint_interval: self.checkpoint_interval,
            summary_freq: self.summary_freq,
            seed: self.seed,
            ..Hyperparams::default()
        };
        if let Some(c) = &self.reward_signals.curiosity {
            hp.curiosity_strength = c.strength;
            hp.curiosity_gamma = c.gamma;
            hp.curiosity_encoding_size = c.encoding_size;
            hp.curiosity_layers = c.num_layers;
            hp.curiosity_learning_rate = c.learning_rate;
        }
        hp
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output.join(&self.run_id)
    }
}

pub struct TrainOutcome {
    pub episode_returns: Vec<f64>,
    pub log: Vec<SummaryRow>,
    pub final_checkpoint: PathBuf,
}

/// Trains, writing `log.csv`, `episodes.csv`, numbered checkpoints and
/// `final.json` under the run directory.
pub fn run_training(cfg: &TrainConfig, exec: ExecMode) -> Result<TrainOutcome> {
    let scenario = Scenario::resolve(&cfg.scenario)?;
    let env = SimEnv::new(scenario, exec)?;
    let hp = cfg.hyperparams();
    let dir = cfg.run_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.toml"), toml::to_string(cfg)?)?;

    let mut trainer = match &cfg.init_from {
        Some(path) => {
            let (mut agent, _) = load_checkpoint::<f32>(path)?;
            agent.step = 0;
            agent.episodes = 0;
            agent.rng_position = 0;
            trafficlab_ppo::Trainer::from_agent(hp, agent, env)?
        }
        None => Trainer::<f32, _>::new(hp, env)?,
    };
    trainer.checkpoint_dir = Some(dir.join("checkpoints"));
    trainer.train()?;
    let final_checkpoint = dir.join("final.json");
    trainer.save(&final_checkpoint)?;

    let mut w = csv::Writer::from_path(dir.join("log.csv"))?;
    for row in &trainer.log {
        w.serialize(row)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("episodes.csv"))?;
    w.write_record(["episode", "return"])?;
    for (k, r) in trainer.episode_returns.iter().enumerate() {
        w.write_record([k.to_string(), r.to_string()])?;
    }
    w.flush()?;

    Ok(TrainOutcome {
        episode_returns: trainer.episode_returns,
        log: trainer.log,
        final_checkpoint,
    })
}
