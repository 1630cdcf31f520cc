use crate::curiosity::Curiosity;
use crate::hyper::Hyperparams;
use crate::mlp::Adam;
use crate::normalizer::RunningNorm;
use crate::policy::{ActionSample, PolicyNet};
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: checkpoint version {found}, expected {expected}")]
    Version { path: String, found: u32, expected: u32 },
    #[error("{path}: checkpoint holds {found} weights, expected {expected}")]
    Scalar { path: String, found: String, expected: String },
}

/// Everything the trainer learns, plus optimizer state for resuming.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Agent<T: Scalar> {
    pub net: PolicyNet<T>,
    pub curiosity: Option<Curiosity<T>>,
    pub obs_norm: RunningNorm,
    pub normalize: bool,
    pub step: u64,
    pub episodes: u64,
    /// Word position of the trainer's sampling stream.
    #[serde(default)]
    pub rng_position: u128,
    pub opt_actor: Adam<T>,
    pub opt_log_std: Adam<T>,
    pub opt_critic: Adam<T>,
    pub opt_curiosity: Option<[Adam<T>; 3]>,
}

impl<T: Scalar> Agent<T> {
    pub fn new(obs_len: usize, act_len: usize, hp: &Hyperparams, rng: &mut impl Rng) -> Self {
        let net = PolicyNet::new(obs_len, act_len, hp.hidden_units, hp.num_layers, rng);
        let curiosity = (hp.curiosity_strength > 0.0).then(|| {
            Curiosity::new(obs_len, act_len, hp.curiosity_encoding_size, hp.curiosity_layers, hp.curiosity_strength, rng)
        });
        let opt_curiosity = curiosity.as_ref().map(|c| {
            [
                Adam::new(c.encoder.params.len()),
                Adam::new(c.forward_model.params.len()),
                Adam::new(c.inverse_model.params.len()),
            ]
        });
        Self {
            opt_actor: Adam::new(net.actor.params.len()),
            opt_log_std: Adam::new(act_len),
            opt_critic: Adam::new(net.critic.params.len()),
            net,
            curiosity,
            obs_norm: RunningNorm::new(obs_len),
            normalize: hp.normalize,
            step: 0,
            episodes: 0,
            rng_position: 0,
            opt_curiosity,
        }
    }

    pub fn obs_len(&self) -> usize {
        self.net.obs_len()
    }

    pub fn act_len(&self) -> usize {
        self.net.act_len()
    }

    /// Network input for a raw observation.
    pub fn prepare(&self, raw: &[f64]) -> Vec<T> {
        if self.normalize {
            self.obs_norm.normalize(raw)
        } else {
            raw.iter().map(|&x| T::c(x)).collect()
        }
    }

    pub fn act(&self, raw_obs: &[f64], rng: &mut impl Rng, deterministic: bool) -> ActionSample<T> {
        self.net.act(&self.prepare(raw_obs), rng, deterministic)
    }

    /// Squashed action as `f64`, ready for an environment.
    pub fn action(&self, raw_obs: &[f64], rng: &mut impl Rng, deterministic: bool) -> Vec<f64> {
        self.act(raw_obs, rng, deterministic).action.iter().map(|a| a.as_f64()).collect()
    }

    pub fn value(&self, raw_obs: &[f64]) -> f64 {
        self.net.value(&self.prepare(raw_obs)).as_f64()
    }
}

fn scalar_name<T: Scalar>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct CheckpointFile<T: Scalar> {
    format_version: u32,
    scalar: String,
    hyperparams: Hyperparams,
    agent: Agent<T>,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
    scalar: String,
}

/// Writes a versioned JSON checkpoint.
pub fn save_checkpoint<T: Scalar>(path: &Path, agent: &Agent<T>, hp: &Hyperparams) -> Result<(), CheckpointError> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        scalar: scalar_name::<T>().to_string(),
        hyperparams: hp.clone(),
        agent: agent.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|source| CheckpointError::Parse {
        path: path.display().to_string(),
        source,
    })?;
    std::fs::write(path, text).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(Agent<T>, Hyperparams), CheckpointError> {
    let p = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io { path: p.clone(), source })?;
    let header: Header = serde_json::from_str(&text).map_err(|source| CheckpointError::Parse { path: p.clone(), source })?;
    if header.format_version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version {
            path: p,
            found: header.format_version,
            expected: CHECKPOINT_VERSION,
        });
    }
    if header.scalar != scalar_name::<T>() {
        return Err(CheckpointError::Scalar {
            path: p,
            found: header.scalar,
            expected: scalar_name::<T>().to_string(),
        });
    }
    let file: CheckpointFile<T> = serde_json::from_str(&text).map_err(|source| CheckpointError::Parse { path: p, source })?;
    Ok((file.agent, file.hyperparams))
}
