//! Scenario presets: which network, how it is populated, the episode
//! protocol and reward coefficients. Stored as TOML.

use crate::env::{EpisodeConfig, RewardCoefficients};
use crate::metrics::FuelModel;
use crate::network::{generate_city, generate_desk_network, CityGenConfig, CityScale, NetworkError, RoadNetwork, SpawnConfig};
use crate::sensing::RayConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown preset '{0}' (known: main, small, desk, fixed30)")]
    UnknownPreset(String),
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
        source: toml::de::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkSpec {
    City { scale: CityScale, seed: u64, layout: usize },
    Desk,
    File { path: PathBuf },
}

/// How a run without an agent holds its controls.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselinePolicy {
    /// Keep the random reset draws for the whole episode.
    #[default]
    Random,
    Fixed { green: f64, speed_limit: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_observed")]
    pub observed_vehicles: usize,
    pub network: NetworkSpec,
    #[serde(default)]
    pub spawn: SpawnConfig,
    #[serde(default)]
    pub episode: EpisodeConfig,
    #[serde(default)]
    pub rewards: RewardCoefficients,
    #[serde(default)]
    pub fuel: FuelModel,
    #[serde(default)]
    pub ray: RayConfig,
    #[serde(default)]
    pub baseline: BaselinePolicy,
}

fn default_observed() -> usize {
    50
}

const PRESETS: &[(&str, &str)] = &[
    ("main", include_str!("../presets/main.toml")),
    ("small", include_str!("../presets/small.toml")),
    ("desk", include_str!("../presets/desk.toml")),
    ("fixed30", include_str!("../presets/fixed30.toml")),
];

impl Scenario {
    pub fn preset(name: &str) -> Result<Self, ScenarioError> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))?;
        Self::from_toml(text, name)
    }

    pub fn preset_names() -> Vec<&'static str> {
        PRESETS.iter().map(|(n, _)| *n).collect()
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|source| ScenarioError::Parse {
            path: origin.to_string(),
            source,
        })
    }

    /// A preset name or a path to a TOML file.
    pub fn resolve(name_or_path: &str) -> Result<Self, ScenarioError> {
        let p = Path::new(name_or_path);
        if p.extension().is_some_and(|e| e == "toml") || p.exists() {
            let text = std::fs::read_to_string(p).map_err(|source| ScenarioError::Io {
                path: name_or_path.to_string(),
                source,
            })?;
            Self::from_toml(&text, name_or_path)
        } else {
            Self::preset(name_or_path)
        }
    }

    pub fn build_network(&self) -> Result<RoadNetwork, NetworkError> {
        match &self.network {
            NetworkSpec::City { scale, seed, layout } => generate_city(&CityGenConfig::new(*scale, *seed, *layout)),
            NetworkSpec::Desk => Ok(generate_desk_network()),
            NetworkSpec::File { path } => RoadNetwork::load(path),
        }
    }
}
