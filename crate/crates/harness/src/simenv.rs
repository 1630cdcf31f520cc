use anyhow::{Context, Result};
use trafficlab_core::env::TrafficEnv;
use trafficlab_core::{ExecMode, Scenario};
use trafficlab_ppo::{EnvStep, Environment};

/// A [`TrafficEnv`] seen through the trainer's environment interface.
pub struct SimEnv {
    pub inner: TrafficEnv,
}

impl SimEnv {
    /// Builds the network and spawns once so later resets cannot fail.
    pub fn new(scenario: Scenario, exec: ExecMode) -> Result<Self> {
        let name = scenario.name.clone();
        let mut inner = TrafficEnv::new(scenario).with_context(|| format!("building scenario '{name}'"))?;
        inner.exec = exec;
        inner.reset(0).with_context(|| format!("populating scenario '{name}'"))?;
        Ok(Self { inner })
    }
}

impl Environment for SimEnv {
    fn observation_len(&self) -> usize {
        self.inner.observation_len()
    }

    fn action_len(&self) -> usize {
        self.inner.action_len()
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.inner.reset(seed).expect("spawning succeeded at construction")
    }

    fn step(&mut self, action: &[f64]) -> EnvStep {
        let out = self.inner.step(action).expect("trainer resets after every episode");
        EnvStep {
            observation: out.observation,
            reward: out.reward.total,
            done: out.done,
        }
    }
}
