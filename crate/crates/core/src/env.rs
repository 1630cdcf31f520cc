//! Episodic signal-control environment.
//!
//! One agent step is one decision window (60 s of simulated time by
//! default). The action sets every light's green duration and the global
//! speed limit; the reward is a fixed linear combination of counters
//! accumulated over the window.

use crate::dynamics::default_profiles;
use crate::engine::{Totals, World};
use crate::network::{spawn_vehicles, ApproachPair, NetworkError, RoadNetwork};
use crate::par::ExecMode;
use crate::rng::{stream, Stream};
use crate::scenario::Scenario;
use crate::signals::{MAX_GREEN, MIN_GREEN};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

pub const SPEED_LIMIT_MIN: f64 = 20.0;
pub const SPEED_LIMIT_MAX: f64 = 35.0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode already finished; call reset")]
    EpisodeFinished,
    #[error("action has {got} components, expected {expected}")]
    ActionLength { expected: usize, got: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub duration: f64,
    pub decision_interval: f64,
    pub green_range: (f64, f64),
    pub speed_limit_range: (f64, f64),
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            duration: 600.0,
            decision_interval: 60.0,
            green_range: (MIN_GREEN, MAX_GREEN),
            speed_limit_range: (SPEED_LIMIT_MIN, SPEED_LIMIT_MAX),
        }
    }
}

impl EpisodeConfig {
    pub fn decisions(&self) -> u32 {
        (self.duration / self.decision_interval).round() as u32
    }

    pub fn ticks_per_decision(&self, dt: f64) -> u64 {
        (self.decision_interval / dt).round() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardCoefficients {
    pub stopped: f64,
    pub distance: f64,
    pub cruise: f64,
    pub pass: f64,
    pub serious: f64,
    pub vehicle_collision: f64,
}

impl Default for RewardCoefficients {
    fn default() -> Self {
        Self {
            stopped: -1e-5,
            distance: 1e-8,
            cruise: 1e-5,
            pass: 0.01,
            serious: -1.0,
            vehicle_collision: -0.01,
        }
    }
}

impl RewardCoefficients {
    pub fn as_array(&self) -> [f64; 6] {
        [self.stopped, self.distance, self.cruise, self.pass, self.serious, self.vehicle_collision]
    }
}

/// Counter changes over one decision window, summed across vehicles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowDeltas {
    pub stopped_seconds: f64,
    pub distance: f64,
    pub cruise_seconds: f64,
    pub passes: f64,
    pub serious: f64,
    pub vehicle_collisions: f64,
}

impl WindowDeltas {
    pub fn between(before: &Totals, after: &Totals, dt: f64) -> Self {
        Self {
            stopped_seconds: (after.stopped_ticks - before.stopped_ticks) as f64 * dt,
            distance: after.distance - before.distance,
            cruise_seconds: (after.cruise_ticks - before.cruise_ticks) as f64 * dt,
            passes: (after.pass_throughs - before.pass_throughs) as f64,
            serious: (after.serious - before.serious) as f64,
            vehicle_collisions: (after.vv_collisions - before.vv_collisions) as f64,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.stopped_seconds,
            self.distance,
            self.cruise_seconds,
            self.passes,
            self.serious,
            self.vehicle_collisions,
        ]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub stopped_term: f64,
    pub distance_term: f64,
    pub speed2530_term: f64,
    pub pass_term: f64,
    pub serious_term: f64,
    pub collision_term: f64,
    pub total: f64,
}

/// Each term is coefficient times delta; the total sums them left to right.
pub fn compute_reward(d: &WindowDeltas, c: &RewardCoefficients) -> RewardBreakdown {
    let stopped_term = c.stopped * d.stopped_seconds;
    let distance_term = c.distance * d.distance;
    let speed2530_term = c.cruise * d.cruise_seconds;
    let pass_term = c.pass * d.passes;
    let serious_term = c.serious * d.serious;
    let collision_term = c.vehicle_collision * d.vehicle_collisions;
    RewardBreakdown {
        stopped_term,
        distance_term,
        speed2530_term,
        pass_term,
        serious_term,
        collision_term,
        total: stopped_term + distance_term + speed2530_term + pass_term + serious_term + collision_term,
    }
}

fn unit(a: f64) -> f64 {
    (a.clamp(-1.0, 1.0) + 1.0) / 2.0
}

/// Action component in [-1, 1] to a green duration in [5, 60] seconds.
pub fn decode_green(a: f64) -> f64 {
    MIN_GREEN + unit(a) * (MAX_GREEN - MIN_GREEN)
}

/// Action component in [-1, 1] to a speed limit in [20, 35] units/s.
pub fn decode_speed_limit(a: f64) -> f64 {
    SPEED_LIMIT_MIN + unit(a) * (SPEED_LIMIT_MAX - SPEED_LIMIT_MIN)
}

pub fn observation_len(n_sampled: usize, n_lights: usize) -> usize {
    2 * n_sampled + 4 * n_lights
}

/// Sampled vehicle positions followed by per-light (x, z, phase, green) entries.
pub fn observe(world: &World, n_sampled: usize, rng: &mut impl Rng) -> Vec<f64> {
    let net = &world.net;
    let norm = |v: f64, c: f64| ((v - c) / net.half_extent).clamp(-1.0, 1.0);
    let mut obs = Vec::with_capacity(observation_len(n_sampled, world.signals.len()));
    let alive: Vec<usize> = world.vehicles.iter().filter(|v| v.alive).map(|v| v.id as usize).collect();
    let k = alive.len().min(n_sampled);
    let mut picked: Vec<usize> = rand::seq::index::sample(rng, alive.len(), k).into_iter().map(|i| alive[i]).collect();
    picked.sort_unstable();
    for &i in &picked {
        let p = world.vehicles[i].position;
        obs.push(norm(p.x, net.world_center.x));
        obs.push(norm(p.z, net.world_center.z));
    }
    obs.resize(2 * n_sampled, 0.0);
    for (s, site) in world.signals.iter().zip(&net.signals) {
        obs.push(norm(site.center.x, net.world_center.x));
        obs.push(norm(site.center.z, net.world_center.z));
        obs.push(s.phase_code());
        obs.push((s.upcoming_green(ApproachPair::A) - MIN_GREEN) / (MAX_GREEN - MIN_GREEN));
    }
    obs
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: RewardBreakdown,
    pub deltas: WindowDeltas,
    pub done: bool,
}

/// The reset-time draws, kept so baseline runs can report them.
#[derive(Clone, Debug, PartialEq)]
pub struct ResetDraw {
    pub greens: Vec<f64>,
    pub speed_limit: f64,
}

pub struct TrafficEnv {
    pub scenario: Scenario,
    pub net: Arc<RoadNetwork>,
    pub exec: ExecMode,
    world: Option<World>,
    obs_rng: ChaCha8Rng,
    decisions: u32,
    totals: Totals,
    draw: Option<ResetDraw>,
}

impl TrafficEnv {
    pub fn new(scenario: Scenario) -> Result<Self, EnvError> {
        let net = Arc::new(scenario.build_network()?);
        Ok(Self::with_network(scenario, net))
    }

    pub fn with_network(scenario: Scenario, net: Arc<RoadNetwork>) -> Self {
        Self {
            scenario,
            net,
            exec: ExecMode::default(),
            world: None,
            obs_rng: stream(0, Stream::ObservationSampling),
            decisions: 0,
            totals: Totals::default(),
            draw: None,
        }
    }

    pub fn n_lights(&self) -> usize {
        self.net.signals.len()
    }

    pub fn observation_len(&self) -> usize {
        observation_len(self.scenario.observed_vehicles, self.n_lights())
    }

    pub fn action_len(&self) -> usize {
        self.n_lights() + 1
    }

    pub fn world(&self) -> &World {
        self.world.as_ref().expect("reset before use")
    }

    pub fn world_mut(&mut self) -> &mut World {
        self.world.as_mut().expect("reset before use")
    }

    pub fn into_world(self) -> Option<World> {
        self.world
    }

    pub fn reset_draw(&self) -> Option<&ResetDraw> {
        self.draw.as_ref()
    }

    pub fn decisions_taken(&self) -> u32 {
        self.decisions
    }

    pub fn is_done(&self) -> bool {
        self.decisions >= self.scenario.episode.decisions()
    }

    /// Respawns vehicles and redraws every light's green duration and the
    /// speed limit from the episode stream of `seed`.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<f64>, EnvError> {
        let ep = &self.scenario.episode;
        let mut reset_rng = stream(seed, Stream::EpisodeReset);
        let greens: Vec<f64> = (0..self.n_lights())
            .map(|_| reset_rng.random_range(ep.green_range.0..=ep.green_range.1))
            .collect();
        let speed_limit = reset_rng.random_range(ep.speed_limit_range.0..=ep.speed_limit_range.1);
        let (greens, speed_limit) = match self.scenario.baseline {
            crate::scenario::BaselinePolicy::Random => (greens, speed_limit),
            crate::scenario::BaselinePolicy::Fixed { green, speed_limit } => (vec![green; self.n_lights()], speed_limit),
        };
        let vehicles = spawn_vehicles(&self.net, &self.scenario.spawn, &default_profiles(), seed)?;
        let mut world = World::new(Arc::clone(&self.net), vehicles, &greens, seed);
        world.exec = self.exec;
        world.ray = self.scenario.ray;
        world.set_speed_limit(speed_limit);
        self.totals = world.totals();
        self.world = Some(world);
        self.obs_rng = stream(seed, Stream::ObservationSampling);
        self.decisions = 0;
        self.draw = Some(ResetDraw { greens, speed_limit });
        Ok(self.observe())
    }

    pub fn observe(&mut self) -> Vec<f64> {
        let n = self.scenario.observed_vehicles;
        let world = self.world.as_ref().expect("reset before use");
        observe(world, n, &mut self.obs_rng)
    }

    /// Queues per-light greens (next onset) and sets the speed limit now.
    pub fn apply_action(&mut self, action: &[f64]) -> Result<(), EnvError> {
        let expected = self.action_len();
        if action.len() != expected {
            return Err(EnvError::ActionLength { expected, got: action.len() });
        }
        let world = self.world.as_mut().expect("reset before use");
        for (s, &a) in world.signals.iter_mut().zip(action) {
            let g = decode_green(a);
            for pair in [ApproachPair::A, ApproachPair::B] {
                s.set_green_duration(pair, g).expect("decoded green is in range");
            }
        }
        world.set_speed_limit(decode_speed_limit(action[expected - 1]));
        Ok(())
    }

    /// Advances one decision window without touching the controls.
    pub fn advance_window(&mut self) -> Result<StepOutcome, EnvError> {
        self.advance_window_with(|_| {})
    }

    /// Like [`Self::advance_window`], calling `on_tick` after every tick.
    pub fn advance_window_with(&mut self, mut on_tick: impl FnMut(&World)) -> Result<StepOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeFinished);
        }
        let world = self.world.as_mut().expect("reset before use");
        let ticks = self.scenario.episode.ticks_per_decision(world.clock.dt);
        for _ in 0..ticks {
            world.tick();
            on_tick(world);
        }
        let after = world.totals();
        let deltas = WindowDeltas::between(&self.totals, &after, world.clock.dt);
        self.totals = after;
        self.decisions += 1;
        let reward = compute_reward(&deltas, &self.scenario.rewards);
        Ok(StepOutcome {
            observation: self.observe(),
            reward,
            deltas,
            done: self.is_done(),
        })
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::EpisodeFinished);
        }
        self.apply_action(action)?;
        self.advance_window()
    }
}
