//! Deterministic, headless traffic microsimulation with a signal-control
//! reinforcement-learning environment.
//!
//! The [`engine::World`] advances at a fixed 0.02 s timestep. Every random
//! choice draws from a purpose-specific stream in [`rng`], so a scenario and
//! a seed fully determine every output.

pub mod collision;
pub mod dynamics;
pub mod engine;
pub mod env;
pub mod geom;
pub mod metrics;
pub mod network;
pub mod par;
pub mod rng;
pub mod scenario;
pub mod sensing;
pub mod signals;
pub mod spatial;

pub use engine::{SimClock, World};
pub use env::TrafficEnv;
pub use par::ExecMode;
pub use scenario::Scenario;
