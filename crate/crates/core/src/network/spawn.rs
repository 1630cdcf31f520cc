//! Initial vehicle placement.
//!
//! Every cycle visits each container once and puts a vehicle at the first
//! free slot of its first segment; slots sit `slot_spacing` apart starting at
//! the first waypoint. With intense traffic, long first segments also get an
//! extra vehicle at a fixed fraction of their length. A slot is free when no
//! vehicle in the same lane lies within one vehicle length of it.

use super::{NetworkError, PathContainer, RoadNetwork, LANE_OFFSET};
use crate::dynamics::{VehicleParams, VehicleState};
use crate::geom::Vec2;
use crate::rng::{stream, Stream};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpawnConfig {
    pub intense_traffic: bool,
    pub cycles: u32,
    pub extra_spawn_fraction: f64,
    /// First segments longer than this receive the extra vehicle.
    pub min_gap_distance: f64,
    pub slot_spacing: f64,
    /// Radius inside which a slot counts as occupied.
    pub occupied_radius: f64,
}

impl Default for SpawnConfig {
    fn default() -> Self {
        Self {
            intense_traffic: false,
            cycles: 50,
            extra_spawn_fraction: 0.4,
            min_gap_distance: 50.0,
            slot_spacing: 12.0,
            occupied_radius: 4.5,
        }
    }
}

impl SpawnConfig {
    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: &str| Err(NetworkError::InvalidSpawnConfig(m.to_string()));
        if self.cycles < 1 {
            return bad("cycles must be at least 1");
        }
        if !(self.extra_spawn_fraction > 0.0 && self.extra_spawn_fraction < 1.0) {
            return bad("extra_spawn_fraction must lie in (0, 1)");
        }
        if !(self.slot_spacing > 0.0) || !(self.occupied_radius >= 0.0) {
            return bad("slot_spacing must be positive and occupied_radius non-negative");
        }
        Ok(())
    }
}

/// Places vehicles on `net`, drawing each one's profile uniformly from `profiles`.
pub fn spawn_vehicles(
    net: &RoadNetwork,
    cfg: &SpawnConfig,
    profiles: &[VehicleParams],
    seed: u64,
) -> Result<Vec<VehicleState>, NetworkError> {
    cfg.validate()?;
    assert!(!profiles.is_empty(), "at least one vehicle profile is required");
    let mut rng = stream(seed, Stream::Spawning);
    let mut placed: Vec<VehicleState> = Vec::new();
    // Occupied means a vehicle in the same lane within `occupied_radius` along it;
    // the opposing lane runs closer than one vehicle length.
    let free = |placed: &[VehicleState], p: Vec2, dir: Vec2| {
        placed.iter().all(|v| {
            let d = v.position - p;
            d.dot(dir).abs() >= cfg.occupied_radius || d.dot(dir.right()).abs() >= LANE_OFFSET
        })
    };
    let mut saturated = vec![false; net.containers.len()];

    for _ in 0..cfg.cycles {
        for c in &net.containers {
            let start = c.first().pos();
            let len = c.first_segment_length();
            let dir = (c.waypoints[1].pos() - start).normalized();
            if !saturated[c.id as usize] {
                let slots = (len / cfg.slot_spacing).floor() as usize;
                let slot = (0..=slots)
                    .map(|k| k as f64 * cfg.slot_spacing)
                    .find(|&s| free(&placed, start + dir * s, dir));
                match slot {
                    Some(s) => place(&mut placed, &mut rng, profiles, c, start + dir * s),
                    None => saturated[c.id as usize] = true,
                }
            }
            if cfg.intense_traffic && len > cfg.min_gap_distance {
                let s = cfg.extra_spawn_fraction * len;
                if free(&placed, start + dir * s, dir) {
                    place(&mut placed, &mut rng, profiles, c, start + dir * s);
                }
            }
        }
    }
    Ok(placed)
}

fn place(placed: &mut Vec<VehicleState>, rng: &mut impl Rng, profiles: &[VehicleParams], c: &PathContainer, p: Vec2) {
    let profile = profiles[rng.random_range(0..profiles.len())];
    let mut v = VehicleState::new(placed.len() as u32, p, c.first().heading, c.id, 1, profile);
    if c.stop_line.is_some() {
        v.push_gate(c.id);
    }
    placed.push(v);
}
