//! Three-ray obstacle detection and the brake factor derived from it.

use crate::collision::SIDE_RAYS_OFF_AFTER;
use crate::dynamics::{VehicleState, MAX_BRAKE_FACTOR};
use crate::geom::Vec2;
use crate::network::Obstacle;
use serde::{Deserialize, Serialize};

/// Minimum brake factor while a vehicle exceeds its speed limit.
pub const SPEED_LIMIT_BRAKE: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RayConfig {
    pub center_range: f64,
    pub side_range: f64,
    pub side_angle: f64,
    pub frame_cycle: u64,
}

impl Default for RayConfig {
    fn default() -> Self {
        Self {
            center_range: 6.0,
            side_range: 2.0,
            side_angle: 37.0,
            frame_cycle: 4,
        }
    }
}

impl RayConfig {
    pub fn range(&self, which: RayKind) -> f64 {
        match which {
            RayKind::Center => self.center_range,
            RayKind::Left | RayKind::Right => self.side_range,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RayKind {
    Center,
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    Vehicle,
    Obstacle,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    pub which: RayKind,
    pub distance: f64,
    pub target_kind: TargetKind,
}

impl RayHit {
    pub fn none(which: RayKind) -> Self {
        Self {
            which,
            distance: f64::INFINITY,
            target_kind: TargetKind::None,
        }
    }

    pub fn none_all() -> [RayHit; 3] {
        [RayHit::none(RayKind::Center), RayHit::none(RayKind::Left), RayHit::none(RayKind::Right)]
    }

    pub fn is_hit(&self) -> bool {
        self.target_kind != TargetKind::None
    }
}

/// Anything rays can be cast against.
pub trait Scene {
    /// Nearest hit of `origin + t * dir`, `t` in `[0, max_t]`, ignoring vehicle `exclude`.
    fn raycast(&self, origin: Vec2, dir: Vec2, max_t: f64, exclude: u32) -> Option<(f64, TargetKind)>;
}

/// Linear scan over every vehicle and obstacle. Used as a reference and for small scenes.
pub struct LinearScene<'a> {
    pub vehicles: &'a [VehicleState],
    pub obstacles: &'a [Obstacle],
}

impl Scene for LinearScene<'_> {
    fn raycast(&self, origin: Vec2, dir: Vec2, max_t: f64, exclude: u32) -> Option<(f64, TargetKind)> {
        let mut best: Option<(f64, TargetKind)> = None;
        let mut offer = |t: f64, k| {
            if best.is_none_or(|(b, _)| t < b) {
                best = Some((t, k));
            }
        };
        for v in self.vehicles.iter().filter(|v| v.alive && v.id != exclude) {
            if let Some(t) = v.footprint().ray_hit(origin, dir, max_t) {
                offer(t, TargetKind::Vehicle);
            }
        }
        for o in self.obstacles {
            if let Some(t) = o.ray_hit(origin, dir, max_t) {
                offer(t, TargetKind::Obstacle);
            }
        }
        best
    }
}

/// Whether `vehicle_id` casts its rays on frame `tick`.
pub fn in_cohort(tick: u64, vehicle_id: u32, cfg: &RayConfig) -> bool {
    tick % cfg.frame_cycle == u64::from(vehicle_id) % cfg.frame_cycle
}

/// Casts the center ray along yaw + steer and the two side rays at yaw -/+ side_angle,
/// all from the vehicle front. Side rays are skipped once the vehicle has been
/// stopped for more than 7 s, in or out of contact.
pub fn cast_rays(state: &VehicleState, scene: &impl Scene, cfg: &RayConfig) -> [RayHit; 3] {
    let origin = state.front();
    let cast = |which: RayKind, heading: f64| {
        let range = cfg.range(which);
        match scene.raycast(origin, Vec2::from_heading(heading), range, state.id) {
            Some((distance, target_kind)) => RayHit {
                which,
                distance,
                target_kind,
            },
            None => RayHit::none(which),
        }
    };
    let center = cast(RayKind::Center, state.yaw + state.steer_angle);
    if state.severity.side_rays_disabled || state.stopped_timer > SIDE_RAYS_OFF_AFTER {
        return [center, RayHit::none(RayKind::Left), RayHit::none(RayKind::Right)];
    }
    [
        center,
        cast(RayKind::Left, state.yaw - cfg.side_angle),
        cast(RayKind::Right, state.yaw + cfg.side_angle),
    ]
}

/// Maximum over rays of `6000 * (1 - d / range)`; misses contribute 0.
pub fn brake_factor_from_hits(hits: &[RayHit; 3], cfg: &RayConfig) -> f64 {
    hits.iter()
        .filter(|h| h.is_hit())
        .map(|h| (MAX_BRAKE_FACTOR * (1.0 - h.distance / cfg.range(h.which))).clamp(0.0, MAX_BRAKE_FACTOR))
        .fold(0.0, f64::max)
}

/// Raises `factor` to at least [`SPEED_LIMIT_BRAKE`] while over the limit.
pub fn enforce_speed_limit(speed: f64, speed_limit: f64, factor: f64) -> f64 {
    if speed > speed_limit {
        factor.max(SPEED_LIMIT_BRAKE)
    } else {
        factor
    }
}
