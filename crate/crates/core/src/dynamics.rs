//! Planar vehicle dynamics and waypoint following.
//!
//! Longitudinal motion is a torque model on a rigid wheel: front-wheel drive
//! for the motor, four-wheel braking. Lateral motion is the kinematic bicycle
//! model. Reverse is not modeled, so speed is clamped at zero.

use crate::collision::CollisionSeverityState;
use crate::geom::{Obb, Vec2};
use crate::network::{ContainerId, RoadNetwork};
use crate::sensing::RayHit;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fixed physics timestep in seconds.
pub const DT: f64 = 0.02;
/// Speeds below this count as stopped.
pub const STOPPED_SPEED: f64 = 0.1;
/// A waypoint counts as reached inside this radius.
pub const ARRIVE_RADIUS: f64 = 5.0;
pub const MAX_BRAKE_FACTOR: f64 = 6000.0;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("steering target coincides with the vehicle position")]
    DegenerateTarget,
    #[error("vehicle parameter {name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub mass: f64,
    pub car_power: f64,
    pub brake_power: f64,
    pub speed_limit: f64,
    pub max_steer_angle: f64,
    pub wheel_radius: f64,
    pub wheelbase: f64,
    pub length: f64,
    pub width: f64,
    // Recorded for completeness; the planar model applies no force from these.
    pub com_y_offset: f64,
    pub suspension_spring: f64,
    pub suspension_damper: f64,
    pub suspension_distance: f64,
    pub wheel_mass: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 4000.0,
            car_power: 120.0,
            brake_power: 8.0,
            speed_limit: 30.0,
            max_steer_angle: max_steer_for_wheelbase(2.8),
            wheel_radius: 0.35,
            wheelbase: 2.8,
            length: 4.5,
            width: 1.9,
            com_y_offset: -0.05,
            suspension_spring: 25000.0,
            suspension_damper: 1500.0,
            suspension_distance: 0.05,
            wheel_mass: 1500.0,
        }
    }
}

/// Maximum steering angle as a monotone function of wheelbase, spanning 35 to 72 degrees.
pub fn max_steer_for_wheelbase(wheelbase: f64) -> f64 {
    (35.0 + (3.5 - wheelbase) * 20.0).clamp(35.0, 72.0)
}

impl VehicleParams {
    pub fn with_profile(car_power: f64, wheelbase: f64) -> Self {
        Self {
            car_power,
            wheelbase,
            max_steer_angle: max_steer_for_wheelbase(wheelbase),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let checks = [
            ("car_power", self.car_power, 60.0, 200.0),
            ("brake_power", self.brake_power, 5.0, 10.0),
            ("speed_limit", self.speed_limit, 20.0, 35.0),
            ("max_steer_angle", self.max_steer_angle, 35.0, 72.0),
            ("suspension_spring", self.suspension_spring, 10000.0, 60000.0),
            ("suspension_damper", self.suspension_damper, 1000.0, 6000.0),
        ];
        for (name, value, lo, hi) in checks {
            if !(lo..=hi).contains(&value) {
                return Err(DynamicsError::OutOfRange { name, value, lo, hi });
            }
        }
        for (name, value) in [
            ("mass", self.mass),
            ("wheel_radius", self.wheel_radius),
            ("wheelbase", self.wheelbase),
        ] {
            if !(value > 0.0) {
                return Err(DynamicsError::OutOfRange {
                    name,
                    value,
                    lo: f64::MIN_POSITIVE,
                    hi: f64::INFINITY,
                });
            }
        }
        Ok(())
    }
}

/// The four parameter profiles vehicles are drawn from at spawn.
pub fn default_profiles() -> Vec<VehicleParams> {
    [(90.0, 3.2), (120.0, 2.8), (150.0, 2.5), (200.0, 2.2)]
        .into_iter()
        .map(|(p, wb)| VehicleParams::with_profile(p, wb))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u32,
    /// Ground-plane position (the y component is always 0).
    pub position: Vec2,
    pub yaw: f64,
    pub speed: f64,
    pub path_id: ContainerId,
    pub waypoint_index: usize,
    pub steer_angle: f64,
    pub brake_factor: f64,
    pub stopped_timer: f64,
    pub alive: bool,
    pub severity: CollisionSeverityState,
    pub params: VehicleParams,
    /// Latest raycast results, refreshed on this vehicle's sensing frames.
    pub hits: [RayHit; 3],
    /// Stop lines ahead that the vehicle front has not crossed yet, oldest first.
    /// They are containers ids owning the stop line.
    pub gates: [Option<ContainerId>; 2],
}

impl VehicleState {
    pub fn new(id: u32, position: Vec2, yaw: f64, path_id: ContainerId, waypoint_index: usize, params: VehicleParams) -> Self {
        Self {
            id,
            position,
            yaw,
            speed: 0.0,
            path_id,
            waypoint_index,
            steer_angle: 0.0,
            brake_factor: 0.0,
            stopped_timer: 0.0,
            alive: true,
            severity: CollisionSeverityState::default(),
            params,
            hits: RayHit::none_all(),
            gates: [None; 2],
        }
    }

    pub fn position_xyz(&self) -> [f64; 3] {
        self.position.to_xyz()
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_heading(self.yaw)
    }

    pub fn front(&self) -> Vec2 {
        self.position + self.forward() * (0.5 * self.params.length)
    }

    pub fn footprint(&self) -> Obb {
        Obb::new(self.position, self.yaw, self.params.length, self.params.width)
    }

    pub fn velocity(&self) -> Vec2 {
        self.forward() * self.speed
    }

    pub fn is_stopped(&self) -> bool {
        self.speed < STOPPED_SPEED
    }

    pub fn push_gate(&mut self, container: ContainerId) {
        if self.gates[0].is_none() {
            self.gates[0] = Some(container);
        } else {
            // a third pending gate would mean the vehicle skipped one; keep the newest two
            if self.gates[1].is_some() {
                self.gates[0] = self.gates[1];
            }
            self.gates[1] = Some(container);
        }
    }

    pub fn pop_gate(&mut self) {
        self.gates = [self.gates[1], None];
    }
}

/// Steering angle toward `target`: the lateral component of the unit
/// direction in the vehicle frame, scaled by the maximum steering angle.
pub fn steering_angle(state: &VehicleState, target: Vec2) -> Result<f64, DynamicsError> {
    let d = target - state.position;
    let f = state.forward();
    let x = d.dot(f.right());
    let z = d.dot(f);
    let norm = x.hypot(z);
    if norm < 1e-9 {
        return Err(DynamicsError::DegenerateTarget);
    }
    Ok((x / norm).clamp(-1.0, 1.0) * state.params.max_steer_angle)
}

pub fn motor_torque(speed: f64, brake_factor: f64, params: &VehicleParams) -> f64 {
    if brake_factor > 0.0 {
        return 0.0;
    }
    params.car_power * 30.0 * (1.0 - speed / params.speed_limit).max(0.0)
}

pub fn brake_torque(brake_factor: f64, params: &VehicleParams) -> f64 {
    params.brake_power * brake_factor
}

/// Advances one vehicle by `dt`: speed first, then yaw from the new speed,
/// then position along the new heading.
pub fn step_vehicle(state: &mut VehicleState, dt: f64) {
    let p = &state.params;
    let traction = 2.0 * motor_torque(state.speed, state.brake_factor, p) / p.wheel_radius;
    let braking = 4.0 * brake_torque(state.brake_factor, p) / p.wheel_radius;
    let v = state.speed + traction / p.mass * dt;
    let v = (v - braking / p.mass * dt).max(0.0);
    state.speed = v;
    if state.steer_angle != 0.0 && v > 0.0 {
        let yaw_rate = v / p.wheelbase * state.steer_angle.to_radians().tan();
        state.yaw = crate::geom::normalize_deg(state.yaw + (yaw_rate * dt).to_degrees());
    }
    state.position += Vec2::from_heading(state.yaw) * (v * dt);
    if v < STOPPED_SPEED {
        state.stopped_timer += dt;
    } else {
        state.stopped_timer = 0.0;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NavEvent {
    None,
    Advanced,
    /// Moved onto the given container.
    Switched(ContainerId),
    /// Dead end: placed back at the start of its own container.
    Respawned,
}

/// Current steering target.
pub fn target_of(state: &VehicleState, net: &RoadNetwork) -> Vec2 {
    net.container(state.path_id).waypoints[state.waypoint_index].pos()
}

pub fn advance_navigation<R: Rng + ?Sized>(state: &mut VehicleState, net: &RoadNetwork, rng: &mut R) -> NavEvent {
    let c = net.container(state.path_id);
    let mut event = NavEvent::None;
    if state.position.distance(c.waypoints[state.waypoint_index].pos()) < ARRIVE_RADIUS {
        state.waypoint_index += 1;
        event = NavEvent::Advanced;
        if state.waypoint_index == c.waypoints.len() {
            if c.next_ways.is_empty() {
                respawn_at_start(state, net, state.path_id);
                event = NavEvent::Respawned;
            } else {
                let pick = c.next_ways[rng.random_range(0..c.next_ways.len())];
                state.path_id = pick;
                state.waypoint_index = 0;
                event = NavEvent::Switched(pick);
            }
        }
    }
    if let Ok(s) = steering_angle(state, target_of(state, net)) {
        state.steer_angle = s;
    }
    event
}

/// Places a vehicle at rest on the first waypoint of `container`, heading along its first segment.
pub fn respawn_at_start(state: &mut VehicleState, net: &RoadNetwork, container: ContainerId) {
    let c = net.container(container);
    state.path_id = container;
    state.position = c.first().pos();
    state.yaw = c.first().heading;
    state.speed = 0.0;
    state.steer_angle = 0.0;
    state.waypoint_index = 1;
    state.gates = [None; 2];
}
