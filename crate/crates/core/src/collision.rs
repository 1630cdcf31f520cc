//! Footprint contacts, impulse response and the per-vehicle collision episode
//! state machine.
//!
//! An episode starts on the first tick a vehicle touches anything and ends on
//! the first tick it touches nothing. While it lasts, time spent stopped is
//! accumulated; crossing 7 s disables the side rays, 30 s marks the episode
//! serious and 60 s removes the vehicle from the world.

use crate::dynamics::VehicleState;
use crate::geom::{sat_overlap, Vec2};
use crate::network::Obstacle;
use serde::{Deserialize, Serialize};

pub const RESTITUTION: f64 = 0.1;
/// Fraction of penetration removed per tick by positional correction.
pub const CORRECTION: f64 = 0.8;
/// Penetration left in place so resting contacts stay in contact.
pub const SLOP: f64 = 0.01;

pub const SIDE_RAYS_OFF_AFTER: f64 = 7.0;
pub const SERIOUS_AFTER: f64 = 30.0;
pub const REMOVE_AFTER: f64 = 60.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Body {
    Vehicle(u32),
    Obstacle(u32),
}

impl std::fmt::Display for Body {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Body::Vehicle(id) => write!(f, "v{id}"),
            Body::Obstacle(id) => write!(f, "o{id}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CollisionKind {
    VehicleVehicle,
    #[default]
    VehicleNonVehicle,
}

impl CollisionKind {
    pub fn label(self) -> &'static str {
        match self {
            CollisionKind::VehicleVehicle => "vehicle-vehicle",
            CollisionKind::VehicleNonVehicle => "vehicle-nonvehicle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contact {
    pub a_id: u32,
    pub b: Body,
    /// Unit normal pointing from `a` toward `b`.
    pub normal: Vec2,
    pub penetration: f64,
    /// `(v_b - v_a) . normal`; negative while approaching.
    pub relative_speed_along_normal: f64,
}

pub fn vehicle_contact(a: &VehicleState, b: &VehicleState) -> Option<Contact> {
    let (normal, penetration) = sat_overlap(&a.footprint().corners(), &b.footprint().corners())?;
    Some(Contact {
        a_id: a.id,
        b: Body::Vehicle(b.id),
        normal,
        penetration,
        relative_speed_along_normal: (b.velocity() - a.velocity()).dot(normal),
    })
}

pub fn obstacle_contact(a: &VehicleState, o: &Obstacle) -> Option<Contact> {
    let (normal, penetration) = sat_overlap(&a.footprint().corners(), &o.polygon())?;
    Some(Contact {
        a_id: a.id,
        b: Body::Obstacle(o.id),
        normal,
        penetration,
        relative_speed_along_normal: -a.velocity().dot(normal),
    })
}

/// Every overlapping pair by exhaustive search, vehicle pairs with `a < b`,
/// sorted by `(a_id, b)`. Removed vehicles are ignored.
pub fn detect_contacts(vehicles: &[VehicleState], obstacles: &[Obstacle]) -> Vec<Contact> {
    let mut out = Vec::new();
    for (i, a) in vehicles.iter().enumerate().filter(|(_, v)| v.alive) {
        for b in vehicles[i + 1..].iter().filter(|v| v.alive) {
            let (a, b) = if a.id < b.id { (a, b) } else { (b, a) };
            out.extend(vehicle_contact(a, b));
        }
        for o in obstacles {
            out.extend(obstacle_contact(a, o));
        }
    }
    sort_contacts(&mut out);
    out
}

pub fn sort_contacts(contacts: &mut [Contact]) {
    contacts.sort_by(|x, y| (x.a_id, x.b).cmp(&(y.a_id, y.b)));
}

/// Two-body normal impulse. `inv_b = 0` models an immovable body.
pub fn impulse_velocities(va: Vec2, vb: Vec2, n: Vec2, inv_a: f64, inv_b: f64, e: f64) -> (Vec2, Vec2) {
    let vrel = (vb - va).dot(n);
    if vrel >= 0.0 || inv_a + inv_b == 0.0 {
        return (va, vb);
    }
    let j = -(1.0 + e) * vrel / (inv_a + inv_b);
    (va - n * (j * inv_a), vb + n * (j * inv_b))
}

/// Applies the impulse and positional correction of `contact`.
///
/// Velocities of approaching bodies are exchanged along the normal; the
/// resulting velocity is projected back onto each vehicle's heading because
/// the planar model has no lateral or reverse motion.
pub fn resolve_impulse(contact: &Contact, a: &mut VehicleState, b: Option<&mut VehicleState>) {
    let n = contact.normal;
    let inv_a = 1.0 / a.params.mass;
    let corr = CORRECTION * (contact.penetration - SLOP).max(0.0);
    match b {
        Some(b) => {
            let inv_b = 1.0 / b.params.mass;
            let (va, vb) = impulse_velocities(a.velocity(), b.velocity(), n, inv_a, inv_b, RESTITUTION);
            a.speed = va.dot(a.forward()).max(0.0);
            b.speed = vb.dot(b.forward()).max(0.0);
            let share = corr / (inv_a + inv_b);
            a.position -= n * (share * inv_a);
            b.position += n * (share * inv_b);
        }
        None => {
            let (va, _) = impulse_velocities(a.velocity(), Vec2::ZERO, n, inv_a, 0.0, RESTITUTION);
            a.speed = va.dot(a.forward()).max(0.0);
            a.position -= n * corr;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionSeverityState {
    pub in_collision: bool,
    pub kind: CollisionKind,
    /// First body touched in the current episode.
    pub partner: Option<Body>,
    pub stopped_ticks: u64,
    pub episode_ticks: u64,
    pub side_rays_disabled: bool,
    pub serious: bool,
    pub removed: bool,
}

impl CollisionSeverityState {
    pub fn stopped_during_collision(&self, dt: f64) -> f64 {
        self.stopped_ticks as f64 * dt
    }
}

/// A finished (or forcibly closed) collision episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub kind: CollisionKind,
    pub partner: Option<Body>,
    pub duration: f64,
    pub serious: bool,
    pub removed: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeverityEvents {
    pub started: Option<CollisionKind>,
    pub side_rays_disabled: bool,
    pub became_serious: bool,
    pub removed: bool,
    pub ended: Option<EpisodeSummary>,
}

fn threshold_ticks(seconds: f64, dt: f64) -> u64 {
    (seconds / dt).round() as u64
}

/// One tick of the episode state machine. `contact` is the kind and first
/// partner of this tick's contacts, if any.
pub fn severity_tick(
    s: &mut CollisionSeverityState,
    dt: f64,
    contact: Option<(CollisionKind, Body)>,
    stopped: bool,
) -> SeverityEvents {
    let mut ev = SeverityEvents::default();
    let Some((kind, partner)) = contact else {
        if s.in_collision {
            ev.ended = Some(close_episode(s, dt));
        }
        return ev;
    };
    if !s.in_collision {
        *s = CollisionSeverityState {
            in_collision: true,
            kind,
            partner: Some(partner),
            ..Default::default()
        };
        ev.started = Some(kind);
    }
    s.episode_ticks += 1;
    if stopped {
        s.stopped_ticks += 1;
    }
    if !s.side_rays_disabled && s.stopped_ticks > threshold_ticks(SIDE_RAYS_OFF_AFTER, dt) {
        s.side_rays_disabled = true;
        ev.side_rays_disabled = true;
    }
    if !s.serious && s.stopped_ticks > threshold_ticks(SERIOUS_AFTER, dt) {
        s.serious = true;
        ev.became_serious = true;
    }
    if s.stopped_ticks > threshold_ticks(REMOVE_AFTER, dt) {
        s.removed = true;
        ev.removed = true;
        ev.ended = Some(close_episode(s, dt));
        s.removed = true;
    }
    ev
}

/// Ends the current episode, resetting every flag.
pub fn close_episode(s: &mut CollisionSeverityState, dt: f64) -> EpisodeSummary {
    let summary = EpisodeSummary {
        kind: s.kind,
        partner: s.partner,
        duration: s.episode_ticks as f64 * dt,
        serious: s.serious,
        removed: s.removed,
    };
    *s = CollisionSeverityState::default();
    summary
}
