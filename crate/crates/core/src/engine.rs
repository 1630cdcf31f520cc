//! The fixed-timestep world and its tick pipeline.
//!
//! Phase order within a tick is fixed:
//!
//! 1. signals advance
//! 2. sensing for this tick's ray cohort, plus stop-line gating
//! 3. control (steering toward the current waypoint, brake factor)
//! 4. integration
//! 5. contact detection and impulse resolution
//! 6. collision episodes and removals
//! 7. navigation
//! 8. pass-throughs and metrics
//!
//! Phases 2 to 5 read an immutable snapshot and may fan out across threads;
//! every merge happens in vehicle id order, so both execution modes produce
//! bit-identical worlds.

use crate::collision::{
    close_episode, obstacle_contact, resolve_impulse, severity_tick, sort_contacts, vehicle_contact, Body,
    CollisionKind, Contact,
};
use crate::dynamics::{
    advance_navigation, step_vehicle, steering_angle, target_of, NavEvent, VehicleState, DT,
};
use crate::geom::Vec2;
use crate::metrics::{CollisionEvent, GlobalMetrics, SignalRecord, VehicleMetrics, CRUISE_BIN};
use crate::network::{Obstacle, RoadNetwork};
use crate::par::{for_each_mut, map_range, ExecMode};
use crate::rng::{stream, Stream};
use crate::sensing::{
    brake_factor_from_hits, cast_rays, enforce_speed_limit, in_cohort, RayConfig, RayHit, Scene, TargetKind,
};
use crate::signals::{gate_directive, SignalController};
use crate::spatial::UniformGrid;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const GRID_CELL: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimClock {
    pub tick_index: u64,
    pub dt: f64,
    /// Advisory only; nothing is coupled to wall-clock time.
    pub time_scale: f64,
}

impl Default for SimClock {
    fn default() -> Self {
        Self {
            tick_index: 0,
            dt: DT,
            time_scale: 20.0,
        }
    }
}

impl SimClock {
    pub fn sim_time(&self) -> f64 {
        self.tick_index as f64 * self.dt
    }
}

/// Cumulative sums over every vehicle ever spawned, used for reward windows.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Totals {
    pub stopped_ticks: u64,
    pub distance: f64,
    pub cruise_ticks: u64,
    pub pass_throughs: u64,
    pub serious: u64,
    pub vv_collisions: u64,
}

#[derive(Clone, Debug)]
pub struct World {
    pub net: Arc<RoadNetwork>,
    pub clock: SimClock,
    pub vehicles: Vec<VehicleState>,
    pub metrics: Vec<VehicleMetrics>,
    pub signals: Vec<SignalController>,
    pub global: GlobalMetrics,
    pub collision_log: Vec<CollisionEvent>,
    pub ray: RayConfig,
    pub exec: ExecMode,
    paths_rng: ChaCha8Rng,
    vehicle_grid: UniformGrid,
    obstacle_grid: UniformGrid,
}

/// Read-only view used for raycasts.
struct GridScene<'a> {
    vehicles: &'a [VehicleState],
    obstacles: &'a [Obstacle],
    vehicle_grid: &'a UniformGrid,
    obstacle_grid: &'a UniformGrid,
}

fn ray_bounds(origin: Vec2, end: Vec2) -> (Vec2, Vec2) {
    (
        Vec2::new(origin.x.min(end.x), origin.z.min(end.z)),
        Vec2::new(origin.x.max(end.x), origin.z.max(end.z)),
    )
}

impl Scene for GridScene<'_> {
    fn raycast(&self, origin: Vec2, dir: Vec2, max_t: f64, exclude: u32) -> Option<(f64, TargetKind)> {
        let (lo, hi) = ray_bounds(origin, origin + dir * max_t);
        let mut ids = Vec::new();
        let mut best: Option<(f64, TargetKind)> = None;
        self.vehicle_grid.query(lo, hi, &mut ids);
        for &i in &ids {
            let v = &self.vehicles[i as usize];
            if v.id == exclude || !v.alive {
                continue;
            }
            if let Some(t) = v.footprint().ray_hit(origin, dir, max_t) {
                if best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, TargetKind::Vehicle));
                }
            }
        }
        self.obstacle_grid.query(lo, hi, &mut ids);
        for &i in &ids {
            if let Some(t) = self.obstacles[i as usize].ray_hit(origin, dir, max_t) {
                if best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, TargetKind::Obstacle));
                }
            }
        }
        best
    }
}

fn footprint_bounds(v: &VehicleState) -> (Vec2, Vec2) {
    let r = 0.5 * v.params.length.hypot(v.params.width);
    (v.position - Vec2::new(r, r), v.position + Vec2::new(r, r))
}

/// Mutable references to two distinct elements.
fn pair_mut<T>(items: &mut [T], i: usize, j: usize) -> (&mut T, &mut T) {
    assert!(i < j);
    let (lo, hi) = items.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

impl World {
    /// Builds a world from spawned vehicles. `greens` holds one initial green
    /// duration per signal, applied to both approach pairs.
    pub fn new(net: Arc<RoadNetwork>, vehicles: Vec<VehicleState>, greens: &[f64], seed: u64) -> Self {
        assert_eq!(greens.len(), net.signals.len(), "one green duration per signal");
        let signals = net
            .signals
            .iter()
            .zip(greens)
            .map(|(s, &g)| SignalController::new(s.id, s.kind, g))
            .collect();
        let ext = Vec2::new(net.half_extent, net.half_extent);
        let (lo, hi) = (net.world_center - ext, net.world_center + ext);
        let mut obstacle_grid = UniformGrid::new(lo, hi, GRID_CELL);
        for o in &net.obstacles {
            let (a, b) = o.bounds();
            obstacle_grid.insert(o.id, a, b);
        }
        for (i, v) in vehicles.iter().enumerate() {
            assert_eq!(v.id as usize, i, "vehicle ids must be dense and ordered");
        }
        let metrics = vehicles.iter().map(|v| VehicleMetrics::new(v.id)).collect();
        let global = GlobalMetrics {
            active_vehicles: vehicles.len() as u64,
            spawned_vehicles: vehicles.len() as u64,
            ..Default::default()
        };
        let mut w = Self {
            net,
            clock: SimClock::default(),
            vehicles,
            metrics,
            signals,
            global,
            collision_log: Vec::new(),
            ray: RayConfig::default(),
            exec: ExecMode::default(),
            paths_rng: stream(seed, Stream::Paths),
            vehicle_grid: UniformGrid::new(lo, hi, GRID_CELL),
            obstacle_grid,
        };
        for i in 0..w.vehicles.len() {
            let t = target_of(&w.vehicles[i], &w.net);
            if let Ok(s) = steering_angle(&w.vehicles[i], t) {
                w.vehicles[i].steer_angle = s;
            }
        }
        w.rebuild_grid();
        w
    }

    pub fn sim_time(&self) -> f64 {
        self.clock.sim_time()
    }

    pub fn alive_count(&self) -> usize {
        self.vehicles.iter().filter(|v| v.alive).count()
    }

    fn rebuild_grid(&mut self) {
        self.vehicle_grid.clear();
        for v in self.vehicles.iter().filter(|v| v.alive) {
            let (lo, hi) = footprint_bounds(v);
            self.vehicle_grid.insert(v.id, lo, hi);
        }
    }

    /// Vehicles whose footprint intersects the disc, in id order.
    pub fn spatial_query(&self, position: Vec2, radius: f64) -> Vec<u32> {
        let r = Vec2::new(radius, radius);
        let mut ids = Vec::new();
        self.vehicle_grid.query(position - r, position + r, &mut ids);
        ids.retain(|&i| {
            let v = &self.vehicles[i as usize];
            v.alive && v.footprint().distance_to_point(position) <= radius
        });
        ids
    }

    pub fn set_speed_limit(&mut self, limit: f64) {
        for v in &mut self.vehicles {
            v.params.speed_limit = limit;
        }
    }

    pub fn tick(&mut self) {
        let dt = self.clock.dt;
        let tick = self.clock.tick_index;

        // 1. signals
        for s in &mut self.signals {
            s.tick(dt);
        }

        // 2 + 3. sensing, gating and control over a read-only snapshot
        self.rebuild_grid();
        let controls = {
            let scene = GridScene {
                vehicles: &self.vehicles,
                obstacles: &self.net.obstacles,
                vehicle_grid: &self.vehicle_grid,
                obstacle_grid: &self.obstacle_grid,
            };
            let net = &self.net;
            let signals = &self.signals;
            let ray = &self.ray;
            let vehicles = &self.vehicles;
            map_range(self.exec, vehicles.len(), |i| {
                let v = &vehicles[i];
                if !v.alive {
                    return None;
                }
                let hits = if in_cohort(tick, v.id, ray) { cast_rays(v, &scene, ray) } else { v.hits };
                let mut brake = brake_factor_from_hits(&hits, ray);
                if let Some(g) = v.gates[0] {
                    if let Some(stop) = &net.container(g).stop_line {
                        let light = signals[stop.signal as usize].light(stop.pair);
                        brake = brake.max(gate_directive(light, stop.distance_ahead(v.front())));
                    }
                }
                brake = enforce_speed_limit(v.speed, v.params.speed_limit, brake);
                let steer = steering_angle(v, target_of(v, net)).unwrap_or(v.steer_angle);
                Some((hits, brake, steer))
            })
        };
        for (v, c) in self.vehicles.iter_mut().zip(controls) {
            if let Some((hits, brake, steer)) = c {
                v.hits = hits;
                v.brake_factor = brake;
                v.steer_angle = steer;
            }
        }

        // 4. integration
        for_each_mut(self.exec, &mut self.vehicles, |v| {
            if v.alive {
                step_vehicle(v, dt);
            }
        });

        // 5. contacts
        self.rebuild_grid();
        let contacts = self.detect_contacts();
        let mut touch: Vec<Option<(CollisionKind, Body)>> = vec![None; self.vehicles.len()];
        let note = |touch: &mut Vec<Option<(CollisionKind, Body)>>, who: usize, kind, other| match touch[who] {
            Some((CollisionKind::VehicleVehicle, _)) => {}
            Some(_) if kind == CollisionKind::VehicleNonVehicle => {}
            _ => touch[who] = Some((kind, other)),
        };
        for c in &contacts {
            let a = c.a_id as usize;
            match c.b {
                Body::Vehicle(b) => {
                    let b = b as usize;
                    let (va, vb) = pair_mut(&mut self.vehicles, a, b);
                    resolve_impulse(c, va, Some(vb));
                    note(&mut touch, a, CollisionKind::VehicleVehicle, c.b);
                    note(&mut touch, b, CollisionKind::VehicleVehicle, Body::Vehicle(c.a_id));
                }
                Body::Obstacle(_) => {
                    resolve_impulse(c, &mut self.vehicles[a], None);
                    note(&mut touch, a, CollisionKind::VehicleNonVehicle, c.b);
                }
            }
        }

        // 6. collision episodes
        let now = self.clock.sim_time() + dt;
        for (i, v) in self.vehicles.iter_mut().enumerate() {
            if !v.alive {
                continue;
            }
            let ev = severity_tick(&mut v.severity, dt, touch[i], v.speed < crate::dynamics::STOPPED_SPEED);
            let m = &mut self.metrics[i];
            if let Some(kind) = ev.started {
                m.count_collision(kind);
                self.global.count_collision(kind);
            }
            if ev.became_serious {
                m.serious_collisions += 1;
                self.global.serious_collisions += 1;
            }
            if let Some(ep) = ev.ended {
                self.collision_log.push(CollisionEvent {
                    time: now,
                    vehicle_id: v.id,
                    other: ep.partner,
                    kind: ep.kind,
                    episode_duration: ep.duration,
                    serious: ep.serious,
                    removed: ep.removed,
                });
            }
            if ev.removed {
                v.alive = false;
                v.speed = 0.0;
                m.removed = true;
                self.global.removed_vehicles += 1;
                self.global.active_vehicles -= 1;
            }
        }

        // 7. navigation
        let net = Arc::clone(&self.net);
        for v in self.vehicles.iter_mut().filter(|v| v.alive) {
            match advance_navigation(v, &net, &mut self.paths_rng) {
                NavEvent::Switched(c) => {
                    if net.container(c).stop_line.is_some() {
                        v.push_gate(c);
                    }
                }
                NavEvent::Respawned => {
                    if net.container(v.path_id).stop_line.is_some() {
                        v.push_gate(v.path_id);
                    }
                }
                _ => {}
            }
        }

        // 8. pass-throughs and metrics
        for (i, v) in self.vehicles.iter_mut().enumerate() {
            if !v.alive {
                continue;
            }
            while let Some(g) = v.gates[0] {
                let Some(stop) = &net.container(g).stop_line else {
                    v.pop_gate();
                    continue;
                };
                if stop.distance_ahead(v.front()) >= 0.0 {
                    break;
                }
                v.pop_gate();
                let s = &mut self.signals[stop.signal as usize];
                if s.light(stop.pair) == crate::signals::Light::Green {
                    s.pass_through_count += 1;
                    self.metrics[i].pass_throughs += 1;
                    self.global.pass_throughs += 1;
                }
            }
            self.metrics[i].record_tick(v.speed, dt);
        }
        self.clock.tick_index += 1;
    }

    fn detect_contacts(&self) -> Vec<Contact> {
        let vehicles = &self.vehicles;
        let obstacles = &self.net.obstacles;
        let vgrid = &self.vehicle_grid;
        let ogrid = &self.obstacle_grid;
        let per_vehicle = map_range(self.exec, vehicles.len(), |i| {
            let a = &vehicles[i];
            let mut out = Vec::new();
            if !a.alive {
                return out;
            }
            let (lo, hi) = footprint_bounds(a);
            let reach = 2.0 * 0.5 * a.params.length.hypot(a.params.width);
            let mut ids = Vec::new();
            vgrid.query(lo, hi, &mut ids);
            for &j in ids.iter().filter(|&&j| j > a.id) {
                let b = &vehicles[j as usize];
                if b.alive && a.position.distance(b.position) < reach {
                    out.extend(vehicle_contact(a, b));
                }
            }
            ogrid.query(lo, hi, &mut ids);
            let radius = 0.5 * reach;
            for &k in &ids {
                let o = &obstacles[k as usize];
                if o.distance_to_point(a.position) < radius {
                    out.extend(obstacle_contact(a, o));
                }
            }
            sort_contacts(&mut out);
            out
        });
        per_vehicle.into_iter().flatten().collect()
    }

    /// Closes every open collision episode into the log. Call once at the
    /// end of a run so the log reconciles with the collision counters.
    pub fn flush_collision_log(&mut self) {
        let dt = self.clock.dt;
        let now = self.clock.sim_time();
        for v in &mut self.vehicles {
            if v.alive && v.severity.in_collision {
                let ep = close_episode(&mut v.severity, dt);
                self.collision_log.push(CollisionEvent {
                    time: now,
                    vehicle_id: v.id,
                    other: ep.partner,
                    kind: ep.kind,
                    episode_duration: ep.duration,
                    serious: ep.serious,
                    removed: ep.removed,
                });
            }
        }
    }

    pub fn totals(&self) -> Totals {
        let mut t = Totals::default();
        for m in &self.metrics {
            t.stopped_ticks += m.stopped_ticks;
            t.distance += m.distance_total;
            t.cruise_ticks += m.bins.ticks[CRUISE_BIN];
        }
        t.pass_throughs = self.global.pass_throughs;
        t.serious = self.global.serious_collisions;
        t.vv_collisions = self.global.vv_collisions;
        t
    }

    pub fn signal_records(&self) -> Vec<SignalRecord> {
        self.signals
            .iter()
            .map(|s| {
                let mut phase_seconds = [0.0; 6];
                for (k, t) in s.phase_ticks.iter().enumerate() {
                    phase_seconds[k] = *t as f64 * self.clock.dt;
                }
                SignalRecord {
                    signal_id: s.id,
                    kind: match s.intersection_kind {
                        crate::network::IntersectionKind::X => "X",
                        crate::network::IntersectionKind::T => "T",
                    },
                    phase_seconds,
                    pass_throughs: s.pass_through_count,
                }
            })
            .collect()
    }

    /// FNV-1a over the bit patterns of the dynamic state.
    pub fn hash(&self) -> u64 {
        let mut h = Fnv::default();
        h.u64(self.clock.tick_index);
        for v in &self.vehicles {
            h.u64(v.id as u64);
            h.u64(u64::from(v.alive));
            for x in [v.position.x, v.position.z, v.yaw, v.speed, v.steer_angle, v.brake_factor] {
                h.u64(x.to_bits());
            }
            h.u64(v.path_id as u64);
            h.u64(v.waypoint_index as u64);
            h.u64(v.severity.stopped_ticks);
        }
        for s in &self.signals {
            h.u64(s.phase.index() as u64);
            h.u64(s.phase_elapsed.to_bits());
            h.u64(s.pass_through_count);
        }
        let g = &self.global;
        for x in [g.vv_collisions, g.vnv_collisions, g.serious_collisions, g.pass_throughs, g.removed_vehicles] {
            h.u64(x);
        }
        h.0
    }

    /// Whether every vehicle metric and the global counters satisfy the accounting identities.
    pub fn accounting_holds(&self) -> bool {
        let bins_ok = self.metrics.iter().all(|m| m.bins.total_ticks() == m.alive_ticks);
        let alive = self.alive_count() as u64;
        let log_ok = {
            let vv = self.collision_log.iter().filter(|e| e.kind == CollisionKind::VehicleVehicle).count() as u64;
            let vnv = self.collision_log.len() as u64 - vv;
            let open_vv = self
                .vehicles
                .iter()
                .filter(|v| v.alive && v.severity.in_collision && v.severity.kind == CollisionKind::VehicleVehicle)
                .count() as u64;
            let open = self.vehicles.iter().filter(|v| v.alive && v.severity.in_collision).count() as u64;
            vv + open_vv == self.global.vv_collisions && vnv + (open - open_vv) == self.global.vnv_collisions
        };
        bins_ok && log_ok && self.global.identities_hold() && alive == self.global.active_vehicles
    }

    /// Read-only ray queries against the current world state.
    pub fn raycast(&self, origin: Vec2, dir: Vec2, max_t: f64, exclude: u32) -> Option<(f64, TargetKind)> {
        GridScene {
            vehicles: &self.vehicles,
            obstacles: &self.net.obstacles,
            vehicle_grid: &self.vehicle_grid,
            obstacle_grid: &self.obstacle_grid,
        }
        .raycast(origin, dir, max_t, exclude)
    }

    pub fn hits_of(&self, id: u32) -> [RayHit; 3] {
        self.vehicles[id as usize].hits
    }
}

struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    fn u64(&mut self, x: u64) {
        for b in x.to_le_bytes() {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}
