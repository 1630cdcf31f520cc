//! Per-vehicle and global counters, the fuel/CO2 surrogate and CSV output.
//!
//! Time accumulators count ticks so that sums and identities are exact;
//! seconds are derived on output.

use crate::collision::{Body, CollisionKind};
use crate::dynamics::STOPPED_SPEED;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const SPEED_BIN_COUNT: usize = 7;
pub const SPEED_BIN_WIDTH: f64 = 5.0;
/// Index of the 25-30 units/s bin.
pub const CRUISE_BIN: usize = 5;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("distance is zero; per-mile values are undefined")]
    ZeroDistance,
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Half-open 5 units/s bins; everything at or above 30 lands in the last one.
pub fn bin_speed(speed: f64) -> usize {
    if !(speed > 0.0) {
        return 0;
    }
    ((speed / SPEED_BIN_WIDTH).floor() as usize).min(SPEED_BIN_COUNT - 1)
}

pub fn bin_label(k: usize) -> String {
    format!("bin_{}_{}", k * 5, (k + 1) * 5)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeedBins {
    pub ticks: [u64; SPEED_BIN_COUNT],
}

impl SpeedBins {
    pub fn seconds(&self, k: usize, dt: f64) -> f64 {
        self.ticks[k] as f64 * dt
    }

    pub fn total_ticks(&self) -> u64 {
        self.ticks.iter().sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleMetrics {
    pub vehicle_id: u32,
    pub distance_total: f64,
    pub alive_ticks: u64,
    pub stopped_ticks: u64,
    pub streak_ticks: u64,
    pub longest_streak_ticks: u64,
    pub bins: SpeedBins,
    pub vv_collisions: u64,
    pub vnv_collisions: u64,
    pub serious_collisions: u64,
    pub pass_throughs: u64,
    pub removed: bool,
}

impl VehicleMetrics {
    pub fn new(vehicle_id: u32) -> Self {
        Self {
            vehicle_id,
            ..Default::default()
        }
    }

    /// Accumulates one tick at `speed` for a living vehicle.
    pub fn record_tick(&mut self, speed: f64, dt: f64) {
        self.alive_ticks += 1;
        self.distance_total += speed * dt;
        self.bins.ticks[bin_speed(speed)] += 1;
        if speed < STOPPED_SPEED {
            self.stopped_ticks += 1;
            self.streak_ticks += 1;
            self.longest_streak_ticks = self.longest_streak_ticks.max(self.streak_ticks);
        } else {
            self.streak_ticks = 0;
        }
    }

    pub fn count_collision(&mut self, kind: CollisionKind) {
        match kind {
            CollisionKind::VehicleVehicle => self.vv_collisions += 1,
            CollisionKind::VehicleNonVehicle => self.vnv_collisions += 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalMetrics {
    pub vv_collisions: u64,
    pub vnv_collisions: u64,
    pub serious_collisions: u64,
    pub total_collisions: u64,
    pub pass_throughs: u64,
    pub removed_vehicles: u64,
    pub active_vehicles: u64,
    pub spawned_vehicles: u64,
}

impl GlobalMetrics {
    pub fn count_collision(&mut self, kind: CollisionKind) {
        match kind {
            CollisionKind::VehicleVehicle => self.vv_collisions += 1,
            CollisionKind::VehicleNonVehicle => self.vnv_collisions += 1,
        }
        self.total_collisions += 1;
    }

    /// The bookkeeping identities that must hold at every capture.
    pub fn identities_hold(&self) -> bool {
        self.total_collisions == self.vv_collisions + self.vnv_collisions
            && self.active_vehicles + self.removed_vehicles == self.spawned_vehicles
            && self.removed_vehicles <= self.serious_collisions
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuelModel {
    pub idle_gallons_per_hour: f64,
    pub moving_gallons_per_mile: f64,
    pub unit_to_mile: f64,
    pub co2_grams_per_gallon: f64,
}

impl Default for FuelModel {
    fn default() -> Self {
        Self {
            idle_gallons_per_hour: 0.3,
            moving_gallons_per_mile: 0.04,
            unit_to_mile: 1.0 / 1609.34,
            co2_grams_per_gallon: 8887.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuelEstimate {
    pub gallons: f64,
    pub co2_grams: f64,
}

impl FuelModel {
    pub fn absolute(&self, distance: f64, stopped_seconds: f64) -> FuelEstimate {
        let miles = distance * self.unit_to_mile;
        let gallons = self.idle_gallons_per_hour * (stopped_seconds / 3600.0) + self.moving_gallons_per_mile * miles;
        FuelEstimate {
            gallons,
            co2_grams: gallons * self.co2_grams_per_gallon,
        }
    }

    /// Gallons and CO2 grams per mile driven.
    pub fn per_mile(&self, distance: f64, stopped_seconds: f64) -> Result<FuelEstimate, MetricsError> {
        if !(distance > 0.0) {
            return Err(MetricsError::ZeroDistance);
        }
        let miles = distance * self.unit_to_mile;
        let abs = self.absolute(distance, stopped_seconds);
        Ok(FuelEstimate {
            gallons: abs.gallons / miles,
            co2_grams: abs.co2_grams / miles,
        })
    }
}

pub fn estimate_fuel_co2(m: &VehicleMetrics, model: &FuelModel, dt: f64) -> Result<FuelEstimate, MetricsError> {
    model.per_mile(m.distance_total, m.stopped_ticks as f64 * dt)
}

/// One row of the collision event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub time: f64,
    pub vehicle_id: u32,
    pub other: Option<Body>,
    pub kind: CollisionKind,
    pub episode_duration: f64,
    pub serious: bool,
    pub removed: bool,
}

/// Time spent in each phase by one light at a capture.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalRecord {
    pub signal_id: u32,
    pub kind: &'static str,
    pub phase_seconds: [f64; 6],
    pub pass_throughs: u64,
}

pub const VEHICLE_COLUMNS: &[&str] = &[
    "capture_time",
    "vehicle_id",
    "alive",
    "distance",
    "stopped_total",
    "stopped_longest_streak",
    "stopped_current_streak",
    "bin_0_5",
    "bin_5_10",
    "bin_10_15",
    "bin_15_20",
    "bin_20_25",
    "bin_25_30",
    "bin_30_35",
    "vv_collisions",
    "vnv_collisions",
    "serious_collisions",
    "pass_throughs",
    "fuel_gallons",
    "co2_grams",
    "fuel_per_mile",
    "co2_per_mile",
];

pub const COLLISION_COLUMNS: &[&str] = &[
    "time",
    "vehicle_id",
    "other",
    "kind",
    "episode_duration",
    "serious",
    "removed",
];

pub const SIGNAL_COLUMNS: &[&str] = &[
    "capture_time",
    "signal_id",
    "kind",
    "green_a",
    "yellow_a",
    "all_red_a",
    "green_b",
    "yellow_b",
    "all_red_b",
    "pass_throughs",
];

pub fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

/// Vehicle-metrics rows for one capture, in vehicle id order.
pub fn vehicle_rows(time: f64, metrics: &[VehicleMetrics], model: &FuelModel, dt: f64) -> Vec<Vec<String>> {
    let mut sorted: Vec<&VehicleMetrics> = metrics.iter().collect();
    sorted.sort_by_key(|m| m.vehicle_id);
    sorted
        .into_iter()
        .map(|m| {
            let stopped = m.stopped_ticks as f64 * dt;
            let abs = model.absolute(m.distance_total, stopped);
            let per_mile = model.per_mile(m.distance_total, stopped).ok();
            let mut row = vec![
                fmt6(time),
                m.vehicle_id.to_string(),
                u8::from(!m.removed).to_string(),
                fmt6(m.distance_total),
                fmt6(stopped),
                fmt6(m.longest_streak_ticks as f64 * dt),
                fmt6(m.streak_ticks as f64 * dt),
            ];
            row.extend((0..SPEED_BIN_COUNT).map(|k| fmt6(m.bins.seconds(k, dt))));
            row.extend([
                m.vv_collisions.to_string(),
                m.vnv_collisions.to_string(),
                m.serious_collisions.to_string(),
                m.pass_throughs.to_string(),
                fmt6(abs.gallons),
                fmt6(abs.co2_grams),
                per_mile.map(|p| fmt6(p.gallons)).unwrap_or_default(),
                per_mile.map(|p| fmt6(p.co2_grams)).unwrap_or_default(),
            ]);
            row
        })
        .collect()
}

pub fn collision_rows(events: &[CollisionEvent]) -> Vec<Vec<String>> {
    events
        .iter()
        .map(|e| {
            vec![
                fmt6(e.time),
                e.vehicle_id.to_string(),
                e.other.map(|b| b.to_string()).unwrap_or_default(),
                e.kind.label().to_string(),
                fmt6(e.episode_duration),
                u8::from(e.serious).to_string(),
                u8::from(e.removed).to_string(),
            ]
        })
        .collect()
}

pub fn signal_rows(time: f64, records: &[SignalRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| {
            let mut row = vec![fmt6(time), r.signal_id.to_string(), r.kind.to_string()];
            row.extend(r.phase_seconds.iter().map(|&s| fmt6(s)));
            row.push(r.pass_throughs.to_string());
            row
        })
        .collect()
}

/// Writes a header and rows. Captures append by passing several row batches.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), MetricsError> {
    let p = path.display().to_string();
    let mut w = csv::Writer::from_path(path).map_err(|source| MetricsError::Csv { path: p.clone(), source })?;
    w.write_record(header).map_err(|source| MetricsError::Csv { path: p.clone(), source })?;
    for r in rows {
        w.write_record(r).map_err(|source| MetricsError::Csv { path: p.clone(), source })?;
    }
    w.flush().map_err(|source| MetricsError::Io { path: p, source })
}

pub fn write_metrics_csv(path: &Path, captures: &[(f64, Vec<VehicleMetrics>)], model: &FuelModel, dt: f64) -> Result<(), MetricsError> {
    let rows: Vec<Vec<String>> = captures
        .iter()
        .flat_map(|(t, ms)| vehicle_rows(*t, ms, model, dt))
        .collect();
    write_csv(path, VEHICLE_COLUMNS, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DT;
    use approx::assert_abs_diff_eq;

    #[test]
    fn bin_examples() {
        assert_eq!(bin_speed(0.0), 0);
        assert_eq!(bin_speed(12.0), 2);
        assert_eq!(bin_speed(35.0), 6);
        assert_eq!(bin_speed(5.0), 1);
        assert_eq!(bin_speed(4.999), 0);
        assert_eq!(bin_speed(99.0), 6);
    }

    #[test]
    fn stopped_whole_episode() {
        let mut m = VehicleMetrics::new(0);
        for _ in 0..30_000 {
            m.record_tick(0.0, DT);
        }
        assert_eq!(m.stopped_ticks as f64 * DT, 600.0);
        assert_eq!(m.bins.seconds(0, DT), 600.0);
        assert_eq!(m.distance_total, 0.0);
    }

    #[test]
    fn constant_cruise() {
        let mut m = VehicleMetrics::new(0);
        for _ in 0..30_000 {
            m.record_tick(10.0, DT);
        }
        assert_abs_diff_eq!(m.distance_total, 6000.0, epsilon = 1e-6);
        assert_eq!(m.bins.seconds(2, DT), 600.0);
        assert_eq!(m.bins.total_ticks(), m.alive_ticks);
    }

    #[test]
    fn fuel_examples() {
        let f = FuelModel::default();
        let per = f.per_mile(1609.34, 0.0).unwrap();
        assert_abs_diff_eq!(per.gallons, 0.04, epsilon = 1e-12);
        assert_abs_diff_eq!(per.co2_grams, 0.04 * 8887.0, epsilon = 1e-9);
        assert!(matches!(f.per_mile(0.0, 10.0), Err(MetricsError::ZeroDistance)));
        let a = f.per_mile(1000.0, 100.0).unwrap().gallons;
        let b = f.per_mile(1000.0, 200.0).unwrap().gallons;
        assert!(b > a);
    }

    #[test]
    fn csv_line_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let ms = vec![VehicleMetrics::new(1), VehicleMetrics::new(0)];
        write_metrics_csv(&p, &[(600.0, ms)], &FuelModel::default(), DT).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("600.000000,0,"));
        assert!(lines[1].ends_with(",,"), "per-mile cells empty for zero distance");
    }
}
