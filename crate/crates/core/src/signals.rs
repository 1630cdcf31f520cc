//! Two-phase traffic light controllers.
//!
//! Every intersection alternates between approach pair A (travel along z) and
//! pair B (travel along x): green, 3 s yellow, 1 s all-red, then the other
//! pair. T intersections run the same machine with one signal head missing.

use crate::network::{ApproachPair, IntersectionKind, SignalId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const YELLOW_DURATION: f64 = 3.0;
pub const ALL_RED_DURATION: f64 = 1.0;
pub const MIN_GREEN: f64 = 5.0;
pub const MAX_GREEN: f64 = 60.0;
/// Vehicles closer than this to a stop line are gated.
pub const GATE_DISTANCE: f64 = 12.0;
/// On yellow, vehicles closer than this to the line are let through.
pub const YELLOW_COMMIT_DISTANCE: f64 = 6.0;

const EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("green duration {0} s outside [5, 60]")]
    OutOfRange(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    GreenA,
    YellowA,
    AllRedA,
    GreenB,
    YellowB,
    AllRedB,
}

impl Phase {
    pub const ALL: [Phase; 6] = [
        Phase::GreenA,
        Phase::YellowA,
        Phase::AllRedA,
        Phase::GreenB,
        Phase::YellowB,
        Phase::AllRedB,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Phase {
        Phase::ALL[(self.index() + 1) % 6]
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::GreenA => "green_a",
            Phase::YellowA => "yellow_a",
            Phase::AllRedA => "all_red_a",
            Phase::GreenB => "green_b",
            Phase::YellowB => "yellow_b",
            Phase::AllRedB => "all_red_b",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Light {
    Green,
    Yellow,
    Red,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalController {
    pub id: SignalId,
    pub intersection_kind: IntersectionKind,
    /// Green length in force for each pair, indexed by [`ApproachPair::index`].
    pub green_duration: [f64; 2],
    /// Requested lengths, adopted at the pair's next green onset.
    pub pending_green: [Option<f64>; 2],
    pub phase: Phase,
    pub phase_elapsed: f64,
    pub pass_through_count: u64,
    /// Ticks spent in each phase, indexed by [`Phase::index`].
    pub phase_ticks: [u64; 6],
}

impl SignalController {
    pub fn new(id: SignalId, kind: IntersectionKind, green: f64) -> Self {
        Self {
            id,
            intersection_kind: kind,
            green_duration: [green; 2],
            pending_green: [None; 2],
            phase: Phase::GreenA,
            phase_elapsed: 0.0,
            pass_through_count: 0,
            phase_ticks: [0; 6],
        }
    }

    pub fn phase_duration(&self, phase: Phase) -> f64 {
        match phase {
            Phase::GreenA => self.green_duration[0],
            Phase::GreenB => self.green_duration[1],
            Phase::YellowA | Phase::YellowB => YELLOW_DURATION,
            Phase::AllRedA | Phase::AllRedB => ALL_RED_DURATION,
        }
    }

    /// Advances the phase clock, carrying any remainder into the next phase.
    pub fn tick(&mut self, dt: f64) {
        self.phase_ticks[self.phase.index()] += 1;
        self.phase_elapsed += dt;
        while self.phase_elapsed >= self.phase_duration(self.phase) - EPS {
            let spent = self.phase_duration(self.phase);
            self.phase_elapsed = (self.phase_elapsed - spent).max(0.0);
            self.phase = self.phase.next();
            let onset = match self.phase {
                Phase::GreenA => Some(0),
                Phase::GreenB => Some(1),
                _ => None,
            };
            if let Some(p) = onset {
                if let Some(g) = self.pending_green[p].take() {
                    self.green_duration[p] = g;
                }
            }
        }
    }

    /// Requests a new green length for `pair`, effective at its next green onset.
    pub fn set_green_duration(&mut self, pair: ApproachPair, seconds: f64) -> Result<(), SignalError> {
        if !(MIN_GREEN..=MAX_GREEN).contains(&seconds) {
            return Err(SignalError::OutOfRange(seconds));
        }
        self.pending_green[pair.index()] = Some(seconds);
        Ok(())
    }

    /// The green length the pair will run next (pending request or current).
    pub fn upcoming_green(&self, pair: ApproachPair) -> f64 {
        self.pending_green[pair.index()].unwrap_or(self.green_duration[pair.index()])
    }

    pub fn light(&self, pair: ApproachPair) -> Light {
        match (self.phase, pair) {
            (Phase::GreenA, ApproachPair::A) | (Phase::GreenB, ApproachPair::B) => Light::Green,
            (Phase::YellowA, ApproachPair::A) | (Phase::YellowB, ApproachPair::B) => Light::Yellow,
            _ => Light::Red,
        }
    }

    /// 0 for green-A, 0.5 for any transition phase, 1 for green-B.
    pub fn phase_code(&self) -> f64 {
        match self.phase {
            Phase::GreenA => 0.0,
            Phase::GreenB => 1.0,
            _ => 0.5,
        }
    }

    pub fn cycle_length(&self) -> f64 {
        self.green_duration[0] + self.green_duration[1] + 2.0 * (YELLOW_DURATION + ALL_RED_DURATION)
    }
}

/// Brake factor imposed on a vehicle whose front is `d` units before the stop line.
pub fn gate_directive(light: Light, d: f64) -> f64 {
    if !(0.0..=GATE_DISTANCE).contains(&d) {
        return 0.0;
    }
    let factor = 6000.0 * (1.0 - d / GATE_DISTANCE);
    match light {
        Light::Green => 0.0,
        Light::Red => factor,
        Light::Yellow if d > YELLOW_COMMIT_DISTANCE => factor,
        Light::Yellow => 0.0,
    }
}
