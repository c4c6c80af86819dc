//! Intersection geometry and vehicle mobility.
//!
//! The base station sits `h_c` metres from a straight road. The vehicle
//! starts `h_r` metres before the foot of the perpendicular and drives
//! towards (and past) it under a list of constant-acceleration phases.
//! Both arrays are parallel to the road, and angles are measured from the
//! positive road direction.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("episode complete: cannot advance from t={t} s by {dt} s (total {total} s)")]
    EpisodeComplete { t: f64, dt: f64, total: f64 },
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
}

/// One constant-acceleration segment of the mobility profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MobilityPhase {
    pub duration: f64,
    pub acceleration: f64,
}

impl MobilityPhase {
    pub const fn new(duration: f64, acceleration: f64) -> Self {
        Self { duration, acceleration }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Perpendicular distance from the base station to the road (m).
    pub h_c: f64,
    /// Distance from the start position to the foot of the perpendicular (m).
    pub h_r: f64,
    /// Slot duration (s).
    pub slot_duration: f64,
    /// Episode length (s).
    pub total_time: f64,
    pub initial_velocity: f64,
    pub initial_acceleration: f64,
    /// `(duration s, acceleration m/s^2)` pairs, in order.
    #[serde(with = "phase_pairs")]
    pub phases: Vec<MobilityPhase>,
}

mod phase_pairs {
    use super::MobilityPhase;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(phases: &[MobilityPhase], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = phases.iter().map(|p| [p.duration, p.acceleration]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<MobilityPhase>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[t, a]| MobilityPhase::new(t, a)).collect())
    }
}

impl Default for ScenarioConfig {
    /// Decelerate for 4 s from 16 m/s, wait 2 s, accelerate for 4 s.
    fn default() -> Self {
        Self {
            h_c: 200.0,
            h_r: 200.0,
            slot_duration: 0.005,
            total_time: 10.0,
            initial_velocity: 16.0,
            initial_acceleration: -4.0,
            phases: vec![
                MobilityPhase::new(4.0, -4.0),
                MobilityPhase::new(2.0, 0.0),
                MobilityPhase::new(4.0, 4.0),
            ],
        }
    }
}

impl ScenarioConfig {
    /// Constant-speed drive over the default duration.
    pub fn stationary(speed: f64) -> Self {
        let base = Self::default();
        Self {
            initial_velocity: speed,
            initial_acceleration: 0.0,
            phases: vec![MobilityPhase::new(base.total_time, 0.0)],
            ..base
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.h_c > 0.0) {
            return bad(format!("h_c must be > 0, got {}", self.h_c));
        }
        if !(self.h_r >= 0.0) {
            return bad(format!("h_r must be >= 0, got {}", self.h_r));
        }
        if !(self.slot_duration > 0.0) {
            return bad(format!("slot_duration must be > 0, got {}", self.slot_duration));
        }
        if !(self.total_time > 0.0) {
            return bad(format!("total_time must be > 0, got {}", self.total_time));
        }
        if !(self.initial_velocity >= 0.0) {
            return bad(format!("initial_velocity must be >= 0, got {}", self.initial_velocity));
        }
        if self.phases.is_empty() {
            return bad("at least one mobility phase is required".into());
        }
        if let Some(p) = self.phases.iter().find(|p| !(p.duration > 0.0) || !p.acceleration.is_finite()) {
            return bad(format!("invalid phase {p:?}"));
        }
        let sum: f64 = self.phases.iter().map(|p| p.duration).sum();
        if (sum - self.total_time).abs() > 1e-9 * self.total_time.max(1.0) {
            return bad(format!("phase durations sum to {sum} s, expected total_time {}", self.total_time));
        }
        Ok(())
    }

    /// Number of whole slots in an episode.
    pub fn slot_count(&self) -> usize {
        (self.total_time / self.slot_duration).round() as usize
    }

    pub fn initial_state(&self) -> KinematicState {
        KinematicState {
            s: 0.0,
            v: self.initial_velocity,
            a: self.phases.first().map_or(self.initial_acceleration, |p| p.acceleration),
            t: 0.0,
        }
    }

    fn time_eps(&self) -> f64 {
        1e-12 * self.total_time.max(1.0)
    }

    /// Index and end time of the phase containing `t` (half-open on the right,
    /// except the last phase which also owns `t_total`).
    fn phase_at(&self, t: f64) -> (usize, f64) {
        let eps = self.time_eps();
        let mut end = 0.0;
        for (i, p) in self.phases.iter().enumerate() {
            end += p.duration;
            if t < end - eps {
                return (i, end);
            }
        }
        (self.phases.len() - 1, self.total_time)
    }

    /// Kinematic state at absolute time `t`, integrated from the start.
    pub fn state_at(&self, t: f64) -> Result<KinematicState, ScenarioError> {
        let start = self.initial_state();
        if t <= 0.0 {
            return Ok(start);
        }
        advance(&start, self, t)
    }
}

/// Vehicle motion along the road.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinematicState {
    /// Distance travelled (m).
    pub s: f64,
    /// Speed (m/s), never negative.
    pub v: f64,
    /// Effective acceleration (m/s^2); zero while held at standstill.
    pub a: f64,
    /// Elapsed time (s).
    pub t: f64,
}

/// Advances `state` by `dt` seconds under the configured phases.
///
/// Within a phase the closed-form constant-acceleration update is applied,
/// splitting `dt` at phase boundaries. A decelerating vehicle that reaches
/// zero speed stays at rest for the remainder of the phase.
pub fn advance(state: &KinematicState, cfg: &ScenarioConfig, dt: f64) -> Result<KinematicState, ScenarioError> {
    if !(dt > 0.0) {
        return Err(ScenarioError::NonPositiveStep(dt));
    }
    let eps = cfg.time_eps();
    if state.t + dt > cfg.total_time + eps {
        return Err(ScenarioError::EpisodeComplete { t: state.t, dt, total: cfg.total_time });
    }
    let target = (state.t + dt).min(cfg.total_time);
    let (mut s, mut v, mut t) = (state.s, state.v, state.t);
    while target - t > eps {
        let (idx, end) = cfg.phase_at(t);
        let acc = cfg.phases[idx].acceleration;
        let h = (end.min(target) - t).max(0.0);
        if acc < 0.0 && v + acc * h < 0.0 {
            let stop = -v / acc;
            s += v * stop + 0.5 * acc * stop * stop;
            v = 0.0;
        } else {
            s += v * h + 0.5 * acc * h * h;
            v += acc * h;
        }
        t = if end <= target { end } else { target };
    }
    let (idx, _) = cfg.phase_at(target);
    let phase_acc = cfg.phases[idx].acceleration;
    let a = if v <= 0.0 && phase_acc < 0.0 { 0.0 } else { phase_acc };
    Ok(KinematicState { s, v: v.max(0.0), a, t: target })
}

/// LoS angle of arrival at the base station for a vehicle at distance `s`.
pub fn aoa_at(s: f64, cfg: &ScenarioConfig) -> f64 {
    FRAC_PI_2 + ((cfg.h_r - s) / cfg.h_c).atan()
}

/// `(phi_A, phi_D)` of the LoS ray. With both arrays parallel to the road,
/// `phi_D = pi - phi_A`.
pub fn los_angles(state: &KinematicState, cfg: &ScenarioConfig) -> (f64, f64) {
    let phi_a = aoa_at(state.s, cfg);
    (phi_a, PI - phi_a)
}
