use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ChannelConfig, ChannelSnapshot, GainProcess, PathComponent, Trace};
use crate::scenario::{aoa_at, KinematicState, ScenarioConfig};

/// Angular offsets (rad) of the synthetic reflected paths relative to the LoS AoA.
const REFLECTION_AOA_OFFSETS: [f64; 6] = [0.35, -0.45, 0.6, -0.75, 0.9, -1.05];
/// AoD offsets are a scaled mirror of the AoA offsets.
const REFLECTION_AOD_SCALE: f64 = -0.7;

/// Where per-slot channel snapshots come from.
#[derive(Clone, Debug, PartialEq)]
pub enum ChannelSource {
    /// Single LoS path whose angles follow the vehicle and whose gain is AR(1).
    SyntheticLos,
    /// LoS plus `paths - 1` reflections at fixed angular offsets.
    SyntheticMultipath { paths: usize, reflection_coeff: f64 },
    /// Pre-computed snapshots indexed by vehicle position.
    Trace(Arc<Trace>),
}

impl fmt::Display for ChannelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelSource::SyntheticLos => write!(f, "synthetic-los"),
            ChannelSource::SyntheticMultipath { .. } => write!(f, "synthetic-multipath"),
            ChannelSource::Trace(t) => write!(f, "trace:{}", t.origin),
        }
    }
}

impl ChannelSource {
    pub fn multipath_from(cfg: &ChannelConfig) -> Self {
        ChannelSource::SyntheticMultipath { paths: cfg.multipath_paths, reflection_coeff: cfg.reflection_coeff }
    }
}

fn clamp_angle(phi: f64) -> f64 {
    phi.clamp(1e-3, PI - 1e-3)
}

/// Geometry of the synthetic multipath set at distance `s`.
pub(crate) fn multipath_angles(s: f64, scenario: &ScenarioConfig, paths: usize) -> Vec<(f64, f64)> {
    let aoa = aoa_at(s, scenario);
    let mut out = vec![(aoa, PI - aoa)];
    for l in 1..paths {
        let off = REFLECTION_AOA_OFFSETS[(l - 1) % REFLECTION_AOA_OFFSETS.len()];
        out.push((clamp_angle(aoa + off), clamp_angle(PI - aoa + REFLECTION_AOD_SCALE * off)));
    }
    out
}

/// Per-episode channel state machine.
#[derive(Clone, Debug)]
pub struct ChannelProcess {
    source: ChannelSource,
    scenario: ScenarioConfig,
    gains: Vec<GainProcess>,
    scales: Vec<f64>,
    started: bool,
}

impl ChannelProcess {
    /// The LoS gain starts at `1 + 0j`; reflected gains start from their
    /// stationary distribution.
    pub fn new<R: Rng + ?Sized>(source: &ChannelSource, cfg: &ChannelConfig, scenario: &ScenarioConfig, rng: &mut R) -> Self {
        let paths = match source {
            ChannelSource::SyntheticLos | ChannelSource::Trace(_) => 1,
            ChannelSource::SyntheticMultipath { paths, .. } => (*paths).max(1),
        };
        let mut gains = vec![GainProcess::new(Complex64::new(1.0, 0.0), cfg.rho)];
        let mut scales = vec![1.0];
        for _ in 1..paths {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            gains.push(GainProcess::new(Complex64::new(re, im), cfg.rho));
            if let ChannelSource::SyntheticMultipath { reflection_coeff, .. } = source {
                scales.push(*reflection_coeff);
            }
        }
        Self { source: source.clone(), scenario: scenario.clone(), gains, scales, started: false }
    }

    /// Snapshot for `slot` with the vehicle at `kin`. Each call after the
    /// first advances the gain processes by one slot.
    pub fn snapshot<R: Rng + ?Sized>(&mut self, slot: usize, kin: &KinematicState, rng: &mut R) -> ChannelSnapshot {
        if self.started {
            for g in &mut self.gains {
                *g = g.evolve(rng);
            }
        }
        self.started = true;
        match &self.source {
            ChannelSource::Trace(trace) => {
                let mut snap = trace.at_position(kin.s).snapshot.clone();
                snap.slot = slot;
                snap
            }
            _ => {
                let angles = multipath_angles(kin.s, &self.scenario, self.gains.len());
                let paths = angles
                    .into_iter()
                    .zip(self.gains.iter().zip(&self.scales))
                    .map(|((aoa, aod), (g, scale))| PathComponent { gain: g.alpha * *scale, aoa, aod })
                    .collect();
                ChannelSnapshot { slot, paths }
            }
        }
    }

    /// Current LoS gain of the synthetic process.
    pub fn los_gain(&self) -> Complex64 {
        self.gains[0].alpha
    }
}
