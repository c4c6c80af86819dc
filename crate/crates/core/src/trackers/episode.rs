use serde::{Deserialize, Serialize};

use super::{
    ekf_predict, ekf_update, estimate, idx, pf_predict, pf_step, BeamMeasurement, FilterState, MeasCov, MeasVec,
    ParticleSet, PointingState, StateCov, TrackerError, TransitionModel,
};
use crate::channel::{observe, ChannelConfig, ChannelProcess, ChannelSource};
use crate::link::{packet_success, DelayLedger, LinkConfig, SlotOutcome};
use crate::parallel::Exec;
use crate::rng::{stream, stream_rng, SimRng};
use crate::scenario::{advance, aoa_at, ScenarioConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerKind {
    Ekf,
    Pf,
}

impl std::fmt::Display for TrackerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrackerKind::Ekf => "ekf",
            TrackerKind::Pf => "pf",
        })
    }
}

/// Tuning of the model-based trackers.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackerParams {
    /// Pilot period (s); must be a multiple of the slot duration.
    pub tracking_interval: f64,
    /// Process-noise parameter of the kinematic block.
    pub sigma_u2: f64,
    pub particles: usize,
    /// Correction threshold; `None` means `2 / n_r`.
    pub phi_threshold: Option<f64>,
    pub exec: Exec,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self { tracking_interval: 0.1, sigma_u2: 0.5, particles: 1000, phi_threshold: None, exec: Exec::Parallel }
    }
}

/// Outcome of one tracked episode.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackedEpisode {
    pub ledger: DelayLedger,
    /// RMS error of the filtered distance over all slots (m).
    pub distance_rmse: f64,
    /// Number of beam corrections applied.
    pub corrections: usize,
}

enum Belief {
    Gaussian(FilterState),
    Particles(ParticleSet),
}

impl Belief {
    fn distance(&self) -> f64 {
        match self {
            Belief::Gaussian(fs) => fs.x[idx::S],
            Belief::Particles(ps) => estimate(ps)[idx::S],
        }
    }
}

/// Runs one episode of fixed-interval tracking with the EKF or PF.
///
/// Every `tracking_interval` one slot carries a pilot: it is observed at the
/// current pointing, the filter is updated and the beam may be corrected.
/// Every other slot carries a packet. Between pilots the filter only
/// predicts, and the pointing follows the predicted direction through the
/// same threshold rule.
pub fn run_tracked_episode(
    kind: TrackerKind,
    scenario: &ScenarioConfig,
    channel: &ChannelConfig,
    source: &ChannelSource,
    params: &TrackerParams,
    seed: u64,
) -> Result<TrackedEpisode, TrackerError> {
    scenario.validate()?;
    channel.validate()?;
    let dt = scenario.slot_duration;
    let interval_slots = (params.tracking_interval / dt).round() as usize;
    if interval_slots == 0 || (interval_slots as f64 * dt - params.tracking_interval).abs() > 1e-9 {
        return Err(TrackerError::BadInterval { interval: params.tracking_interval, slot: dt });
    }

    let link = LinkConfig::from(channel);
    let mut channel_rng: SimRng = stream_rng(seed, stream::CHANNEL);
    let mut filter_rng: SimRng = stream_rng(seed, stream::TRACKER);
    let mut process = ChannelProcess::new(source, channel, scenario, &mut channel_rng);
    let tm = TransitionModel::new(channel.rho, params.sigma_u2, dt);
    let model = BeamMeasurement::new(scenario, channel.n_r, channel.n_t, channel.d_over_lambda);
    let r = MeasCov::identity() * (channel.noise_variance / 2.0);
    let prior = FilterState::initial(scenario.initial_velocity, scenario.initial_acceleration);
    let mut belief = match kind {
        TrackerKind::Ekf => Belief::Gaussian(prior),
        TrackerKind::Pf => Belief::Particles(ParticleSet::from_gaussian(&prior, params.particles, &mut filter_rng)),
    };

    let mut kin = scenario.initial_state();
    let threshold = params.phi_threshold.unwrap_or_else(|| PointingState::default_threshold(channel.n_r));
    let mut pointing = PointingState::new(aoa_at(kin.s, scenario), threshold);
    let mut ledger = DelayLedger::new();
    let mut sq_err = 0.0;
    let mut corrections = 0;
    let n_slots = scenario.slot_count();

    // The prior already describes slot 0, so the first pilot uses a still transition.
    let still = TransitionModel { a: StateCov::identity(), q: StateCov::zeros(), ..tm };
    for k in 0..n_slots {
        let pilot = k % interval_slots == 0;
        if k > 0 {
            kin = advance(&kin, scenario, dt)?;
            belief = match belief {
                Belief::Gaussian(fs) => Belief::Gaussian(ekf_predict(&fs, &tm)),
                // pf_step propagates on pilot slots itself.
                Belief::Particles(ps) if pilot => Belief::Particles(ps),
                Belief::Particles(ps) => Belief::Particles(pf_predict(&ps, &tm, &mut filter_rng)),
            };
        }
        let snap = process.snapshot(k, &kin, &mut channel_rng);
        let beam = pointing.beam;
        let outcome = if pilot {
            let y = observe(
                &snap,
                beam,
                std::f64::consts::PI - beam,
                link.n_r,
                link.n_t,
                link.d_over_lambda,
                link.noise_variance,
                &mut channel_rng,
            )?;
            let z = MeasVec::new(y.y_re, y.y_im);
            belief = match belief {
                Belief::Gaussian(fs) => Belief::Gaussian(ekf_update(&fs, &z, beam, &model, &r)?),
                Belief::Particles(ps) => {
                    let step_tm = if k == 0 { &still } else { &tm };
                    Belief::Particles(pf_step(&ps, step_tm, &z, beam, &model, &r, &mut filter_rng, params.exec)?.set)
                }
            };
            pointing.last_track_slot = k;
            SlotOutcome::tracking(k)
        } else {
            let (ok, snr) = packet_success(&snap, beam, std::f64::consts::PI - beam, &link);
            SlotOutcome::data(k, ok, snr)
        };
        let s_hat = belief.distance();
        let next = pointing.maybe_correct(aoa_at(s_hat, scenario));
        if next.beam != pointing.beam {
            corrections += 1;
        }
        pointing = next;
        sq_err += (s_hat - kin.s).powi(2);
        ledger.record_mut(&outcome);
    }

    Ok(TrackedEpisode { ledger, distance_rmse: (sq_err / n_slots.max(1) as f64).sqrt(), corrections })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_must_be_slot_multiple() {
        let params = TrackerParams { tracking_interval: 0.0123, ..TrackerParams::default() };
        let err = run_tracked_episode(
            TrackerKind::Ekf,
            &ScenarioConfig::default(),
            &ChannelConfig::default(),
            &ChannelSource::SyntheticLos,
            &params,
            1,
        );
        assert!(matches!(err, Err(TrackerError::BadInterval { .. })));
    }

    #[test]
    fn tracking_every_slot_is_all_overhead() {
        let params = TrackerParams { tracking_interval: 0.005, ..TrackerParams::default() };
        let scenario = ScenarioConfig::default();
        let ep = run_tracked_episode(TrackerKind::Ekf, &scenario, &ChannelConfig::default(), &ChannelSource::SyntheticLos, &params, 1)
            .unwrap();
        assert_eq!(ep.ledger.tracking_slots, scenario.slot_count() as u64);
        assert_eq!(ep.ledger.successful_packets, 0);
        assert!(ep.ledger.average_delay_ms(scenario.slot_duration).is_err());
    }

    #[test]
    fn ledger_is_conserved_and_deterministic() {
        let scenario = ScenarioConfig::default();
        let params = TrackerParams { particles: 200, ..TrackerParams::default() };
        for kind in [TrackerKind::Ekf, TrackerKind::Pf] {
            let a = run_tracked_episode(kind, &scenario, &ChannelConfig::default(), &ChannelSource::SyntheticLos, &params, 4).unwrap();
            let b = run_tracked_episode(kind, &scenario, &ChannelConfig::default(), &ChannelSource::SyntheticLos, &params, 4).unwrap();
            assert_eq!(a, b);
            assert!(a.ledger.is_conserved());
            assert_eq!(a.ledger.slots(), scenario.slot_count() as u64);
            assert_eq!(a.ledger.tracking_slots, 100);
        }
    }
}
