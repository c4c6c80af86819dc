//! Slot-level frame accounting.
//!
//! Every slot is either a tracking (pilot) slot, a successfully delivered
//! packet or a failed packet. A delivered packet costs one slot of delay;
//! tracking and failed slots each add one more slot to the running total.
//! The reported metric is total delay over delivered packets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelConfig, ChannelSnapshot};

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("average delay is undefined without any successful packet")]
    NoSuccessfulPackets,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotKind {
    Tracking,
    Success,
    Failure,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotOutcome {
    pub kind: SlotKind,
    pub slot_index: usize,
    /// Post-beamforming SNR; `None` for tracking slots.
    pub snr_db: Option<f64>,
}

impl SlotOutcome {
    pub fn tracking(slot_index: usize) -> Self {
        Self { kind: SlotKind::Tracking, slot_index, snr_db: None }
    }

    pub fn data(slot_index: usize, success: bool, snr_db: f64) -> Self {
        let kind = if success { SlotKind::Success } else { SlotKind::Failure };
        Self { kind, slot_index, snr_db: Some(snr_db) }
    }
}

/// Array sizes, noise level and decoding threshold of the link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkConfig {
    pub n_r: usize,
    pub n_t: usize,
    pub d_over_lambda: f64,
    pub noise_variance: f64,
    pub snr_threshold_db: f64,
}

impl From<&ChannelConfig> for LinkConfig {
    fn from(c: &ChannelConfig) -> Self {
        Self {
            n_r: c.n_r,
            n_t: c.n_t,
            d_over_lambda: c.d_over_lambda,
            noise_variance: c.noise_variance,
            snr_threshold_db: c.snr_threshold_db,
        }
    }
}

impl Default for LinkConfig {
    fn default() -> Self {
        (&ChannelConfig::default()).into()
    }
}

/// Post-beamforming SNR in dB. Zero signal gives `-inf`; zero noise with a
/// non-zero signal gives `+inf`.
pub fn snr_db(snapshot: &ChannelSnapshot, phi_bar_a: f64, phi_bar_d: f64, link: &LinkConfig) -> f64 {
    let signal = snapshot.beamformed(phi_bar_a, phi_bar_d, link.n_r, link.n_t, link.d_over_lambda).norm_sqr();
    if signal == 0.0 {
        return f64::NEG_INFINITY;
    }
    10.0 * (signal / link.noise_variance).log10()
}

/// Whether a packet sent with the given pointing decodes, and its SNR.
pub fn packet_success(snapshot: &ChannelSnapshot, phi_bar_a: f64, phi_bar_d: f64, link: &LinkConfig) -> (bool, f64) {
    let snr = snr_db(snapshot, phi_bar_a, phi_bar_d, link);
    (snr >= link.snr_threshold_db, snr)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayLedger {
    pub total_delay_slots: u64,
    pub successful_packets: u64,
    pub tracking_slots: u64,
    pub failed_slots: u64,
}

impl DelayLedger {
    pub fn new() -> Self {
        Self::default()
    }

    #[must_use]
    pub fn record(self, outcome: &SlotOutcome) -> Self {
        let mut next = self;
        next.total_delay_slots += 1;
        match outcome.kind {
            SlotKind::Success => next.successful_packets += 1,
            SlotKind::Failure => next.failed_slots += 1,
            SlotKind::Tracking => next.tracking_slots += 1,
        }
        next
    }

    pub fn record_mut(&mut self, outcome: &SlotOutcome) {
        *self = self.record(outcome);
    }

    /// Slots accounted for so far.
    pub fn slots(&self) -> u64 {
        self.successful_packets + self.tracking_slots + self.failed_slots
    }

    /// Slots that added delay beyond the one-slot baseline.
    pub fn overhead_slots(&self) -> u64 {
        self.tracking_slots + self.failed_slots
    }

    pub fn is_conserved(&self) -> bool {
        self.total_delay_slots == self.slots()
    }

    pub fn average_delay_slots(&self) -> Result<f64, LinkError> {
        if self.successful_packets == 0 {
            return Err(LinkError::NoSuccessfulPackets);
        }
        Ok(self.total_delay_slots as f64 / self.successful_packets as f64)
    }

    /// Total delay over delivered packets, in milliseconds.
    pub fn average_delay_ms(&self, slot_duration: f64) -> Result<f64, LinkError> {
        Ok(self.average_delay_slots()? * slot_duration * 1e3)
    }

    /// Like [`Self::average_delay_ms`], but an episode with no delivered packet
    /// is charged as if one packet arrived after the whole episode.
    pub fn average_delay_ms_or_episode(&self, slot_duration: f64) -> f64 {
        self.total_delay_slots as f64 / self.successful_packets.max(1) as f64 * slot_duration * 1e3
    }

    pub fn merge(&self, other: &DelayLedger) -> DelayLedger {
        DelayLedger {
            total_delay_slots: self.total_delay_slots + other.total_delay_slots,
            successful_packets: self.successful_packets + other.successful_packets,
            tracking_slots: self.tracking_slots + other.tracking_slots,
            failed_slots: self.failed_slots + other.failed_slots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::beam_gain;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    const DT: f64 = 0.005;

    fn aligned(phi: f64) -> ChannelSnapshot {
        ChannelSnapshot::single(0, Complex64::new(1.0, 0.0), phi, PI - phi)
    }

    #[test]
    fn aligned_beam_at_twenty_db_succeeds() {
        let link = LinkConfig { noise_variance: ChannelConfig::noise_for_snr_db(20.0), ..LinkConfig::default() };
        let (ok, snr) = packet_success(&aligned(2.3), 2.3, PI - 2.3, &link);
        assert!(ok);
        assert_relative_eq!(snr, 20.0, epsilon = 1e-9);
    }

    #[test]
    fn beam_at_null_fails() {
        let link = LinkConfig::default();
        let phi: f64 = 2.0;
        let null = (phi.cos() - 2.0 / 16.0).acos();
        let (ok, snr) = packet_success(&aligned(phi), null, PI - phi, &link);
        assert!(!ok);
        assert!(snr < -100.0);
        let zero = ChannelSnapshot::single(0, Complex64::new(0.0, 0.0), phi, PI - phi);
        assert_eq!(packet_success(&zero, phi, PI - phi, &link), (false, f64::NEG_INFINITY));
    }

    #[test]
    fn misaligned_decision_matches_brute_force_gain() {
        let link = LinkConfig::default();
        let phi = 2.4;
        for k in [0.25, 0.5, 1.0, 1.5, 2.0] {
            let bar = phi + k * 2.0 / 16.0;
            let (ok, snr) = packet_success(&aligned(phi), bar, PI - bar, &link);
            // Brute force: explicit element sums at both ends.
            let gr: Complex64 = (0..16)
                .map(|m| Complex64::from_polar(1.0, PI * m as f64 * (phi.cos() - bar.cos())))
                .sum::<Complex64>()
                / 16.0;
            let gt: Complex64 = (0..16)
                .map(|m| Complex64::from_polar(1.0, PI * m as f64 * ((PI - phi).cos() - (PI - bar).cos())))
                .sum::<Complex64>()
                / 16.0;
            let expect = 10.0 * ((gr * gt.conj()).norm_sqr() / link.noise_variance).log10();
            assert_relative_eq!(snr, expect, epsilon = 1e-9);
            assert_eq!(ok, expect >= 5.0);
            assert_relative_eq!(gr.norm(), beam_gain(phi, bar, 16, 0.5).norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn ledger_examples() {
        let mut l = DelayLedger::new();
        for i in 0..10 {
            l.record_mut(&SlotOutcome::data(i, true, 20.0));
        }
        assert_relative_eq!(l.average_delay_ms(DT).unwrap(), 5.0, epsilon = 1e-12);

        let mut l = DelayLedger::new();
        for i in 0..8 {
            l.record_mut(&SlotOutcome::data(i, true, 20.0));
        }
        l.record_mut(&SlotOutcome::tracking(8));
        l.record_mut(&SlotOutcome::data(9, false, 0.0));
        assert_relative_eq!(l.average_delay_ms(DT).unwrap(), 6.25, epsilon = 1e-12);
        assert!(l.is_conserved());

        let all = (0..2000).fold(DelayLedger::new(), |l, i| l.record(&SlotOutcome::data(i, true, 20.0)));
        assert_relative_eq!(all.average_delay_ms(DT).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn average_delay_guard_and_reference_value() {
        let l = DelayLedger { total_delay_slots: 2000, successful_packets: 667, tracking_slots: 100, failed_slots: 1233 };
        assert!((l.average_delay_ms(DT).unwrap() - 15.0).abs() < 0.01);
        assert_eq!(DelayLedger::new().average_delay_ms(DT), Err(LinkError::NoSuccessfulPackets));
        assert_relative_eq!(
            DelayLedger { total_delay_slots: 20, ..DelayLedger::new() }.average_delay_ms_or_episode(DT),
            100.0
        );
    }

    #[test]
    fn delay_never_below_one_slot() {
        let mut l = DelayLedger::new();
        let kinds = [true, false, true, true, false, true];
        for (i, &k) in kinds.iter().enumerate() {
            l.record_mut(&if i % 3 == 0 { SlotOutcome::tracking(i) } else { SlotOutcome::data(i, k, 0.0) });
            if l.successful_packets > 0 {
                assert!(l.average_delay_ms(DT).unwrap() >= DT * 1e3);
            }
        }
        assert!(l.average_delay_ms(DT).unwrap() > DT * 1e3);
    }
}
