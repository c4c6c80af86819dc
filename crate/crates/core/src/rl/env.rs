use std::f64::consts::PI;

use super::{Action, Observation, RlError};
use crate::channel::{observe, ChannelConfig, ChannelProcess, ChannelSnapshot, ChannelSource};
use crate::link::{packet_success, DelayLedger, LinkConfig, SlotOutcome};
use crate::rng::SimRng;
use crate::scenario::{advance, aoa_at, KinematicState, ScenarioConfig};

/// What one step produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    /// `-(tracking + failed)` slots, plus any packet bonus.
    pub reward: f64,
    pub done: bool,
    pub packets: u64,
}

/// The intersection environment seen by the agent.
pub struct BeamEnv {
    scenario: ScenarioConfig,
    link: LinkConfig,
    process: ChannelProcess,
    rng: SimRng,
    kin: KinematicState,
    /// Snapshot of the next slot, if already drawn.
    pending: Option<ChannelSnapshot>,
    slot: usize,
    n_slots: usize,
    beam: f64,
    since_track: usize,
    last_y: (f64, f64),
    slots_per_step: usize,
    packet_bonus: f64,
    ledger: DelayLedger,
}

impl BeamEnv {
    /// Starts an episode: vehicle at `t = 0`, beam on the initial LoS
    /// direction, and one aligned pilot to fill the observation. The pilot
    /// is not charged to the ledger.
    pub fn reset(
        scenario: &ScenarioConfig,
        channel: &ChannelConfig,
        source: &ChannelSource,
        slots_per_step: usize,
        packet_bonus: f64,
        mut rng: SimRng,
    ) -> Result<(Self, Observation), RlError> {
        scenario.validate()?;
        channel.validate()?;
        let link = LinkConfig::from(channel);
        let mut process = ChannelProcess::new(source, channel, scenario, &mut rng);
        let kin = scenario.initial_state();
        let beam = aoa_at(kin.s, scenario);
        let snap = process.snapshot(0, &kin, &mut rng);
        let y = observe(&snap, beam, PI - beam, link.n_r, link.n_t, link.d_over_lambda, link.noise_variance, &mut rng)?;
        let env = Self {
            scenario: scenario.clone(),
            link,
            process,
            rng,
            kin,
            pending: Some(snap),
            slot: 0,
            n_slots: scenario.slot_count(),
            beam,
            since_track: 0,
            last_y: (y.y_re, y.y_im),
            slots_per_step: slots_per_step.max(1),
            packet_bonus,
            ledger: DelayLedger::new(),
        };
        let obs = env.observation();
        Ok((env, obs))
    }

    pub fn observation(&self) -> Observation {
        Observation { omega: self.beam, y_re: self.last_y.0, y_im: self.last_y.1, since_track: self.since_track }
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.n_slots
    }

    pub fn ledger(&self) -> &DelayLedger {
        &self.ledger
    }

    pub fn beam(&self) -> f64 {
        self.beam
    }

    pub fn kinematics(&self) -> &KinematicState {
        &self.kin
    }

    pub fn steps_per_episode(&self) -> usize {
        self.n_slots.div_ceil(self.slots_per_step)
    }

    fn next_snapshot(&mut self) -> Result<ChannelSnapshot, RlError> {
        if let Some(s) = self.pending.take() {
            return Ok(s);
        }
        self.kin = advance(&self.kin, &self.scenario, self.scenario.slot_duration)?;
        Ok(self.process.snapshot(self.slot, &self.kin, &mut self.rng))
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult, RlError> {
        if self.is_done() {
            return Err(RlError::EpisodeDone);
        }
        let action = action.clamped();
        let before = self.ledger;
        let end = (self.slot + self.slots_per_step).min(self.n_slots);
        let mut first = true;
        while self.slot < end {
            let snap = self.next_snapshot()?;
            let outcome = if first && action.tracks() {
                self.beam = action.a_b;
                self.since_track = 0;
                SlotOutcome::tracking(self.slot)
            } else {
                let (ok, snr) = packet_success(&snap, self.beam, PI - self.beam, &self.link);
                let y = observe(
                    &snap,
                    self.beam,
                    PI - self.beam,
                    self.link.n_r,
                    self.link.n_t,
                    self.link.d_over_lambda,
                    self.link.noise_variance,
                    &mut self.rng,
                )?;
                self.last_y = (y.y_re, y.y_im);
                self.since_track += 1;
                SlotOutcome::data(self.slot, ok, snr)
            };
            self.ledger.record_mut(&outcome);
            self.slot += 1;
            first = false;
        }
        let packets = self.ledger.successful_packets - before.successful_packets;
        let overhead = self.ledger.overhead_slots() - before.overhead_slots();
        Ok(StepResult {
            observation: self.observation(),
            reward: -(overhead as f64) + self.packet_bonus * packets as f64,
            done: self.is_done(),
            packets,
        })
    }
}
