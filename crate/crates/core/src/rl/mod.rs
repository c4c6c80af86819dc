//! Beam-tracking MDP, replay memory and the DDPG learner.
//!
//! One environment step spans `slots_per_step` slots. The agent either keeps
//! the current beam for all of them, or spends the first slot re-steering to
//! `a_b` and transmits in the rest. The reward is the negative number of
//! slots that added delay (tracking plus failed packets).

mod agent;
mod env;
mod replay;
mod train;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agent::{actor_objective_gradient, actor_update, chained_actor_gradient, critic_update, Agent};
pub use env::{BeamEnv, StepResult};
pub use replay::ReplayBuffer;
pub use train::{
    evaluate, evaluate_policy, rollout, train, write_training_log, EpisodeLog, EvalReport, Rollout, TrainingRun,
    EVAL_EPISODE_OFFSET, TRAINING_LOG_HEADER,
};

use crate::channel::ChannelError;
use crate::neural::NeuralError;
use crate::scenario::ScenarioError;

#[derive(Debug, Error)]
pub enum RlError {
    #[error("episode is already done")]
    EpisodeDone,
    #[error("replay buffer holds {fill} transitions, batch needs {needed}")]
    Underfilled { fill: usize, needed: usize },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("invalid agent config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// What the agent sees at the start of a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    /// Current beam direction (rad).
    pub omega: f64,
    pub y_re: f64,
    pub y_im: f64,
    /// Slots since the last tracking slot.
    pub since_track: usize,
}

/// Scales observations to O(1) network inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalizer {
    pub y_scale: f64,
    pub slots_per_step: usize,
}

/// Reference SNR (linear) that fixes the signal scale: 20 dB.
pub const SNR_REF: f64 = 100.0;
/// Cap on the normalised time-since-tracking input, in steps.
pub const MAX_STEPS_SINCE_TRACK: f64 = 10.0;

impl Normalizer {
    pub fn new(noise_variance: f64, slots_per_step: usize) -> Self {
        let y_scale = 1.0 / (3.0 * (noise_variance * SNR_REF).sqrt());
        let y_scale = if y_scale.is_finite() { y_scale } else { 1.0 / 3.0 };
        Self { y_scale, slots_per_step }
    }

    pub fn observation(&self, o: &Observation) -> [f64; 4] {
        let t = (o.since_track as f64 / self.slots_per_step as f64).min(MAX_STEPS_SINCE_TRACK);
        [o.omega / PI, o.y_re * self.y_scale, o.y_im * self.y_scale, t]
    }
}

/// Continuous action. `a_b` is the beam direction used when tracking,
/// `a_f >= 0.5` requests tracking.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    pub a_b: f64,
    pub a_f: f64,
}

pub const TRACK_THRESHOLD: f64 = 0.5;

impl Action {
    pub fn new(a_b: f64, a_f: f64) -> Self {
        Self { a_b, a_f }.clamped()
    }

    pub fn clamped(self) -> Self {
        Self { a_b: self.a_b.clamp(0.0, PI), a_f: self.a_f.clamp(0.0, 1.0) }
    }

    pub fn tracks(&self) -> bool {
        self.a_f >= TRACK_THRESHOLD
    }

    /// Both components in `[0, 1]`.
    pub fn normalized(&self) -> [f64; 2] {
        [self.a_b / PI, self.a_f]
    }

    pub fn from_normalized(v: &[f64]) -> Self {
        Self::new(v[0] * PI, v[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionTuple {
    pub state: Observation,
    pub action: Action,
    pub reward: f64,
    pub next: Observation,
    pub done: bool,
}

/// Output layer of the actor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActorOutput {
    /// Sigmoid scaled to the action bounds.
    #[default]
    ScaledSigmoid,
    /// ReLU clamped to the action bounds.
    ReluClamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Polyak factor: `target <- tau_mix * online + (1 - tau_mix) * target`.
    pub tau_mix: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Width `N_i` of the hidden layers.
    pub hidden_units: usize,
    pub slots_per_step: usize,
    pub episodes: usize,
    /// Safety cap on steps per episode.
    pub max_steps: usize,
    /// Initial exploration noise, in normalised action units.
    pub noise_sigma: f64,
    /// Per-step multiplicative decay of the noise.
    pub noise_decay: f64,
    /// Buffer fill before learning starts; 0 means `10 * batch_size`.
    pub warmup: usize,
    /// Reward added per delivered packet.
    pub packet_bonus: f64,
    /// Rewards are multiplied by this before they reach the critic.
    pub reward_scale: f64,
    pub actor_output: ActorOutput,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            lr_actor: 1e-4,
            lr_critic: 1e-4,
            tau_mix: 0.01,
            batch_size: 16,
            replay_capacity: 5000,
            hidden_units: 200,
            slots_per_step: 20,
            episodes: 1800,
            max_steps: 1000,
            noise_sigma: 0.3,
            noise_decay: 0.9995,
            warmup: 0,
            packet_bonus: 0.0,
            reward_scale: 0.05,
            actor_output: ActorOutput::ScaledSigmoid,
        }
    }
}

impl AgentConfig {
    pub fn warmup_fill(&self) -> usize {
        if self.warmup == 0 {
            10 * self.batch_size
        } else {
            self.warmup
        }
    }

    pub fn validate(&self) -> Result<(), RlError> {
        let bad = |m: &str| Err(RlError::Invalid(m.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must be in [0, 1)");
        }
        if !(self.lr_actor >= 0.0 && self.lr_critic >= 0.0) {
            return bad("learning rates must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.tau_mix) {
            return bad("tau_mix must be in [0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("need 0 < batch_size <= replay_capacity");
        }
        if self.hidden_units < 20 {
            return bad("hidden_units must be at least 20");
        }
        if self.slots_per_step < 2 {
            return bad("slots_per_step must be at least 2");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        if !(self.noise_sigma >= 0.0 && (0.0..=1.0).contains(&self.noise_decay)) {
            return bad("noise_sigma must be >= 0 and noise_decay in [0, 1]");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite() && self.packet_bonus.is_finite()) {
            return bad("reward_scale must be positive and finite");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_bounds() {
        let a = Action::new(4.0, -0.2);
        assert_eq!(a, Action { a_b: PI, a_f: 0.0 });
        assert!(!a.tracks());
        assert!(Action::new(1.0, 0.5).tracks());
        let b = Action::from_normalized(&[0.25, 0.9]);
        assert_eq!(b.normalized(), [0.25, 0.9]);
    }

    #[test]
    fn observation_scaling() {
        let n = Normalizer::new(0.01, 20);
        let o = Observation { omega: 3.0 * PI / 4.0, y_re: 3.0, y_im: -1.5, since_track: 10_000 };
        assert_eq!(n.observation(&o), [0.75, 1.0, -0.5, 10.0]);
        let o = Observation { since_track: 30, ..o };
        assert_eq!(n.observation(&o)[3], 1.5);
    }

    #[test]
    fn config_validation() {
        assert!(AgentConfig::default().validate().is_ok());
        assert!(AgentConfig { gamma: 1.0, ..Default::default() }.validate().is_err());
        assert!(AgentConfig { slots_per_step: 1, ..Default::default() }.validate().is_err());
        assert_eq!(AgentConfig::default().warmup_fill(), 160);
    }
}
