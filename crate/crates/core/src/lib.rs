//! Link-level simulator for mmWave V2X beam tracking.
//!
//! A vehicle crosses an intersection under a piecewise-constant acceleration
//! profile while a roadside base station keeps a ULA beam pointed at it. The
//! crate provides the kinematic scenario, a time-varying sparse channel, the
//! slot-level delay accounting, EKF and particle-filter trackers over the
//! state `[alpha_re, alpha_im, s, v, a]`, dense networks with exact
//! backpropagation and a DDPG agent that schedules tracking against data.
//!
//! Data-parallel loops (particle weighting, sweep points, seed replicas) go
//! through [`parallel`], which uses rayon when the `parallel` feature is on
//! and falls back to plain iterators otherwise.

// `!(x > 0.0)` also rejects NaN, which is the point.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod harness;
pub mod link;
pub mod neural;
pub mod parallel;
pub mod rl;
pub mod rng;
pub mod scenario;
pub mod trackers;

pub use channel::{ChannelConfig, ChannelSnapshot, ChannelSource, PathComponent};
pub use link::{DelayLedger, LinkConfig, SlotKind, SlotOutcome};
pub use scenario::{KinematicState, MobilityPhase, ScenarioConfig};
