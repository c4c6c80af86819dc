use std::io::Write;
use std::time::Instant;

use super::{actor_update, critic_update, Action, Agent, AgentConfig, BeamEnv, Observation, ReplayBuffer, RlError, TransitionTuple};
use crate::channel::{ChannelConfig, ChannelSource};
use crate::link::DelayLedger;
use crate::rng::{episode_rng, stream, stream_rng};
use crate::scenario::ScenarioConfig;

/// Episode indices at or above this are reserved for evaluation rollouts,
/// so evaluation never replays a training episode's channel.
pub const EVAL_EPISODE_OFFSET: u64 = 1 << 24;

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    pub ep_packet: u64,
    pub ep_reward: f64,
    pub avg_delay_ms: f64,
    /// Only filled when timing is requested, to keep logs reproducible.
    pub wall_seconds: Option<f64>,
    pub ledger: DelayLedger,
}

pub struct TrainingRun {
    pub agent: Agent,
    pub log: Vec<EpisodeLog>,
}

/// Result of a full episode under some policy.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub ledger: DelayLedger,
    pub steps: usize,
    pub reward: f64,
    pub packets: u64,
}

/// Runs one episode with `policy` choosing every action.
pub fn rollout<F>(
    scenario: &ScenarioConfig,
    channel: &ChannelConfig,
    source: &ChannelSource,
    slots_per_step: usize,
    env_rng: crate::rng::SimRng,
    mut policy: F,
) -> Result<Rollout, RlError>
where
    F: FnMut(&Observation) -> Result<Action, RlError>,
{
    let (mut env, mut obs) = BeamEnv::reset(scenario, channel, source, slots_per_step, 0.0, env_rng)?;
    let mut out = Rollout { ledger: DelayLedger::new(), steps: 0, reward: 0.0, packets: 0 };
    while !env.is_done() {
        let r = env.step(policy(&obs)?)?;
        out.steps += 1;
        out.reward += r.reward;
        out.packets += r.packets;
        obs = r.observation;
    }
    out.ledger = *env.ledger();
    Ok(out)
}

/// DDPG training. Each episode draws its channel from its own stream, so
/// two runs with the same seed see the same channels whatever the agents do.
pub fn train(
    config: &AgentConfig,
    scenario: &ScenarioConfig,
    channel: &ChannelConfig,
    source: &ChannelSource,
    seed: u64,
    timing: bool,
) -> Result<TrainingRun, RlError> {
    config.validate()?;
    let mut agent = Agent::new(config, channel.noise_variance, &mut stream_rng(seed, stream::AGENT_INIT))?;
    let mut explore_rng = stream_rng(seed, stream::EXPLORATION);
    let mut replay_rng = stream_rng(seed, stream::REPLAY);
    let mut buffer = ReplayBuffer::new(config.replay_capacity);
    let warmup = config.warmup_fill().max(config.batch_size);
    let mut sigma = config.noise_sigma;
    let mut log = Vec::with_capacity(config.episodes);

    for episode in 0..config.episodes {
        let started = Instant::now();
        let (mut env, mut obs) = BeamEnv::reset(
            scenario,
            channel,
            source,
            config.slots_per_step,
            config.packet_bonus,
            episode_rng(seed, episode as u64),
        )?;
        let mut steps = 0;
        let mut ep_reward = 0.0;
        let mut ep_packet = 0;
        while !env.is_done() && steps < config.max_steps {
            let action = agent.explore(&obs, sigma, &mut explore_rng)?;
            sigma *= config.noise_decay;
            let r = env.step(action)?;
            buffer.push(TransitionTuple { state: obs, action, reward: r.reward, next: r.observation, done: r.done });
            if buffer.len() >= warmup {
                let batch = buffer.sample(config.batch_size, &mut replay_rng)?;
                critic_update(&mut agent, &batch)?;
                actor_update(&mut agent, &batch)?;
                agent.soft_update_targets()?;
            }
            ep_reward += r.reward;
            ep_packet += r.packets;
            steps += 1;
            obs = r.observation;
        }
        let ledger = *env.ledger();
        log.push(EpisodeLog {
            episode,
            steps,
            ep_packet,
            ep_reward,
            avg_delay_ms: ledger.average_delay_ms_or_episode(scenario.slot_duration),
            wall_seconds: timing.then(|| started.elapsed().as_secs_f64()),
            ledger,
        });
    }
    Ok(TrainingRun { agent, log })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Ledgers of all episodes combined.
    pub ledger: DelayLedger,
    /// Delay over the combined ledger (ms).
    pub avg_delay_ms: f64,
    pub episode_delays_ms: Vec<f64>,
    pub packets: u64,
}

/// Greedy (noise-free) rollouts of the agent's actor.
pub fn evaluate(
    agent: &Agent,
    scenario: &ScenarioConfig,
    channel: &ChannelConfig,
    source: &ChannelSource,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, RlError> {
    evaluate_policy(scenario, channel, source, agent.config.slots_per_step, episodes, seed, |o| agent.act(o))
}

/// Like [`evaluate`] for an arbitrary policy.
pub fn evaluate_policy<F>(
    scenario: &ScenarioConfig,
    channel: &ChannelConfig,
    source: &ChannelSource,
    slots_per_step: usize,
    episodes: usize,
    seed: u64,
    mut policy: F,
) -> Result<EvalReport, RlError>
where
    F: FnMut(&Observation) -> Result<Action, RlError>,
{
    let mut ledger = DelayLedger::new();
    let mut episode_delays_ms = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let env_rng = episode_rng(seed, EVAL_EPISODE_OFFSET + e as u64);
        let r = rollout(scenario, channel, source, slots_per_step, env_rng, &mut policy)?;
        episode_delays_ms.push(r.ledger.average_delay_ms_or_episode(scenario.slot_duration));
        ledger = ledger.merge(&r.ledger);
    }
    Ok(EvalReport {
        avg_delay_ms: ledger.average_delay_ms_or_episode(scenario.slot_duration),
        packets: ledger.successful_packets,
        ledger,
        episode_delays_ms,
    })
}

pub const TRAINING_LOG_HEADER: [&str; 6] = ["episode", "steps", "ep_packet", "ep_reward", "avg_delay_ms", "wall_seconds"];

pub fn write_training_log<W: Write>(out: W, log: &[EpisodeLog]) -> Result<(), RlError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| RlError::Io(e.into());
    w.write_record(TRAINING_LOG_HEADER).map_err(io)?;
    for row in log {
        w.write_record([
            row.episode.to_string(),
            row.steps.to_string(),
            row.ep_packet.to_string(),
            row.ep_reward.to_string(),
            row.avg_delay_ms.to_string(),
            row.wall_seconds.map(|s| format!("{s:.3}")).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> AgentConfig {
        AgentConfig { hidden_units: 20, episodes: 3, ..AgentConfig::default() }
    }

    #[test]
    fn no_learning_smoke_run() {
        let cfg = AgentConfig { lr_actor: 0.0, lr_critic: 0.0, tau_mix: 0.0, episodes: 1, ..tiny() };
        let scenario = ScenarioConfig::default();
        let run = train(&cfg, &scenario, &ChannelConfig::default(), &ChannelSource::SyntheticLos, 5, false).unwrap();
        assert_eq!(run.log.len(), 1);
        assert_eq!(run.log[0].steps, 100);
        assert_eq!(run.agent.actor, run.agent.actor_target);
        assert_eq!(run.agent.critic, run.agent.critic_target);
        let fresh = Agent::new(&cfg, 0.01, &mut stream_rng(5, stream::AGENT_INIT)).unwrap();
        assert_eq!(run.agent.actor, fresh.actor);
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let scenario = ScenarioConfig::default();
        let a = train(&tiny(), &scenario, &ChannelConfig::default(), &ChannelSource::SyntheticLos, 9, false).unwrap();
        let b = train(&tiny(), &scenario, &ChannelConfig::default(), &ChannelSource::SyntheticLos, 9, false).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.agent.actor, b.agent.actor);
        let mut buf = Vec::new();
        write_training_log(&mut buf, &a.log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("episode,steps,ep_packet,ep_reward,avg_delay_ms,wall_seconds\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn forced_policies() {
        let scenario = ScenarioConfig::stationary(0.0);
        let ch = ChannelConfig { rho: 1.0, ..ChannelConfig::default() };
        let src = ChannelSource::SyntheticLos;
        let never = evaluate_policy(&scenario, &ch, &src, 20, 2, 1, |o| Ok(Action::new(o.omega, 0.0))).unwrap();
        assert!((never.avg_delay_ms - 5.0).abs() < 1e-12);
        let always = evaluate_policy(&scenario, &ch, &src, 20, 2, 1, |o| Ok(Action::new(o.omega, 1.0))).unwrap();
        assert!((always.avg_delay_ms - 5.0 * 20.0 / 19.0).abs() < 1e-12);
    }
}
