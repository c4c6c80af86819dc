use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Action, ActorOutput, AgentConfig, Normalizer, Observation, RlError, TransitionTuple};
use crate::neural::{actor_dims, apply_gradients, critic_dims, soft_update, Activation, Gradients, Mlp, OptimizerState};

pub const STATE_DIM: usize = 4;
pub const ACTION_DIM: usize = 2;

/// Actor, critic, their target copies and optimisers.
#[derive(Clone, Debug)]
pub struct Agent {
    pub config: AgentConfig,
    pub normalizer: Normalizer,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: OptimizerState,
    critic_opt: OptimizerState,
}

fn action_bounds() -> Vec<(f64, f64)> {
    vec![(0.0, PI), (0.0, 1.0)]
}

pub(crate) fn actor_activation(kind: ActorOutput) -> Activation {
    match kind {
        ActorOutput::ScaledSigmoid => Activation::ScaledSigmoid { bounds: action_bounds() },
        ActorOutput::ReluClamp => Activation::ReluClamp { bounds: action_bounds() },
    }
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(config: &AgentConfig, noise_variance: f64, rng: &mut R) -> Result<Self, RlError> {
        config.validate()?;
        let actor = Mlp::new(
            &actor_dims(STATE_DIM, ACTION_DIM, config.hidden_units),
            actor_activation(config.actor_output),
            rng,
        );
        let critic = Mlp::new(&critic_dims(STATE_DIM, ACTION_DIM, config.hidden_units), Activation::Identity, rng);
        Ok(Self::from_networks(config, noise_variance, actor, critic))
    }

    pub fn from_networks(config: &AgentConfig, noise_variance: f64, actor: Mlp, critic: Mlp) -> Self {
        Self {
            normalizer: Normalizer::new(noise_variance, config.slots_per_step),
            actor_opt: OptimizerState::adam(&actor, config.lr_actor),
            critic_opt: OptimizerState::adam(&critic, config.lr_critic),
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            config: config.clone(),
        }
    }

    /// Greedy action.
    pub fn act(&self, obs: &Observation) -> Result<Action, RlError> {
        let out = self.actor.predict(&self.normalizer.observation(obs))?;
        Ok(Action::new(out[0], out[1]))
    }

    /// Greedy action plus Gaussian noise of `sigma` normalised units, clamped.
    pub fn explore<R: Rng + ?Sized>(&self, obs: &Observation, sigma: f64, rng: &mut R) -> Result<Action, RlError> {
        let a = self.act(obs)?;
        let nb: f64 = rng.sample(StandardNormal);
        let nf: f64 = rng.sample(StandardNormal);
        Ok(Action::new(a.a_b + PI * sigma * nb, a.a_f + sigma * nf))
    }

    pub fn critic_input(&self, obs: &Observation, action: &Action) -> Vec<f64> {
        let mut v = self.normalizer.observation(obs).to_vec();
        v.extend(action.normalized());
        v
    }

    /// `Q'(s', tau'(s'))` from the target networks.
    fn target_value(&self, next: &Observation) -> Result<f64, RlError> {
        let out = self.actor_target.predict(&self.normalizer.observation(next))?;
        let a = Action::new(out[0], out[1]);
        Ok(self.critic_target.predict(&self.critic_input(next, &a))?[0])
    }

    pub fn soft_update_targets(&mut self) -> Result<(), RlError> {
        self.actor_target = soft_update(&self.actor_target, &self.actor, self.config.tau_mix)?;
        self.critic_target = soft_update(&self.critic_target, &self.critic, self.config.tau_mix)?;
        Ok(())
    }
}

/// One descent step on the mean squared TD error. Returns the loss before
/// the step. Targets use the target networks and drop the bootstrap term
/// on terminal transitions.
pub fn critic_update(agent: &mut Agent, batch: &[TransitionTuple]) -> Result<f64, RlError> {
    if batch.is_empty() {
        return Err(RlError::Underfilled { fill: 0, needed: 1 });
    }
    let m = batch.len() as f64;
    let mut grads = Gradients::zeros_like(&agent.critic);
    let mut loss = 0.0;
    for t in batch {
        let mut y = agent.config.reward_scale * t.reward;
        if !t.done {
            y += agent.config.gamma * agent.target_value(&t.next)?;
        }
        let (q, cache) = agent.critic.forward(&agent.critic_input(&t.state, &t.action))?;
        let err = q[0] - y;
        loss += err * err / m;
        agent.critic.backward_into(&cache, &[2.0 * err / m], &mut grads)?;
    }
    if !loss.is_finite() {
        return Err(RlError::NonFinite("critic loss"));
    }
    apply_gradients(&mut agent.critic, &grads, &mut agent.critic_opt)?;
    Ok(loss)
}

/// Gradient of the mean of `critic(s, tau(s))` with respect to the actor
/// parameters, chained through the action, together with that mean.
/// `critic` returns the value and its gradient in action units.
pub fn chained_actor_gradient<F>(agent: &Agent, states: &[Observation], critic: F) -> Result<(f64, Gradients), RlError>
where
    F: Fn(&Observation, &Action) -> Result<(f64, [f64; 2]), RlError>,
{
    let m = states.len() as f64;
    let mut grads = Gradients::zeros_like(&agent.actor);
    let mut objective = 0.0;
    for s in states {
        let (out, cache) = agent.actor.forward(&agent.normalizer.observation(s))?;
        let (q, dq_da) = critic(s, &Action { a_b: out[0], a_f: out[1] })?;
        objective += q / m;
        agent.actor.backward_into(&cache, &[dq_da[0] / m, dq_da[1] / m], &mut grads)?;
    }
    Ok((objective, grads))
}

/// [`chained_actor_gradient`] through the online critic.
pub fn actor_objective_gradient(agent: &Agent, states: &[Observation]) -> Result<(f64, Gradients), RlError> {
    chained_actor_gradient(agent, states, |s, a| {
        let (q, cache) = agent.critic.forward(&agent.critic_input(s, a))?;
        let (_, dq_dinput) = agent.critic.backward(&cache, &[1.0])?;
        // The critic sees a_b / pi.
        Ok((q[0], [dq_dinput[STATE_DIM] / PI, dq_dinput[STATE_DIM + 1]]))
    })
}

/// One ascent step on the mean critic value of the actor's actions.
/// Returns the objective before the step.
pub fn actor_update(agent: &mut Agent, batch: &[TransitionTuple]) -> Result<f64, RlError> {
    if batch.is_empty() {
        return Err(RlError::Underfilled { fill: 0, needed: 1 });
    }
    let states: Vec<Observation> = batch.iter().map(|t| t.state).collect();
    let (objective, mut grads) = actor_objective_gradient(agent, &states)?;
    if !objective.is_finite() {
        return Err(RlError::NonFinite("actor objective"));
    }
    grads.scale(-1.0);
    apply_gradients(&mut agent.actor, &grads, &mut agent.actor_opt)?;
    Ok(objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Layer;
    use crate::rng::stream_rng;

    fn small_config() -> AgentConfig {
        AgentConfig { hidden_units: 20, reward_scale: 1.0, ..AgentConfig::default() }
    }

    fn tuple(seed: u64) -> TransitionTuple {
        let mut rng = stream_rng(seed, 0);
        let mut obs = || Observation {
            omega: rng.random_range(1.0..2.5),
            y_re: rng.random_range(-1.0..1.0),
            y_im: rng.random_range(-1.0..1.0),
            since_track: rng.random_range(0..200),
        };
        let (state, next) = (obs(), obs());
        TransitionTuple { state, action: Action::new(1.9, 0.3), reward: -((seed % 5) as f64), next, done: seed % 3 == 0 }
    }

    fn zero_critic(agent: &mut Agent) {
        for l in agent.critic.layers.iter_mut().chain(agent.critic_target.layers.iter_mut()) {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.bias.iter_mut().for_each(|w| *w = 0.0);
        }
    }

    #[test]
    fn zero_critic_with_no_discount_regresses_on_rewards() {
        let cfg = AgentConfig { gamma: 0.0, ..small_config() };
        let mut agent = Agent::new(&cfg, 0.01, &mut stream_rng(1, 3)).unwrap();
        zero_critic(&mut agent);
        let batch: Vec<_> = (0..16).map(tuple).collect();
        let expect = batch.iter().map(|t| t.reward * t.reward).sum::<f64>() / 16.0;
        let loss = critic_update(&mut agent, &batch).unwrap();
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn identical_tuples_match_single_tuple_loss() {
        let cfg = small_config();
        let agent = Agent::new(&cfg, 0.01, &mut stream_rng(1, 3)).unwrap();
        let t = tuple(4);
        let a = critic_update(&mut agent.clone(), &[t]).unwrap();
        let b = critic_update(&mut agent.clone(), &[t; 16]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn critic_step_reduces_loss() {
        let cfg = AgentConfig { lr_critic: 1e-3, ..small_config() };
        let mut agent = Agent::new(&cfg, 0.01, &mut stream_rng(2, 3)).unwrap();
        // Single-parameter linear critic: Q = w * a_f.
        let mut l = Layer::zeros(6, 1, Activation::Identity);
        l.weights[5] = 0.5;
        agent.critic = Mlp { layers: vec![l] };
        agent.critic_target = agent.critic.clone();
        agent.critic_opt = OptimizerState::adam(&agent.critic, 1e-3);
        let batch: Vec<_> = (0..16).map(tuple).collect();
        let before = critic_update(&mut agent, &batch).unwrap();
        // Targets come from the untouched target critic, so the second
        // pre-step loss is the post-step loss of the first.
        let after = critic_update(&mut agent, &batch).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn constant_critic_leaves_actor_unchanged() {
        let mut agent = Agent::new(&small_config(), 0.01, &mut stream_rng(3, 3)).unwrap();
        zero_critic(&mut agent);
        agent.critic.layers.last_mut().unwrap().bias[0] = 2.5;
        let before = agent.actor.clone();
        let batch: Vec<_> = (0..16).map(tuple).collect();
        let obj = actor_update(&mut agent, &batch).unwrap();
        assert_eq!(obj, 2.5);
        assert_eq!(agent.actor, before);
    }

    #[test]
    fn actor_climbs_a_quadratic_critic() {
        let cfg = AgentConfig { lr_actor: 1e-2, ..small_config() };
        let mut agent = Agent::new(&cfg, 0.01, &mut stream_rng(4, 3)).unwrap();
        let best = [0.7 * PI, 0.2];
        let quadratic = |_: &Observation, a: &Action| {
            let e = [a.a_b - best[0], a.a_f - best[1]];
            Ok((-(e[0] * e[0] + e[1] * e[1]), [-2.0 * e[0], -2.0 * e[1]]))
        };
        let states: Vec<Observation> = (0..16).map(|i| tuple(i).state).collect();
        let mut opt = OptimizerState::adam(&agent.actor, 1e-2);
        for _ in 0..1500 {
            let (_, mut grads) = chained_actor_gradient(&agent, &states, quadratic).unwrap();
            grads.scale(-1.0);
            apply_gradients(&mut agent.actor, &grads, &mut opt).unwrap();
        }
        for s in &states {
            let a = agent.act(s).unwrap();
            assert!((a.a_b - best[0]).abs() < 0.05, "{a:?}");
            assert!((a.a_f - best[1]).abs() < 0.02, "{a:?}");
        }
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let cfg = small_config();
        let agent = Agent::new(&cfg, 0.01, &mut stream_rng(5, 3)).unwrap();
        let states: Vec<Observation> = (0..4).map(|i| tuple(i).state).collect();
        let (_, grads) = actor_objective_gradient(&agent, &states).unwrap();
        let analytic = grads.flat();
        let params = agent.actor.flat_params();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for i in (0..params.len()).step_by(7) {
            let eval = |delta: f64| {
                let mut a = agent.clone();
                let mut p = params.clone();
                p[i] += delta;
                a.actor.set_flat_params(&p).unwrap();
                actor_objective_gradient(&a, &states).unwrap().0
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / scale);
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn explored_actions_stay_in_bounds() {
        let agent = Agent::new(&small_config(), 0.01, &mut stream_rng(6, 3)).unwrap();
        let mut rng = stream_rng(6, 4);
        let s = tuple(1).state;
        for _ in 0..1000 {
            let a = agent.explore(&s, 5.0, &mut rng).unwrap();
            assert!((0.0..=PI).contains(&a.a_b) && (0.0..=1.0).contains(&a.a_f));
        }
    }
}
