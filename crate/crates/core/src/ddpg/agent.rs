use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hyper::Hyperparameters;
use super::noise::OuNoise;
use super::replay::Transition;
use crate::error::{Error, Result};
use crate::market::{MarketConfig, OfferingCurve, Step};
use crate::neural::{Activation, Gradients, Network, OptimizerState};

/// Actor, critic, their target copies and optimizer states.
///
/// The actor maps a price window to a normalized action in [−1, 1]^{2I}:
/// components `2i` and `2i+1` are the volume and price of step `i`. The
/// critic reads the window concatenated with the action.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub actor: Network,
    pub critic: Network,
    pub target_actor: Network,
    pub target_critic: Network,
    pub actor_opt: OptimizerState,
    pub critic_opt: OptimizerState,
    pub hyper: Hyperparameters,
    pub market: MarketConfig,
}

/// θ' ← τθ + (1−τ)θ' for every parameter.
pub fn soft_update(target: &mut Network, source: &Network, tau: f64) -> Result<()> {
    if !target.same_shape(source) {
        return Err(Error::shape(source.param_count(), target.param_count(), "soft update"));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::Config(format!("tau must lie in (0,1], got {tau}")));
    }
    for (t, &s) in target.params_mut().zip(source.params()) {
        *t = tau * s + (1.0 - tau) * *t;
    }
    Ok(())
}

impl Agent {
    pub fn new(state_dim: usize, market: &MarketConfig, hyper: &Hyperparameters) -> Result<Self> {
        market.validate()?;
        hyper.validate()?;
        let action_dim = market.action_dim();
        let h = hyper.hidden_size;
        let mut seeds = ChaCha8Rng::seed_from_u64(hyper.seed);
        let actor = Network::init(
            &[state_dim, h, h, action_dim],
            &[Activation::Relu, Activation::Relu, Activation::Tanh],
            seeds.random(),
        )?;
        let critic = Network::init(
            &[state_dim + action_dim, h, h, 1],
            &[Activation::Relu, Activation::Relu, Activation::Identity],
            seeds.random(),
        )?;
        Self::from_networks(actor, critic, market, hyper)
    }

    /// Wraps explicit networks; targets start as exact copies and the
    /// optimizers start fresh.
    pub fn from_networks(
        actor: Network,
        critic: Network,
        market: &MarketConfig,
        hyper: &Hyperparameters,
    ) -> Result<Self> {
        let action_dim = market.action_dim();
        if actor.output_dim() != action_dim {
            return Err(Error::shape(action_dim, actor.output_dim(), "actor output"));
        }
        if critic.input_dim() != actor.input_dim() + action_dim || critic.output_dim() != 1 {
            return Err(Error::shape(
                actor.input_dim() + action_dim,
                critic.input_dim(),
                "critic input",
            ));
        }
        Ok(Self {
            actor_opt: OptimizerState::new(&actor, hyper.actor_lr, hyper.l2),
            critic_opt: OptimizerState::new(&critic, hyper.critic_lr, hyper.l2),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            hyper: hyper.clone(),
            market: market.clone(),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    /// Affine map from [−1, 1]^{2I} to an offering curve; out-of-range
    /// components are clamped first, so the curve always satisfies the
    /// market bounds.
    pub fn decode_action(&self, normalized: &[f64]) -> Result<OfferingCurve> {
        decode_action(&self.market, normalized)
    }

    /// Greedy action when `noise` is `None`, otherwise actor output plus the
    /// current noise value. Returns the clamped normalized action and its curve.
    pub fn select_action(&self, state: &[f64], noise: Option<&OuNoise>) -> Result<(Vec<f64>, OfferingCurve)> {
        let mut action = self.actor.predict(state)?;
        if let Some(noise) = noise {
            if noise.x.len() != action.len() {
                return Err(Error::shape(action.len(), noise.x.len(), "noise dimension"));
            }
            for (a, x) in action.iter_mut().zip(&noise.x) {
                *a += x;
            }
        }
        for a in &mut action {
            *a = a.clamp(-1.0, 1.0);
        }
        let curve = self.decode_action(&action)?;
        Ok((action, curve))
    }

    fn critic_input(state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(state.len() + action.len());
        x.extend_from_slice(state);
        x.extend_from_slice(action);
        x
    }

    /// Bellman target `r·scale + γ Q'(s', μ'(s'))` from the target networks.
    pub fn td_target(&self, tr: &Transition) -> Result<f64> {
        let next_action = self.target_actor.predict(&tr.next_state)?;
        let next_q = self
            .target_critic
            .predict(&Self::critic_input(&tr.next_state, &next_action))?[0];
        Ok(self.hyper.reward_scale * tr.reward + self.hyper.gamma * next_q)
    }

    /// One Adam step on the critic's mean squared Bellman error. Returns the
    /// loss before the step.
    pub fn critic_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::NotEnoughSamples { have: 0, need: 1 });
        }
        let m = batch.len() as f64;
        let mut grads = Gradients::zeros_like(&self.critic);
        let mut loss = 0.0;
        for tr in batch {
            let y = self.td_target(tr)?;
            let (q, tape) = self.critic.forward(&Self::critic_input(&tr.state, &tr.action))?;
            let err = q[0] - y;
            loss += err * err;
            self.critic.accumulate_backward(&tape, &[2.0 * err / m], &mut grads)?;
        }
        self.critic_opt.step(&mut self.critic, &grads)?;
        Ok(loss / m)
    }

    /// One Adam step on the actor against the online critic. The policy
    /// loss is −mean Q(s, μ(s)); the critic is not modified. Returns the
    /// loss before the step.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        let critic = &self.critic;
        let state_dim = self.actor.input_dim();
        let value = |state: &[f64], action: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (q, tape) = critic.forward(&Self::critic_input(state, action))?;
            let grad = critic.input_gradient(&tape, &[1.0])?;
            Ok((q[0], grad[state_dim..].to_vec()))
        };
        let states: Vec<&[f64]> = batch.iter().map(|tr| tr.state.as_slice()).collect();
        policy_step(&mut self.actor, &mut self.actor_opt, &states, value)
    }

    /// [`Agent::actor_update`] against an arbitrary action-value function
    /// returning `(Q(s, a), ∇_a Q(s, a))`.
    pub fn actor_update_with<F>(&mut self, states: &[&[f64]], value: F) -> Result<f64>
    where
        F: Fn(&[f64], &[f64]) -> Result<(f64, Vec<f64>)>,
    {
        policy_step(&mut self.actor, &mut self.actor_opt, states, value)
    }

    /// Soft-updates both target networks toward the online ones.
    pub fn update_targets(&mut self) -> Result<()> {
        soft_update(&mut self.target_actor, &self.actor, self.hyper.tau)?;
        soft_update(&mut self.target_critic, &self.critic, self.hyper.tau)
    }

    pub fn is_finite(&self) -> bool {
        [&self.actor, &self.critic, &self.target_actor, &self.target_critic]
            .iter()
            .all(|n| n.params().all(|p| p.is_finite()))
    }
}

fn policy_step<F>(actor: &mut Network, opt: &mut OptimizerState, states: &[&[f64]], value: F) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> Result<(f64, Vec<f64>)>,
{
    if states.is_empty() {
        return Err(Error::NotEnoughSamples { have: 0, need: 1 });
    }
    let m = states.len() as f64;
    let mut grads = Gradients::zeros_like(actor);
    let mut loss = 0.0;
    for state in states {
        let (action, tape) = actor.forward(state)?;
        let (q, dq_da) = value(state, &action)?;
        if dq_da.len() != action.len() {
            return Err(Error::shape(action.len(), dq_da.len(), "action gradient"));
        }
        loss -= q;
        let upstream: Vec<f64> = dq_da.iter().map(|g| -g / m).collect();
        actor.accumulate_backward(&tape, &upstream, &mut grads)?;
    }
    opt.step(actor, &grads)?;
    Ok(loss / m)
}

/// See [`Agent::decode_action`].
pub(crate) fn decode_action(market: &MarketConfig, normalized: &[f64]) -> Result<OfferingCurve> {
    if normalized.len() != market.action_dim() {
        return Err(Error::shape(market.action_dim(), normalized.len(), "normalized action"));
    }
    let unit = |u: f64| (u.clamp(-1.0, 1.0) + 1.0) / 2.0;
    let (floor, cap) = (market.price_floor, market.price_cap);
    let steps = normalized
        .chunks_exact(2)
        .zip(&market.capacities)
        .map(|(pair, &capacity)| Step {
            volume: (unit(pair[0]) * capacity).clamp(0.0, capacity),
            price: (floor + unit(pair[1]) * (cap - floor)).clamp(floor, cap),
        })
        .collect();
    Ok(OfferingCurve { steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_agent(l2: f64) -> Agent {
        let hyper = Hyperparameters {
            hidden_size: 8,
            l2,
            seed: 3,
            ..Default::default()
        };
        Agent::new(5, &MarketConfig::default(), &hyper).unwrap()
    }

    fn transition(agent: &Agent, reward: f64) -> Transition {
        let tr = Transition {
            state: vec![0.1, -0.2, 0.3, 0.0, 1.0],
            action: vec![0.5, -0.5, 0.0, 0.2, -0.9, 0.9],
            reward,
            next_state: vec![0.2, 0.2, -0.1, 0.4, 0.0],
            truncated: false,
        };
        assert_eq!(tr.state.len(), agent.state_dim());
        assert_eq!(tr.action.len(), agent.action_dim());
        tr
    }

    #[test]
    fn targets_start_equal() {
        let a = small_agent(0.0);
        assert_eq!(a.actor, a.target_actor);
        assert_eq!(a.critic, a.target_critic);
    }

    #[test]
    fn decode_bounds_and_midpoint() {
        let cfg = MarketConfig::default();
        let top = decode_action(&cfg, &[1.0; 6]).unwrap();
        assert!(top
            .steps
            .iter()
            .zip(&cfg.capacities)
            .all(|(s, &d)| s.volume == d && s.price == 3000.0));
        let bottom = decode_action(&cfg, &[-1.0; 6]).unwrap();
        assert!(bottom.steps.iter().all(|s| s.volume == 0.0 && s.price == 0.0));
        let mid = decode_action(&cfg, &[0.0; 6]).unwrap();
        let volumes: Vec<f64> = mid.steps.iter().map(|s| s.volume).collect();
        assert_eq!(volumes, vec![15.0, 100.0, 400.0]);
        assert!(mid.steps.iter().all(|s| s.price == 1500.0));
        assert!(decode_action(&cfg, &[0.0; 4]).is_err());
    }

    #[test]
    fn noisy_action_is_clamped() {
        let a = small_agent(0.0);
        let mut noise = OuNoise::new(6, 0.15, 1.0, 2.0, 1.0);
        noise.x = vec![50.0, -50.0, 50.0, -50.0, 50.0, -50.0];
        let (u, curve) = a.select_action(&[0.0; 5], Some(&noise)).unwrap();
        assert_eq!(u, vec![1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        curve.validate(&a.market).unwrap();
    }

    #[test]
    fn myopic_target_is_reward() {
        let mut a = small_agent(0.0);
        a.hyper.gamma = 0.0;
        let tr = transition(&a, 2300.0);
        assert_eq!(a.td_target(&tr).unwrap(), 2300.0);
    }

    #[test]
    fn discounted_target() {
        let mut a = small_agent(0.0);
        // Make the target critic output exactly 1000.
        let last = a.target_critic.layers().len() - 1;
        for w in &mut a.target_critic.layers_mut()[last].weights {
            *w = 0.0;
        }
        a.target_critic.layers_mut()[last].bias[0] = 1000.0;
        let tr = transition(&a, 2300.0);
        approx::assert_abs_diff_eq!(a.td_target(&tr).unwrap(), 3290.0, epsilon = 1e-9);
    }

    #[test]
    fn critic_at_fixed_point_is_unchanged() {
        let mut a = small_agent(0.0);
        a.hyper.gamma = 0.0;
        let probe = transition(&a, 0.0);
        let q = a
            .critic
            .predict(&Agent::critic_input(&probe.state, &probe.action))
            .unwrap()[0];
        let tr = transition(&a, q);
        let before = a.critic.clone();
        let loss = a.critic_update(&[&tr, &tr]).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(a.critic, before);
    }

    #[test]
    fn critic_loss_is_mean_squared_error() {
        let mut a = small_agent(0.0);
        a.hyper.gamma = 0.0;
        let t1 = transition(&a, 10.0);
        let t2 = transition(&a, -4.0);
        let q = a.critic.predict(&Agent::critic_input(&t1.state, &t1.action)).unwrap()[0];
        let expected = ((q - 10.0).powi(2) + (q + 4.0).powi(2)) / 2.0;
        approx::assert_relative_eq!(a.critic_update(&[&t1, &t2]).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn action_blind_critic_leaves_actor_unchanged() {
        let mut a = small_agent(0.0);
        let first = &mut a.critic.layers_mut()[0];
        let in_dim = first.in_dim;
        for row in first.weights.chunks_exact_mut(in_dim) {
            for w in &mut row[5..] {
                *w = 0.0;
            }
        }
        let before = a.actor.clone();
        let tr = transition(&a, 1.0);
        a.actor_update(&[&tr]).unwrap();
        assert_eq!(a.actor, before);
    }

    #[test]
    fn policy_loss_is_negative_mean_q() {
        let mut a = small_agent(1e-4);
        let t1 = transition(&a, 0.0);
        let mut t2 = transition(&a, 0.0);
        t2.state = vec![1.0, 1.0, -1.0, 0.5, 0.0];
        let q = |s: &[f64]| {
            let act = a.actor.predict(s).unwrap();
            a.critic.predict(&Agent::critic_input(s, &act)).unwrap()[0]
        };
        let expected = -(q(&t1.state) + q(&t2.state)) / 2.0;
        let critic_before = a.critic.clone();
        approx::assert_relative_eq!(a.actor_update(&[&t1, &t2]).unwrap(), expected, max_relative = 1e-12);
        assert_eq!(a.critic, critic_before);
    }

    #[test]
    fn actor_climbs_toy_critic() {
        let hyper = Hyperparameters {
            hidden_size: 8,
            actor_lr: 1e-2,
            l2: 0.0,
            seed: 1,
            ..Default::default()
        };
        let market = MarketConfig {
            costs: vec![1.0],
            capacities: vec![1.0],
            ..Default::default()
        };
        let mut a = Agent::new(2, &market, &hyper).unwrap();
        let toy = |_: &[f64], act: &[f64]| Ok((-(act[0] - 0.3).powi(2), vec![-2.0 * (act[0] - 0.3), 0.0]));
        let states: Vec<Vec<f64>> = vec![vec![0.5, -0.5], vec![-1.0, 0.3], vec![0.0, 1.0]];
        let refs: Vec<&[f64]> = states.iter().map(Vec::as_slice).collect();
        for _ in 0..2000 {
            a.actor_update_with(&refs, toy).unwrap();
        }
        for s in &refs {
            let out = a.actor.predict(s).unwrap()[0];
            assert!((out - 0.3).abs() < 1e-2, "μ(s) = {out}");
        }
    }

    #[test]
    fn soft_update_cases() {
        let src = Network::init(&[3, 2], &[Activation::Identity], 1).unwrap();
        let mut tgt = Network::init(&[3, 2], &[Activation::Identity], 2).unwrap();
        soft_update(&mut tgt, &src, 1.0).unwrap();
        assert_eq!(tgt, src);

        let mut zero = src.clone();
        zero.params_mut().for_each(|p| *p = 0.0);
        let mut one = src.clone();
        one.params_mut().for_each(|p| *p = 1.0);
        soft_update(&mut one, &zero, 0.01).unwrap();
        assert!(one.params().all(|&p| p == 0.99));

        let other = Network::init(&[3, 3], &[Activation::Identity], 1).unwrap();
        assert!(soft_update(&mut tgt, &other, 0.5).is_err());
        assert!(soft_update(&mut tgt, &src, 0.0).is_err());
    }
}
