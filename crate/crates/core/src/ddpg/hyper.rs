use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training configuration. Defaults follow the reference DDPG setup for
/// this market: 1000 episodes of 30 days, batch 64, hidden width 64,
/// learning rates 1e-4 (actor) and 1e-5 (critic), γ = 0.99, τ = 0.01 and a
/// 50 000-transition buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparameters {
    pub episodes: usize,
    pub episode_days: usize,
    pub batch_size: usize,
    pub hidden_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub buffer_capacity: usize,
    pub ou_theta: f64,
    pub ou_mu: f64,
    pub ou_sigma: f64,
    pub ou_dt: f64,
    /// Updates start once the buffer holds `max(batch_size, warmup_transitions)`.
    pub warmup_transitions: usize,
    pub l2: f64,
    /// Multiplier applied to raw rewards in critic targets; 1 trains on raw €.
    pub reward_scale: f64,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            episodes: 1000,
            episode_days: 30,
            batch_size: 64,
            hidden_size: 64,
            actor_lr: 1e-4,
            critic_lr: 1e-5,
            gamma: 0.99,
            tau: 0.01,
            buffer_capacity: 50_000,
            ou_theta: 0.15,
            ou_mu: 1.0,
            ou_sigma: 2.0,
            ou_dt: 1.0,
            warmup_transitions: 1000,
            l2: 1e-4,
            reward_scale: 1.0,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn warmup(&self) -> usize {
        self.batch_size.max(self.warmup_transitions)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.batch_size == 0 || self.hidden_size == 0 || self.buffer_capacity == 0 {
            return fail("batch_size, hidden_size and buffer_capacity must be positive".into());
        }
        if self.batch_size > self.buffer_capacity {
            return fail(format!(
                "batch_size {} exceeds buffer_capacity {}",
                self.batch_size, self.buffer_capacity
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0,1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail(format!("tau must lie in (0,1], got {}", self.tau));
        }
        if !(self.actor_lr > 0.0 && self.critic_lr > 0.0) || !self.l2.is_finite() || self.l2 < 0.0 {
            return fail("learning rates must be positive and l2 non-negative".into());
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return fail(format!("reward_scale must be positive, got {}", self.reward_scale));
        }
        if !(self.ou_theta > 0.0 && self.ou_sigma >= 0.0 && self.ou_dt > 0.0 && self.ou_mu.is_finite()) {
            return fail("OU noise needs theta > 0, sigma >= 0, dt > 0".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_table() {
        let h = Hyperparameters::default();
        assert_eq!(
            (h.episodes, h.episode_days, h.batch_size, h.hidden_size),
            (1000, 30, 64, 64)
        );
        assert_eq!((h.actor_lr, h.critic_lr, h.gamma, h.tau), (1e-4, 1e-5, 0.99, 0.01));
        assert_eq!(h.buffer_capacity, 50_000);
        assert_eq!((h.ou_theta, h.ou_mu, h.ou_sigma, h.ou_dt), (0.15, 1.0, 2.0, 1.0));
        assert_eq!(h.warmup(), 1000);
        h.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        for h in [
            Hyperparameters {
                tau: 0.0,
                ..Default::default()
            },
            Hyperparameters {
                gamma: 1.5,
                ..Default::default()
            },
            Hyperparameters {
                ou_theta: 0.0,
                ..Default::default()
            },
            Hyperparameters {
                batch_size: 0,
                ..Default::default()
            },
            Hyperparameters {
                batch_size: 10,
                buffer_capacity: 5,
                ..Default::default()
            },
        ] {
            assert!(h.validate().is_err(), "{h:?}");
        }
    }
}
