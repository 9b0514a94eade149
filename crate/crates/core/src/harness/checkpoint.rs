//! Versioned JSON checkpoints holding everything needed to rebuild an agent.
//!
//! Floats are written in shortest round-trip form, so a save/load cycle is
//! bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::data::NormStats;
use crate::ddpg::{Agent, Hyperparameters};
use crate::error::{Error, Result};
use crate::market::MarketConfig;
use crate::neural::{Network, OptimizerState};

pub const CHECKPOINT_FORMAT: &str = "auction-ddpg-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Episodes completed when the checkpoint was taken.
    pub episode: usize,
    pub seed: u64,
    pub window_hours: usize,
    pub norm_stats: NormStats,
    pub market: MarketConfig,
    pub hyperparameters: Hyperparameters,
    pub actor: Network,
    pub critic: Network,
    pub target_actor: Network,
    pub target_critic: Network,
    pub actor_optimizer: OptimizerState,
    pub critic_optimizer: OptimizerState,
}

impl Checkpoint {
    pub fn from_agent(agent: &Agent, episode: usize, norm_stats: NormStats, window_hours: usize) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            episode,
            seed: agent.hyper.seed,
            window_hours,
            norm_stats,
            market: agent.market.clone(),
            hyperparameters: agent.hyper.clone(),
            actor: agent.actor.clone(),
            critic: agent.critic.clone(),
            target_actor: agent.target_actor.clone(),
            target_critic: agent.target_critic.clone(),
            actor_optimizer: agent.actor_opt.clone(),
            critic_optimizer: agent.critic_opt.clone(),
        }
    }

    /// Checks internal consistency: format tag, version, network chaining
    /// and optimizer moment lengths.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Checkpoint(m));
        if self.format != CHECKPOINT_FORMAT {
            return bad(format!("unknown format tag {:?}", self.format));
        }
        if self.version != CHECKPOINT_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if !self.target_actor.same_shape(&self.actor) || !self.target_critic.same_shape(&self.critic) {
            return bad("target networks differ in shape from their sources".into());
        }
        if !self.actor_optimizer.is_congruent(&self.actor) || !self.critic_optimizer.is_congruent(&self.critic) {
            return bad("optimizer moments do not match network parameters".into());
        }
        if self.actor.input_dim() != self.window_hours {
            return bad(format!(
                "actor input {} does not match window of {} hours",
                self.actor.input_dim(),
                self.window_hours
            ));
        }
        if !(self.norm_stats.std > 0.0 && self.norm_stats.mean.is_finite()) {
            return bad("invalid normalization statistics".into());
        }
        self.market.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let a = Agent::from_networks(
            self.actor.clone(),
            self.critic.clone(),
            &self.market,
            &self.hyperparameters,
        );
        a.map(|_| ()).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    /// Errors if `config` describes a different state, action or network
    /// shape than the one stored here.
    pub fn check_compatible(&self, config: &RunConfig) -> Result<()> {
        let mut problems = Vec::new();
        if self.window_hours != config.data.window_hours {
            problems.push(format!(
                "window_hours {} vs {}",
                self.window_hours, config.data.window_hours
            ));
        }
        if self.market != config.market {
            problems.push("market configuration differs".to_string());
        }
        if self.hyperparameters.hidden_size != config.ddpg.hidden_size {
            problems.push(format!(
                "hidden_size {} vs {}",
                self.hyperparameters.hidden_size, config.ddpg.hidden_size
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "checkpoint does not match config: {}",
                problems.join("; ")
            )))
        }
    }

    pub fn to_agent(&self) -> Result<Agent> {
        self.validate()?;
        Ok(Agent {
            actor: self.actor.clone(),
            critic: self.critic.clone(),
            target_actor: self.target_actor.clone(),
            target_critic: self.target_critic.clone(),
            actor_opt: self.actor_optimizer.clone(),
            critic_opt: self.critic_optimizer.clone(),
            hyper: self.hyperparameters.clone(),
            market: self.market.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Writes to a sibling temporary file and renames it over `path`, so a
    /// crash never leaves a half-written checkpoint.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        std::fs::write(&tmp, text)?;
        std::fs::File::open(&tmp)?.sync_all()?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
