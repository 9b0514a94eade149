//! Single-zone day-ahead market: offering-curve settlement against the
//! next-day clearing price, reward normalization and the episode state
//! machine.

use serde::{Deserialize, Serialize};

use crate::data::{self, NormStats, PriceSeries, SETTLEMENT_LAG};
use crate::error::{Error, Result};

/// Production modes and price bounds of the bidding supplier.
///
/// Step `i` of every offering curve is paired with mode `i`, so the number
/// of curve steps equals the number of modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    /// Unitary production cost per mode, €/MWh.
    pub costs: Vec<f64>,
    /// Maximum dispatchable volume per mode, MWh.
    pub capacities: Vec<f64>,
    pub price_floor: f64,
    pub price_cap: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            costs: vec![10.0, 30.0, 60.0],
            capacities: vec![30.0, 200.0, 800.0],
            price_floor: 0.0,
            price_cap: 3000.0,
        }
    }
}

impl MarketConfig {
    pub fn modes(&self) -> usize {
        self.costs.len()
    }

    /// Length of the normalized action vector: a (volume, price) pair per step.
    pub fn action_dim(&self) -> usize {
        2 * self.modes()
    }

    pub fn validate(&self) -> Result<()> {
        if self.costs.is_empty() {
            return Err(Error::Config("market needs at least one production mode".into()));
        }
        if self.costs.len() != self.capacities.len() {
            return Err(Error::Config(format!(
                "{} costs but {} capacities",
                self.costs.len(),
                self.capacities.len()
            )));
        }
        if self.costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("production costs must be finite".into()));
        }
        if self.capacities.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config("capacities must be finite and positive".into()));
        }
        if !(self.price_floor.is_finite() && self.price_cap.is_finite() && self.price_floor < self.price_cap) {
            return Err(Error::Config(format!(
                "price bounds must satisfy floor < cap, got [{}, {}]",
                self.price_floor, self.price_cap
            )));
        }
        Ok(())
    }
}

/// One step of an offering curve: `volume` MWh offered at minimum `price` €/MWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub volume: f64,
    pub price: f64,
}

/// The agent's action: one step per production mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferingCurve {
    pub steps: Vec<Step>,
}

impl OfferingCurve {
    /// Builds a curve and checks it against the volume and price bounds of `config`.
    pub fn new(steps: Vec<Step>, config: &MarketConfig) -> Result<Self> {
        let curve = Self { steps };
        curve.validate(config)?;
        Ok(curve)
    }

    pub fn validate(&self, config: &MarketConfig) -> Result<()> {
        if self.steps.len() != config.modes() {
            return Err(Error::shape(config.modes(), self.steps.len(), "offering curve steps"));
        }
        for (i, (step, cap)) in self.steps.iter().zip(&config.capacities).enumerate() {
            if !(step.volume >= 0.0 && step.volume <= *cap) {
                return Err(Error::InvalidAction(format!(
                    "step {i}: volume {} outside [0, {cap}]",
                    step.volume
                )));
            }
            if !(step.price >= config.price_floor && step.price <= config.price_cap) {
                return Err(Error::InvalidAction(format!(
                    "step {i}: price {} outside [{}, {}]",
                    step.price, config.price_floor, config.price_cap
                )));
            }
        }
        Ok(())
    }

    /// The curve that earns [`max_reward`]: full capacity at the clearing
    /// price for every mode whose cost is below it, nothing otherwise.
    pub fn oracle(pun_next: f64, config: &MarketConfig) -> Self {
        let price = pun_next.clamp(config.price_floor, config.price_cap);
        let steps = config
            .costs
            .iter()
            .zip(&config.capacities)
            .map(|(&cost, &cap)| Step {
                volume: if pun_next > cost { cap } else { 0.0 },
                price,
            })
            .collect();
        Self { steps }
    }

    /// Every step priced at the cap with full volume.
    pub fn at_cap(config: &MarketConfig) -> Self {
        Self {
            steps: config
                .capacities
                .iter()
                .map(|&cap| Step {
                    volume: cap,
                    price: config.price_cap,
                })
                .collect(),
        }
    }
}

/// Profit of `curve` when the clearing price is `pun_next`.
///
/// Accepted steps (price ≤ clearing price) are paid as bid and charged
/// the cost of their paired mode; the result is negative when an accepted
/// step is priced below its cost.
pub fn settle(curve: &OfferingCurve, pun_next: f64, config: &MarketConfig) -> f64 {
    curve
        .steps
        .iter()
        .zip(&config.costs)
        .filter(|(step, _)| step.price <= pun_next)
        .map(|(step, cost)| (step.price - cost) * step.volume)
        .sum()
}

/// Largest profit attainable at clearing price `pun_next`.
pub fn max_reward(pun_next: f64, config: &MarketConfig) -> f64 {
    config
        .costs
        .iter()
        .zip(&config.capacities)
        .map(|(cost, cap)| (pun_next - cost).max(0.0) * cap)
        .sum()
}

/// Profit as a fraction of the attainable maximum, clamped to [0, 1].
pub fn normalize_reward(reward: f64, max: f64) -> f64 {
    if max > 0.0 {
        // Adding 0.0 turns a -0.0 reward into +0.0.
        reward.clamp(0.0, max) / max + 0.0
    } else {
        0.0
    }
}

/// Position of an episode in the price series.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    /// Normalized prices of the 168 hours before `t`.
    pub window: Vec<f64>,
    /// Hour the next offer is made for.
    pub t: usize,
    pub steps_left: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub normalized_reward: f64,
    pub pun_next: f64,
    pub next_state: EnvState,
    pub done: bool,
}

/// Replays a price series as a bidding environment.
///
/// Offers made at hour `t` settle against the price at `t + 24`; the
/// state then advances by one hour.
#[derive(Debug, Clone, Copy)]
pub struct MarketEnv<'a> {
    pub series: &'a PriceSeries,
    pub config: &'a MarketConfig,
    pub stats: &'a NormStats,
    pub window_hours: usize,
}

impl<'a> MarketEnv<'a> {
    pub fn new(series: &'a PriceSeries, config: &'a MarketConfig, stats: &'a NormStats) -> Self {
        Self {
            series,
            config,
            stats,
            window_hours: data::WINDOW_HOURS,
        }
    }

    pub fn with_window_hours(mut self, window_hours: usize) -> Self {
        self.window_hours = window_hours;
        self
    }

    /// Whether an episode of `episode_days` can start at `start`.
    pub fn can_start(&self, start: usize, episode_days: usize) -> bool {
        start >= self.window_hours && start + episode_days * 24 + SETTLEMENT_LAG <= self.series.len()
    }

    pub fn reset(&self, start: usize, episode_days: usize) -> Result<EnvState> {
        if !self.can_start(start, episode_days) {
            return Err(Error::OutOfRange {
                index: start,
                reason: format!(
                    "episode of {episode_days} days needs {} hours of history and ends inside a series of {} hours",
                    self.window_hours,
                    self.series.len()
                ),
            });
        }
        Ok(EnvState {
            window: data::window(self.series, start, self.window_hours, self.stats)?,
            t: start,
            steps_left: episode_days * 24,
        })
    }

    /// Clearing price the offer for hour `t` settles against.
    pub fn settlement_price(&self, t: usize) -> Result<f64> {
        self.series.price(t + SETTLEMENT_LAG).ok_or_else(|| Error::OutOfRange {
            index: t,
            reason: "no next-day price".into(),
        })
    }

    pub fn step(&self, state: EnvState, curve: &OfferingCurve) -> Result<StepOutcome> {
        if state.steps_left == 0 {
            return Err(Error::EpisodeFinished);
        }
        curve.validate(self.config)?;
        let pun_next = self.settlement_price(state.t)?;
        let reward = settle(curve, pun_next, self.config);
        let normalized_reward = normalize_reward(reward, max_reward(pun_next, self.config));
        let t = state.t + 1;
        let steps_left = state.steps_left - 1;
        let next_state = EnvState {
            window: data::window(self.series, t, self.window_hours, self.stats)?,
            t,
            steps_left,
        };
        Ok(StepOutcome {
            reward,
            normalized_reward,
            pun_next,
            next_state,
            done: steps_left == 0,
        })
    }
}
