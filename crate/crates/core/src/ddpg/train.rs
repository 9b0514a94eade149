use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::agent::Agent;
use super::noise::OuNoise;
use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::market::{EnvState, MarketEnv, OfferingCurve};

/// Per-episode training summary. Losses are NaN for episodes in which no
/// update ran (buffer still warming up).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub start: usize,
    pub mean_normalized_reward: f64,
    pub mean_reward: f64,
    pub mean_policy_loss: f64,
    pub mean_critic_loss: f64,
    pub updates: usize,
}

/// Replay buffer, exploration noise and RNG that persist across episodes.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub buffer: ReplayBuffer,
    pub noise: OuNoise,
    rng: ChaCha8Rng,
    episodes_done: usize,
}

// Keeps the training stream independent of the network-init stream for the same seed.
const TRAIN_STREAM: u64 = 0x5eed_7a11;

impl Trainer {
    pub fn new(agent: &Agent) -> Self {
        let h = &agent.hyper;
        let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
        rng.set_stream(TRAIN_STREAM);
        Self {
            buffer: ReplayBuffer::new(h.buffer_capacity),
            noise: OuNoise::new(agent.action_dim(), h.ou_theta, h.ou_mu, h.ou_sigma, h.ou_dt),
            rng,
            episodes_done: 0,
        }
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    /// Runs one episode from a start drawn uniformly from `starts`.
    ///
    /// Every hour: act with exploration noise, settle, store the transition
    /// and advance the noise; once the buffer is warm, run one critic
    /// update, one actor update and a soft target update.
    pub fn run_episode(&mut self, agent: &mut Agent, env: &MarketEnv<'_>, starts: &[usize]) -> Result<EpisodeMetrics> {
        let days = agent.hyper.episode_days;
        if starts.is_empty() {
            return Err(Error::InsufficientData("no training start fits an episode".into()));
        }
        let start = starts[self.rng.random_range(0..starts.len())];
        let mut state = env.reset(start, days)?;
        self.noise.reset();

        let warmup = agent.hyper.warmup();
        let (mut norm_sum, mut reward_sum, mut steps) = (0.0, 0.0, 0usize);
        let (mut policy_sum, mut critic_sum, mut updates) = (0.0, 0.0, 0usize);
        while state.steps_left > 0 {
            let (action, curve) = agent.select_action(&state.window, Some(&self.noise))?;
            let window = state.window.clone();
            let outcome = env.step(state, &curve)?;
            norm_sum += outcome.normalized_reward;
            reward_sum += outcome.reward;
            steps += 1;
            self.buffer.push(Transition {
                state: window,
                action,
                reward: outcome.reward,
                next_state: outcome.next_state.window.clone(),
                truncated: outcome.done,
            });
            self.noise.step(&mut self.rng);

            if self.buffer.len() >= warmup {
                let batch = self.buffer.sample(agent.hyper.batch_size, &mut self.rng)?;
                critic_sum += agent.critic_update(&batch)?;
                policy_sum += agent.actor_update(&batch)?;
                agent.update_targets()?;
                updates += 1;
            }
            state = outcome.next_state;
        }

        if !agent.is_finite() || !critic_sum.is_finite() || !policy_sum.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite parameters or losses in episode {}",
                self.episodes_done
            )));
        }
        let per = |sum: f64, n: usize| if n == 0 { f64::NAN } else { sum / n as f64 };
        let metrics = EpisodeMetrics {
            episode: self.episodes_done,
            start,
            mean_normalized_reward: per(norm_sum, steps),
            mean_reward: per(reward_sum, steps),
            mean_policy_loss: per(policy_sum, updates),
            mean_critic_loss: per(critic_sum, updates),
            updates,
        };
        self.episodes_done += 1;
        Ok(metrics)
    }
}

/// Starts from `candidates` at which a full episode of `days` fits.
fn usable_starts(env: &MarketEnv<'_>, candidates: &[usize], days: usize) -> Vec<usize> {
    candidates.iter().copied().filter(|&s| env.can_start(s, days)).collect()
}

/// Trains `agent` for `agent.hyper.episodes` episodes, calling
/// `on_episode` after each one; an error from the callback stops training.
pub fn train<F>(
    agent: &mut Agent,
    env: &MarketEnv<'_>,
    train_starts: &[usize],
    mut on_episode: F,
) -> Result<Vec<EpisodeMetrics>>
where
    F: FnMut(&EpisodeMetrics, &Agent) -> Result<()>,
{
    let episodes = agent.hyper.episodes;
    if episodes == 0 {
        return Ok(Vec::new());
    }
    let starts = usable_starts(env, train_starts, agent.hyper.episode_days);
    if starts.is_empty() {
        return Err(Error::InsufficientData(format!(
            "none of {} training starts fits a {}-day episode",
            train_starts.len(),
            agent.hyper.episode_days
        )));
    }
    let mut trainer = Trainer::new(agent);
    let mut history = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let m = trainer.run_episode(agent, env, &starts)?;
        on_episode(&m, agent)?;
        history.push(m);
    }
    Ok(history)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub start: usize,
    pub t: usize,
    pub pun_next: f64,
    pub reward: f64,
    pub normalized_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub episodes: usize,
    pub hours: usize,
    pub mean_normalized_reward: f64,
    pub std_normalized_reward: f64,
    pub mean_reward: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

/// Rolls out `policy` for `episode_days` from every usable start and pools
/// the hourly normalized rewards. Rollouts run in parallel; the trace is
/// ordered by start, then hour.
pub fn evaluate_policy<P>(
    env: &MarketEnv<'_>,
    starts: &[usize],
    episode_days: usize,
    policy: P,
) -> Result<EvaluationReport>
where
    P: Fn(&EnvState) -> Result<OfferingCurve> + Sync,
{
    let starts = usable_starts(env, starts, episode_days);
    if starts.is_empty() || episode_days == 0 {
        return Err(Error::InsufficientData(format!(
            "no evaluation start fits a {episode_days}-day episode"
        )));
    }
    let episodes: Vec<Vec<TraceRow>> = starts
        .par_iter()
        .map(|&start| {
            let mut state = env.reset(start, episode_days)?;
            let mut rows = Vec::with_capacity(state.steps_left);
            while state.steps_left > 0 {
                let curve = policy(&state)?;
                let t = state.t;
                let out = env.step(state, &curve)?;
                rows.push(TraceRow {
                    start,
                    t,
                    pun_next: out.pun_next,
                    reward: out.reward,
                    normalized_reward: out.normalized_reward,
                });
                state = out.next_state;
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let trace: Vec<TraceRow> = episodes.into_iter().flatten().collect();
    let n = trace.len() as f64;
    let mean = trace.iter().map(|r| r.normalized_reward).sum::<f64>() / n;
    let var = trace.iter().map(|r| (r.normalized_reward - mean).powi(2)).sum::<f64>() / n;
    Ok(EvaluationReport {
        episodes: starts.len(),
        hours: trace.len(),
        mean_normalized_reward: mean,
        std_normalized_reward: var.sqrt(),
        mean_reward: trace.iter().map(|r| r.reward).sum::<f64>() / n,
        trace,
    })
}

/// Greedy (noise-free) evaluation of `agent`; nothing is mutated.
pub fn evaluate(
    agent: &Agent,
    env: &MarketEnv<'_>,
    test_starts: &[usize],
    episode_days: usize,
) -> Result<EvaluationReport> {
    evaluate_policy(env, test_starts, episode_days, |state| {
        agent.select_action(&state.window, None).map(|(_, curve)| curve)
    })
}
