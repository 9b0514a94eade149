//! Command-line front end: `train`, `evaluate`, `gradcheck` and `plot`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::checkpoint::Checkpoint;
use super::config::RunConfig;
use super::metrics::{read_metrics, MetricsRow, MetricsWriter};
use super::plot::write_plots;
use crate::data::{compute_norm_stats, load_pun_csv, stratified_split, NormStats, PriceSeries, Split, WINDOW_HOURS};
use crate::ddpg::{evaluate, train, Agent, EvaluationReport, Hyperparameters};
use crate::error::Error;
use crate::market::{MarketConfig, MarketEnv};
use crate::neural::{grad_check_report, GradCheckReport, GradFault};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_CHECKPOINT: i32 = 4;
pub const EXIT_GRADCHECK: i32 = 5;

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub const METRICS_FILE: &str = "metrics.csv";
pub const LATEST_CHECKPOINT: &str = "checkpoint_latest.json";
pub const FINAL_CHECKPOINT: &str = "checkpoint_final.json";
pub const RESOLVED_CONFIG: &str = "config.toml";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const TRACE_FILE: &str = "evaluation_trace.csv";

/// A failed command: the process exit code and a message for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (exit {})", self.message, self.code)
    }
}

fn code_of(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::BadArchitecture(_) => EXIT_CONFIG,
        Error::FileNotFound(_)
        | Error::Parse { .. }
        | Error::Gap(_)
        | Error::Duplicate(_)
        | Error::InsufficientData(_) => EXIT_DATA,
        Error::Checkpoint(_) => EXIT_CHECKPOINT,
        _ => EXIT_RUNTIME,
    }
}

fn fail(err: Error) -> Failure {
    Failure::new(code_of(&err), err)
}

#[derive(Debug, Parser)]
#[command(
    name = "auction-ddpg",
    version,
    about = "DDPG bidding agent for a day-ahead electricity auction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an agent and write metrics, checkpoints and plots.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override a configuration value, e.g. `--set ddpg.episodes=10`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Shorthand for `--set ddpg.seed=N`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Greedy evaluation of a checkpoint on the test split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check backpropagation against finite differences on full-size networks.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corrupt one analytic gradient to confirm the check can fail.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Render SVG charts from a metrics CSV.
    Plot {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Executes a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Train { config, set, seed } => cmd_train(&config, &set, seed).map(|s| {
            println!(
                "trained {} episodes; outputs in {}",
                s.metrics.len(),
                s.output_dir.display()
            );
        }),
        Command::Evaluate {
            checkpoint,
            config,
            set,
        } => cmd_evaluate(&checkpoint, &config, &set).map(|r| {
            println!(
                "mean normalized reward {:.6} (std {:.6}) over {} episodes, {} hours",
                r.mean_normalized_reward, r.std_normalized_reward, r.episodes, r.hours
            );
        }),
        Command::Gradcheck { seed, inject_fault } => {
            let fault = inject_fault.then_some(GradFault::ScaleLargest(2.0));
            match cmd_gradcheck(seed, fault) {
                Ok(s) => {
                    for (name, r) in [("actor", &s.actor), ("critic", &s.critic)] {
                        println!(
                            "{name}: max relative error {:.3e} over {} gradients",
                            r.max_relative_error, r.checked
                        );
                    }
                    if s.passed() {
                        Ok(())
                    } else {
                        Err(Failure::new(
                            EXIT_GRADCHECK,
                            format!("gradient check exceeded tolerance {GRADCHECK_TOLERANCE:e}"),
                        ))
                    }
                }
                Err(f) => Err(f),
            }
        }
        Command::Plot { metrics, out } => cmd_plot(&metrics, &out).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
        }),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub struct TrainSummary {
    pub output_dir: PathBuf,
    pub metrics: Vec<MetricsRow>,
    pub norm_stats: NormStats,
}

/// Loads the config with overrides, `seed` taking precedence over both.
pub fn load_config(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut all = overrides.to_vec();
    if let Some(s) = seed {
        all.push(format!("ddpg.seed={s}"));
    }
    RunConfig::load(path, &all).map_err(|e| Failure::new(EXIT_CONFIG, e))
}

/// Loads the price series and splits its episode starts.
pub fn prepare_data(config: &RunConfig) -> Result<(PriceSeries, Split), Failure> {
    let data_err = |e: Error| Failure::new(EXIT_DATA, e);
    let series = load_pun_csv(&config.data.path, &config.data.columns()).map_err(data_err)?;
    let split = stratified_split(&series, &config.split, config.data.window_hours).map_err(data_err)?;
    Ok((series, split))
}

pub fn cmd_train(config_path: &Path, overrides: &[String], seed: Option<u64>) -> Result<TrainSummary, Failure> {
    let config = load_config(config_path, overrides, seed)?;
    run_training(&config)
}

/// Trains with an already resolved configuration.
pub fn run_training(config: &RunConfig) -> Result<TrainSummary, Failure> {
    let (series, split) = prepare_data(config)?;
    let stats = compute_norm_stats(&series, &split.train).map_err(|e| Failure::new(EXIT_DATA, e))?;
    train_on(config, &series, &split, stats)
}

/// Trains on in-memory data; used by [`run_training`] and by callers that
/// build series themselves.
pub fn train_on(
    config: &RunConfig,
    series: &PriceSeries,
    split: &Split,
    stats: NormStats,
) -> Result<TrainSummary, Failure> {
    let out = config.output.dir.clone();
    let io_config = |e: std::io::Error| Failure::new(EXIT_CONFIG, format!("output directory {}: {e}", out.display()));
    std::fs::create_dir_all(&out).map_err(io_config)?;
    let resolved = config.to_toml().map_err(fail)?;
    std::fs::write(out.join(RESOLVED_CONFIG), resolved).map_err(io_config)?;

    let window = config.data.window_hours;
    let mut agent = Agent::new(window, &config.market, &config.ddpg).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let env = MarketEnv::new(series, &config.market, &stats).with_window_hours(window);
    let runtime = |e: Error| Failure::new(EXIT_RUNTIME, e);
    let mut writer = MetricsWriter::create(&out.join(METRICS_FILE)).map_err(runtime)?;

    let clock = Instant::now();
    let mut rows = Vec::new();
    let every = config.output.checkpoint_every;
    let result = train(&mut agent, &env, &split.train, |m, agent| {
        let row = MetricsRow {
            episode: m.episode + 1,
            mean_normalized_reward: m.mean_normalized_reward,
            mean_policy_loss: m.mean_policy_loss,
            mean_critic_loss: m.mean_critic_loss,
            wall_seconds: if config.output.record_wall_time {
                clock.elapsed().as_secs_f64()
            } else {
                0.0
            },
        };
        writer.append(&row)?;
        log::info!(
            "episode {} start {} reward {:.4} policy {:.4e} critic {:.4e}",
            row.episode,
            m.start,
            row.mean_normalized_reward,
            row.mean_policy_loss,
            row.mean_critic_loss
        );
        if every > 0 && row.episode.is_multiple_of(every) {
            Checkpoint::from_agent(agent, row.episode, stats, window).save(&out.join(LATEST_CHECKPOINT))?;
        }
        rows.push(row);
        Ok(())
    });
    // Training-data shortfalls are data errors; everything else mid-run is a runtime failure.
    result.map_err(|e| match e {
        Error::InsufficientData(_) => Failure::new(EXIT_DATA, e),
        other => runtime(other),
    })?;

    Checkpoint::from_agent(&agent, rows.len(), stats, window)
        .save(&out.join(FINAL_CHECKPOINT))
        .map_err(runtime)?;
    write_plots(&rows, &out).map_err(runtime)?;
    Ok(TrainSummary {
        output_dir: out,
        metrics: rows,
        norm_stats: stats,
    })
}

/// Evaluates a checkpoint greedily on the test split of the configured
/// data and writes the report and hourly trace to the output directory.
pub fn cmd_evaluate(
    checkpoint_path: &Path,
    config_path: &Path,
    overrides: &[String],
) -> Result<EvaluationReport, Failure> {
    let config = load_config(config_path, overrides, None)?;
    let checkpoint = Checkpoint::load(checkpoint_path).map_err(|e| Failure::new(EXIT_CHECKPOINT, e))?;
    checkpoint
        .check_compatible(&config)
        .map_err(|e| Failure::new(EXIT_CHECKPOINT, e))?;
    let (series, split) = prepare_data(&config)?;
    evaluate_checkpoint(&checkpoint, &config, &series, &split)
}

pub fn evaluate_checkpoint(
    checkpoint: &Checkpoint,
    config: &RunConfig,
    series: &PriceSeries,
    split: &Split,
) -> Result<EvaluationReport, Failure> {
    let agent = checkpoint.to_agent().map_err(|e| Failure::new(EXIT_CHECKPOINT, e))?;
    let env =
        MarketEnv::new(series, &config.market, &checkpoint.norm_stats).with_window_hours(config.data.window_hours);
    let report = evaluate(&agent, &env, &split.test, config.ddpg.episode_days).map_err(fail)?;

    let out = &config.output.dir;
    let runtime = |e: String| Failure::new(EXIT_RUNTIME, e);
    std::fs::create_dir_all(out).map_err(|e| runtime(e.to_string()))?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| runtime(e.to_string()))?;
    std::fs::write(out.join(EVALUATION_FILE), json).map_err(|e| runtime(e.to_string()))?;
    let mut trace = csv::Writer::from_path(out.join(TRACE_FILE)).map_err(|e| runtime(e.to_string()))?;
    for row in &report.trace {
        trace.serialize(row).map_err(|e| runtime(e.to_string()))?;
    }
    trace.flush().map_err(|e| runtime(e.to_string()))?;
    Ok(report)
}

pub struct GradcheckSummary {
    pub actor: GradCheckReport,
    pub critic: GradCheckReport,
}

impl GradcheckSummary {
    pub fn passed(&self) -> bool {
        self.actor.max_relative_error < GRADCHECK_TOLERANCE && self.critic.max_relative_error < GRADCHECK_TOLERANCE
    }
}

/// Gradient check on the default-size actor (168→64→64→6) and critic
/// (174→64→64→1), each at a random input drawn from `seed`.
pub fn cmd_gradcheck(seed: u64, fault: Option<GradFault>) -> Result<GradcheckSummary, Failure> {
    let hyper = Hyperparameters {
        seed,
        ..Hyperparameters::default()
    };
    let agent = Agent::new(WINDOW_HOURS, &MarketConfig::default(), &hyper).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut input = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-2.0..2.0)).collect() };
    let actor_input = input(agent.actor.input_dim());
    let critic_input = input(agent.critic.input_dim());
    let actor = grad_check_report(&agent.actor, &actor_input, GRADCHECK_STEP, fault).map_err(fail)?;
    let critic = grad_check_report(&agent.critic, &critic_input, GRADCHECK_STEP, fault).map_err(fail)?;
    Ok(GradcheckSummary { actor, critic })
}

pub fn cmd_plot(metrics: &Path, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    let rows = read_metrics(metrics).map_err(|e| Failure::new(EXIT_DATA, e))?;
    write_plots(&rows, out).map_err(|e| Failure::new(EXIT_RUNTIME, e))
}
