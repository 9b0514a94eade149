//! Python bindings: market settlement, price data, networks, exploration
//! noise, the agent and the train/evaluate/gradcheck commands.

use std::fmt::Display;
use std::path::PathBuf;

use auction_ddpg::data::{
    compute_norm_stats, load_pun_csv, stratified_split, window, ColumnSpec, NormStats, PriceSeries, SplitSpec,
    WINDOW_HOURS,
};
use auction_ddpg::ddpg::{Agent, Hyperparameters, OuNoise};
use auction_ddpg::harness::cli::{self, Failure};
use auction_ddpg::harness::Checkpoint;
use auction_ddpg::market::{self, MarketConfig, OfferingCurve, Step};
use auction_ddpg::neural::{grad_check, Activation, Network};
use chrono::NaiveDate;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyFloat, PyInt, PyString};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn command_err(f: Failure) -> PyErr {
    PyRuntimeError::new_err(f.to_string())
}

#[pyclass(name = "MarketConfig", module = "auction_ddpg_py")]
struct PyMarket {
    inner: MarketConfig,
}

#[pymethods]
impl PyMarket {
    #[new]
    #[pyo3(signature = (costs=None, capacities=None, price_floor=None, price_cap=None))]
    fn new(
        costs: Option<Vec<f64>>,
        capacities: Option<Vec<f64>>,
        price_floor: Option<f64>,
        price_cap: Option<f64>,
    ) -> PyResult<Self> {
        let d = MarketConfig::default();
        let inner = MarketConfig {
            costs: costs.unwrap_or(d.costs),
            capacities: capacities.unwrap_or(d.capacities),
            price_floor: price_floor.unwrap_or(d.price_floor),
            price_cap: price_cap.unwrap_or(d.price_cap),
        };
        inner.validate().map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn costs(&self) -> Vec<f64> {
        self.inner.costs.clone()
    }

    #[getter]
    fn capacities(&self) -> Vec<f64> {
        self.inner.capacities.clone()
    }

    #[getter]
    fn price_floor(&self) -> f64 {
        self.inner.price_floor
    }

    #[getter]
    fn price_cap(&self) -> f64 {
        self.inner.price_cap
    }

    fn action_dim(&self) -> usize {
        self.inner.action_dim()
    }

    fn __repr__(&self) -> String {
        format!(
            "MarketConfig(costs={:?}, capacities={:?}, price_floor={}, price_cap={})",
            self.inner.costs, self.inner.capacities, self.inner.price_floor, self.inner.price_cap
        )
    }
}

fn build_curve(m: &MarketConfig, volumes: Vec<f64>, prices: Vec<f64>) -> PyResult<OfferingCurve> {
    if volumes.len() != prices.len() {
        return Err(value_err("volumes and prices differ in length"));
    }
    let steps = volumes
        .into_iter()
        .zip(prices)
        .map(|(volume, price)| Step { volume, price })
        .collect();
    OfferingCurve::new(steps, m).map_err(value_err)
}

/// Offering curve as `(volume, price)` pairs.
type Curve = Vec<(f64, f64)>;

fn curve_pairs(c: &OfferingCurve) -> Curve {
    c.steps.iter().map(|s| (s.volume, s.price)).collect()
}

/// Profit of an offering curve (step `i` paired with mode `i`) at a clearing price.
#[pyfunction]
fn settle(market: &PyMarket, volumes: Vec<f64>, prices: Vec<f64>, pun_next: f64) -> PyResult<f64> {
    let curve = build_curve(&market.inner, volumes, prices)?;
    Ok(market::settle(&curve, pun_next, &market.inner))
}

#[pyfunction]
fn max_reward(market: &PyMarket, pun_next: f64) -> f64 {
    market::max_reward(pun_next, &market.inner)
}

#[pyfunction]
fn normalize_reward(reward: f64, max: f64) -> f64 {
    market::normalize_reward(reward, max)
}

/// Best curve in hindsight as `(volume, price)` pairs.
#[pyfunction]
fn oracle_curve(market: &PyMarket, pun_next: f64) -> Vec<(f64, f64)> {
    curve_pairs(&OfferingCurve::oracle(pun_next, &market.inner))
}

#[pyclass(name = "PriceSeries", module = "auction_ddpg_py")]
struct PyPriceSeries {
    inner: PriceSeries,
}

#[pymethods]
impl PyPriceSeries {
    /// Hourly prices starting at midnight of `start` (`YYYY-MM-DD`).
    #[staticmethod]
    fn from_prices(start: &str, prices: Vec<f64>) -> PyResult<Self> {
        let date = NaiveDate::parse_from_str(start, "%Y-%m-%d").map_err(value_err)?;
        Ok(Self {
            inner: PriceSeries::from_date(date, prices).map_err(value_err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, date_column="Date", hour_column="Hour", price_column="PUN"))]
    fn load_csv(path: PathBuf, date_column: &str, hour_column: &str, price_column: &str) -> PyResult<Self> {
        let cols = ColumnSpec {
            date: date_column.into(),
            hour: hour_column.into(),
            price: price_column.into(),
        };
        Ok(Self {
            inner: load_pun_csv(&path, &cols).map_err(value_err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn prices(&self) -> Vec<f64> {
        self.inner.prices().to_vec()
    }

    fn start(&self) -> String {
        self.inner.start().format("%Y-%m-%d %H:%M").to_string()
    }

    /// Train and test episode-start hours, stratified by calendar month.
    #[pyo3(signature = (train_fraction=0.8, seed=0, window_hours=WINDOW_HOURS))]
    fn split(&self, train_fraction: f64, seed: u64, window_hours: usize) -> PyResult<(Vec<usize>, Vec<usize>)> {
        let spec = SplitSpec { train_fraction, seed };
        spec.validate().map_err(value_err)?;
        let s = stratified_split(&self.inner, &spec, window_hours).map_err(value_err)?;
        Ok((s.train, s.test))
    }

    /// `(mean, std)` of the prices at `indices`.
    fn norm_stats(&self, indices: Vec<usize>) -> PyResult<(f64, f64)> {
        let s = compute_norm_stats(&self.inner, &indices).map_err(value_err)?;
        Ok((s.mean, s.std))
    }

    /// Normalized prices of the `window_hours` hours before `t`.
    #[pyo3(signature = (t, mean, std, window_hours=WINDOW_HOURS))]
    fn window(&self, t: usize, mean: f64, std: f64, window_hours: usize) -> PyResult<Vec<f64>> {
        window(&self.inner, t, window_hours, &NormStats { mean, std }).map_err(value_err)
    }
}

fn activation(name: &str) -> PyResult<Activation> {
    match name {
        "relu" => Ok(Activation::Relu),
        "tanh" => Ok(Activation::Tanh),
        "identity" => Ok(Activation::Identity),
        other => Err(value_err(format!("unknown activation {other:?}"))),
    }
}

#[pyclass(name = "Network", module = "auction_ddpg_py")]
struct PyNetwork {
    inner: Network,
}

#[pymethods]
impl PyNetwork {
    /// Glorot-initialized network; `activations` uses `relu`, `tanh`, `identity`.
    #[new]
    #[pyo3(signature = (dims, activations, seed=0))]
    fn new(dims: Vec<usize>, activations: Vec<String>, seed: u64) -> PyResult<Self> {
        let acts = activations
            .iter()
            .map(|a| activation(a))
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: Network::init(&dims, &acts, seed).map_err(value_err)?,
        })
    }

    fn dims(&self) -> Vec<usize> {
        self.inner.dims()
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    fn predict(&self, input: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict(&input).map_err(value_err)
    }

    /// Gradient of `output_grad · f(input)` with respect to the input.
    fn input_gradient(&self, input: Vec<f64>, output_grad: Vec<f64>) -> PyResult<Vec<f64>> {
        let (_, tape) = self.inner.forward(&input).map_err(value_err)?;
        self.inner.input_gradient(&tape, &output_grad).map_err(value_err)
    }

    /// Worst relative error of backpropagation against central differences.
    #[pyo3(signature = (input, h=1e-5))]
    fn grad_check(&self, input: Vec<f64>, h: f64) -> PyResult<f64> {
        if h.is_nan() || h <= 0.0 {
            return Err(value_err("h must be positive"));
        }
        grad_check(&self.inner, &input, h).map_err(value_err)
    }
}

#[pyclass(name = "OuNoise", module = "auction_ddpg_py")]
struct PyOuNoise {
    inner: OuNoise,
    rng: ChaCha8Rng,
}

#[pymethods]
impl PyOuNoise {
    #[new]
    #[pyo3(signature = (dim, theta=0.15, mu=1.0, sigma=2.0, dt=1.0, seed=0))]
    fn new(dim: usize, theta: f64, mu: f64, sigma: f64, dt: f64, seed: u64) -> PyResult<Self> {
        if !(theta > 0.0 && sigma >= 0.0 && dt > 0.0) {
            return Err(value_err("need theta > 0, sigma >= 0, dt > 0"));
        }
        Ok(Self {
            inner: OuNoise::new(dim, theta, mu, sigma, dt),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    #[getter]
    fn state(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    /// Advances one step with internal Gaussian draws and returns the new state.
    fn step(&mut self) -> Vec<f64> {
        self.inner.step(&mut self.rng);
        self.inner.x.clone()
    }

    /// Advances one step with caller-supplied standard-normal draws.
    fn step_with(&mut self, xi: Vec<f64>) -> PyResult<Vec<f64>> {
        if xi.len() != self.inner.x.len() {
            return Err(value_err("one draw per component"));
        }
        self.inner.step_with(&xi);
        Ok(self.inner.x.clone())
    }

    fn reset(&mut self) {
        self.inner.reset();
    }
}

fn hyperparameters(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Hyperparameters> {
    let mut table = toml::Table::new();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            let value = if v.is_instance_of::<PyBool>() {
                toml::Value::Boolean(v.extract()?)
            } else if v.is_instance_of::<PyInt>() {
                toml::Value::Integer(v.extract()?)
            } else if v.is_instance_of::<PyFloat>() {
                toml::Value::Float(v.extract()?)
            } else if v.is_instance_of::<PyString>() {
                toml::Value::String(v.extract()?)
            } else {
                return Err(value_err(format!("unsupported value for {key}")));
            };
            table.insert(key, value);
        }
    }
    let h: Hyperparameters = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| value_err(e))?;
    h.validate().map_err(value_err)?;
    Ok(h)
}

#[pyclass(name = "Agent", module = "auction_ddpg_py")]
struct PyAgent {
    inner: Agent,
}

#[pymethods]
impl PyAgent {
    /// Fresh agent; keyword arguments set hyperparameters (e.g. `hidden_size=32`).
    #[new]
    #[pyo3(signature = (market, window_hours=WINDOW_HOURS, **kwargs))]
    fn new(market: &PyMarket, window_hours: usize, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let hyper = hyperparameters(kwargs)?;
        Ok(Self {
            inner: Agent::new(window_hours, &market.inner, &hyper).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let c = Checkpoint::load(&path).map_err(value_err)?;
        Ok(Self {
            inner: c.to_agent().map_err(value_err)?,
        })
    }

    /// Greedy action: normalized components and the decoded `(volume, price)` curve.
    fn act(&self, state: Vec<f64>) -> PyResult<(Vec<f64>, Curve)> {
        let (action, curve) = self.inner.select_action(&state, None).map_err(value_err)?;
        Ok((action, curve_pairs(&curve)))
    }

    /// Critic estimate `Q(state, action)` for a normalized action.
    fn q_value(&self, state: Vec<f64>, action: Vec<f64>) -> PyResult<f64> {
        let input = [state, action].concat();
        Ok(self.inner.critic.predict(&input).map_err(value_err)?[0])
    }

    fn hyperparameters(&self) -> PyResult<String> {
        toml::to_string(&self.inner.hyper).map_err(value_err)
    }
}

/// Runs `train --config PATH`; returns the metrics rows as dicts.
#[pyfunction]
#[pyo3(signature = (config, overrides=Vec::new(), seed=None))]
fn train<'py>(
    py: Python<'py>,
    config: PathBuf,
    overrides: Vec<String>,
    seed: Option<u64>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let summary = py
        .detach(|| cli::cmd_train(&config, &overrides, seed))
        .map_err(command_err)?;
    summary
        .metrics
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("episode", r.episode)?;
            d.set_item("mean_normalized_reward", r.mean_normalized_reward)?;
            d.set_item("mean_policy_loss", r.mean_policy_loss)?;
            d.set_item("mean_critic_loss", r.mean_critic_loss)?;
            d.set_item("wall_seconds", r.wall_seconds)?;
            Ok(d)
        })
        .collect()
}

/// Runs `evaluate --checkpoint PATH --config PATH`; returns the summary.
#[pyfunction]
#[pyo3(signature = (checkpoint, config, overrides=Vec::new()))]
fn evaluate<'py>(
    py: Python<'py>,
    checkpoint: PathBuf,
    config: PathBuf,
    overrides: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| cli::cmd_evaluate(&checkpoint, &config, &overrides))
        .map_err(command_err)?;
    let d = PyDict::new(py);
    d.set_item("episodes", r.episodes)?;
    d.set_item("hours", r.hours)?;
    d.set_item("mean_normalized_reward", r.mean_normalized_reward)?;
    d.set_item("std_normalized_reward", r.std_normalized_reward)?;
    d.set_item("mean_reward", r.mean_reward)?;
    Ok(d)
}

/// Worst relative gradient errors `(actor, critic)` on default-size networks.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn gradcheck(py: Python<'_>, seed: u64) -> PyResult<(f64, f64)> {
    let s = py.detach(|| cli::cmd_gradcheck(seed, None)).map_err(command_err)?;
    Ok((s.actor.max_relative_error, s.critic.max_relative_error))
}

#[pymodule]
fn auction_ddpg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMarket>()?;
    m.add_class::<PyPriceSeries>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyOuNoise>()?;
    m.add_class::<PyAgent>()?;
    m.add_function(wrap_pyfunction!(settle, m)?)?;
    m.add_function(wrap_pyfunction!(max_reward, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_reward, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_curve, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add("WINDOW_HOURS", WINDOW_HOURS)?;
    Ok(())
}
