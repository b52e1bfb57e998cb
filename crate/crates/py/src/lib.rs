use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use edgebid::baselines::AlgoKind;
use edgebid::market::{run_auction as auction, Bid};
use edgebid::rewards::jain_fairness as jain;
use edgebid::scenarios::commands;
use edgebid::scenarios::oracle::{run_suite, Mutation};
use edgebid::scenarios::{test_run, Preset, ScenarioConfig};
use edgebid::simcore::SimRng;
use rand::SeedableRng;

fn err(e: edgebid::Error) -> PyErr {
    match e {
        edgebid::Error::Config(m) => PyValueError::new_err(m),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

/// Scenario configuration. Build from a preset or TOML text.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
pub struct PyConfig {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyConfig {
    /// `"train"` or `"test"`.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let p = match name {
            "train" => Preset::Train,
            "test" => Preset::Test,
            _ => return Err(PyValueError::new_err(format!("unknown preset {name:?}"))),
        };
        Ok(Self {
            inner: ScenarioConfig::preset(p),
        })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ScenarioConfig::from_toml_str(text)
            .map(|inner| Self { inner })
            .map_err(err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ScenarioConfig::load(&path).map(|inner| Self { inner }).map_err(err)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }

    #[getter]
    fn horizon(&self) -> u64 {
        self.inner.horizon
    }

    #[setter]
    fn set_horizon(&mut self, v: u64) {
        self.inner.horizon = v;
    }

    #[getter]
    fn warmup_steps(&self) -> u64 {
        self.inner.warmup_steps
    }

    #[setter]
    fn set_warmup_steps(&mut self, v: u64) {
        self.inner.warmup_steps = v;
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs
    }

    #[setter]
    fn set_epochs(&mut self, v: usize) {
        self.inner.epochs = v;
    }

    #[getter]
    fn epoch_steps(&self) -> u64 {
        self.inner.epoch_steps
    }

    #[setter]
    fn set_epoch_steps(&mut self, v: u64) {
        self.inner.epoch_steps = v;
    }

    /// Bidder counts by algorithm label.
    #[getter]
    fn population(&self) -> BTreeMap<String, usize> {
        self.inner
            .population
            .iter()
            .map(|(k, n)| (k.label().to_string(), *n))
            .collect()
    }

    #[setter]
    fn set_population(&mut self, pop: BTreeMap<String, usize>) -> PyResult<()> {
        let mut out = BTreeMap::new();
        for (k, n) in pop {
            let kind: AlgoKind = k.parse().map_err(err)?;
            out.insert(kind, n);
        }
        self.inner.population = out;
        Ok(())
    }

    fn bidder_count(&self) -> usize {
        self.inner.bidder_count()
    }

    fn total_capacity(&self) -> f64 {
        self.inner.total_capacity()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(preset={:?}, seed={}, bidders={}, horizon={})",
            self.inner.preset,
            self.inner.seed,
            self.inner.bidder_count(),
            self.inner.horizon
        )
    }
}

/// One auction round. `bids` holds `(bidder, kind, price)` triples and
/// `availability[k]` the slots of type `k`. Returns the won flags and,
/// per type, the winning bid indices and the uniform payment.
#[pyfunction]
#[pyo3(signature = (bids, availability, seed = 0))]
fn run_auction(
    py: Python<'_>,
    bids: Vec<(usize, usize, f64)>,
    availability: Vec<usize>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    if let Some((_, k, _)) = bids.iter().find(|(_, k, _)| *k >= availability.len()) {
        return Err(PyValueError::new_err(format!("bid kind {k} has no availability entry")));
    }
    let bids: Vec<Bid> = bids
        .into_iter()
        .enumerate()
        .map(|(i, (bidder, kind, price))| Bid {
            bidder,
            request: i as u64,
            kind,
            price,
            created: 0,
            deadline: u64::MAX,
            rebid_count: 0,
        })
        .collect();
    let mut rng = SimRng::seed_from_u64(seed);
    let r = auction(&bids, &availability, &mut rng);
    let out = PyDict::new(py);
    out.set_item("won", r.won.clone())?;
    let types: Vec<Py<PyAny>> = r
        .per_type
        .iter()
        .map(|o| {
            let d = PyDict::new(py);
            d.set_item("slots", o.slots)?;
            d.set_item("winners", o.winners.clone())?;
            d.set_item("payment", o.payment)?;
            Ok(d.into_any().unbind())
        })
        .collect::<PyResult<_>>()?;
    out.set_item("types", types)?;
    Ok(out.into_any().unbind())
}

/// Jain index of non-negative totals.
#[pyfunction]
fn jain_fairness(totals: Vec<f64>) -> f64 {
    jain(&totals)
}

/// `"N"`, `"A..B"` or `"A..=B"`, both ends inclusive.
#[pyfunction]
fn parse_seeds(s: &str) -> PyResult<Vec<u64>> {
    commands::parse_seeds(s).map_err(err)
}

/// Offline training for each seed under `out/seed-N/`.
#[pyfunction]
fn train(py: Python<'_>, config: PyConfig, seeds: Vec<u64>, out: PathBuf) -> PyResult<Py<PyAny>> {
    let cfg = config.inner;
    let r = py.detach(|| commands::train(&cfg, &seeds, &out)).map_err(err)?;
    json_to_py(py, &r)
}

/// Deployment runs for each seed; returns the aggregated report.
#[pyfunction]
#[pyo3(signature = (config, seeds, out, checkpoint = None, audit = false))]
fn test(
    py: Python<'_>,
    config: PyConfig,
    seeds: Vec<u64>,
    out: PathBuf,
    checkpoint: Option<PathBuf>,
    audit: bool,
) -> PyResult<Py<PyAny>> {
    let cfg = config.inner;
    let r = py
        .detach(|| commands::test(&cfg, &seeds, checkpoint.as_deref(), &out, audit))
        .map_err(err)?;
    json_to_py(py, &r)
}

/// One deployment run in memory; returns the metric rows.
#[pyfunction]
#[pyo3(signature = (config, checkpoint = None))]
fn simulate(py: Python<'_>, config: PyConfig, checkpoint: Option<PathBuf>) -> PyResult<Py<PyAny>> {
    let cfg = config.inner;
    let out = py
        .detach(|| {
            let cks = match &checkpoint {
                Some(p) => commands::load_checkpoints(p, cfg.seed)?,
                None => BTreeMap::new(),
            };
            test_run(&cfg, &cks, false, false)
        })
        .map_err(err)?;
    json_to_py(py, &out.metrics)
}

/// Runs the oracle suite. `mutate` is `"payment"` or `"gradient"`.
#[pyfunction]
#[pyo3(signature = (seed = 1, mutate = None))]
fn oracle(py: Python<'_>, seed: u64, mutate: Option<&str>) -> PyResult<Py<PyAny>> {
    let m = match mutate {
        None => Mutation::None,
        Some("payment") => Mutation::PaymentRule,
        Some("gradient") => Mutation::Gradient,
        Some(o) => return Err(PyValueError::new_err(format!("unknown mutation {o:?}"))),
    };
    let r = py.detach(|| run_suite(seed, m));
    py.import("json")?
        .call_method1("loads", (r.to_json(),))
        .map(|v| v.unbind())
}

#[pymodule]
fn edgebid_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(run_auction, m)?)?;
    m.add_function(wrap_pyfunction!(jain_fairness, m)?)?;
    m.add_function(wrap_pyfunction!(parse_seeds, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(test, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    Ok(())
}
