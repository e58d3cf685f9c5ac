//! Python bindings. Amounts cross the boundary as decimal strings so no
//! precision is lost; structured results come back as plain dicts and lists.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ratiotrace::experiment::{self, ExperimentConfig};
use ratiotrace::ledger::logfile;
use ratiotrace::{finder, oracle, snapshot, Amount};

fn err(e: ratiotrace::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn amount(s: &str) -> PyResult<Amount> {
    s.parse().map_err(err)
}

fn amounts(v: &[String]) -> PyResult<Vec<Amount>> {
    v.iter().map(|s| amount(s)).collect()
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Sorted balance table of one currency.
type Accounts = Vec<(u64, String)>;

fn to_accounts(accounts: &[snapshot::AccountBalance]) -> Accounts {
    accounts
        .iter()
        .map(|a| (a.address, a.balance.to_string()))
        .collect()
}

#[pyclass(name = "SimulationLog", frozen)]
struct PySimulationLog(ratiotrace::SimulationLog);

#[pymethods]
impl PySimulationLog {
    fn __len__(&self) -> usize {
        self.0.records.len()
    }

    #[getter]
    fn turns(&self) -> u32 {
        self.0.config.turns
    }

    /// The log in its one-JSON-object-per-line form.
    fn to_jsonl(&self) -> PyResult<String> {
        let mut out = Vec::new();
        logfile::write_log(&mut out, &self.0.records).map_err(err)?;
        Ok(String::from_utf8(out).expect("log lines are UTF-8"))
    }

    fn ground_truth_json(&self) -> PyResult<String> {
        logfile::ground_truth_to_json(&self.0.users).map_err(err)
    }

    /// Ground truth as `{user: {currency: address}}`.
    fn users(&self) -> BTreeMap<u64, BTreeMap<u16, u64>> {
        self.0
            .users
            .iter()
            .map(|u| {
                (
                    u.user,
                    u.accounts
                        .iter()
                        .map(|a| (a.currency.0, a.address))
                        .collect(),
                )
            })
            .collect()
    }

    #[pyo3(signature = (time, rates_json=None))]
    fn snapshot(&self, time: u32, rates_json: Option<&str>) -> PyResult<PySnapshot> {
        let rates = rates_json
            .map(snapshot::ExchangeRates::from_json)
            .transpose()
            .map_err(err)?;
        snapshot::replay(&self.0, time, rates.as_ref())
            .map(PySnapshot)
            .map_err(err)
    }
}

#[pyclass(name = "Snapshot", frozen)]
struct PySnapshot(ratiotrace::Snapshot);

#[pymethods]
impl PySnapshot {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ratiotrace::Snapshot::from_json(text).map(Self).map_err(err)
    }

    /// Builds a snapshot from `{currency: [(address, balance), ...]}`.
    #[staticmethod]
    #[pyo3(signature = (dbs, time=0))]
    fn from_balances(dbs: BTreeMap<u16, Accounts>, time: u32) -> PyResult<Self> {
        let mut out = Vec::new();
        for (c, accounts) in dbs {
            let parsed = accounts
                .iter()
                .map(|(a, b)| Ok(snapshot::AccountBalance::new(*a, amount(b)?)))
                .collect::<PyResult<Vec<_>>>()?;
            out.push(ratiotrace::CurrencyDb::from_balances(
                ratiotrace::CurrencyId(c),
                parsed,
            ));
        }
        let snap = ratiotrace::Snapshot::new(time, out);
        snap.validate().map_err(err)?;
        Ok(Self(snap))
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    #[getter]
    fn time(&self) -> u32 {
        self.0.time
    }

    fn currencies(&self) -> Vec<u16> {
        self.0.currencies().iter().map(|c| c.0).collect()
    }

    /// Accounts of one currency, ascending by balance.
    fn accounts(&self, currency: u16) -> PyResult<Accounts> {
        self.0
            .db(ratiotrace::CurrencyId(currency))
            .map(|db| to_accounts(&db.accounts))
            .ok_or_else(|| PyValueError::new_err(format!("no currency {currency}")))
    }

    fn restrict(&self, currencies: Vec<u16>) -> PyResult<Self> {
        let ids: Vec<_> = currencies.into_iter().map(ratiotrace::CurrencyId).collect();
        self.0.restrict(&ids).map(Self).map_err(err)
    }
}

#[pyclass(name = "Portfolio", frozen)]
struct PyPortfolio(ratiotrace::Portfolio);

#[pymethods]
impl PyPortfolio {
    #[new]
    fn new(alphas: BTreeMap<u16, String>) -> PyResult<Self> {
        let alphas = alphas
            .into_iter()
            .map(|(c, a)| Ok((ratiotrace::CurrencyId(c), amount(&a)?)))
            .collect::<PyResult<_>>()?;
        ratiotrace::Portfolio::new(alphas).map(Self).map_err(err)
    }

    /// Shares proportional to `{currency: balance}`.
    #[staticmethod]
    fn from_holdings(holdings: BTreeMap<u16, String>) -> PyResult<Self> {
        let pairs = holdings
            .into_iter()
            .map(|(c, b)| Ok((ratiotrace::CurrencyId(c), amount(&b)?)))
            .collect::<PyResult<Vec<_>>>()?;
        ratiotrace::Portfolio::from_holdings(&pairs)
            .map(Self)
            .map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        ratiotrace::Portfolio::from_json(text)
            .map(Self)
            .map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.0.to_json().map_err(err)
    }

    fn alphas(&self) -> BTreeMap<u16, String> {
        self.0
            .alphas
            .iter()
            .map(|(c, a)| (c.0, a.to_string()))
            .collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

fn answer_to_py<'py>(py: Python<'py>, a: &finder::AnswerTuple) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let accounts: Vec<(u16, u64, String)> = a
        .accounts
        .iter()
        .map(|t| (t.currency.0, t.address, t.balance.to_string()))
        .collect();
    d.set_item("accounts", accounts)?;
    d.set_item("score", a.score.to_string())?;
    d.set_item("normalized_score", a.normalized_score().to_string())?;
    Ok(d)
}

#[pyfunction]
fn simulate(config_json: &str) -> PyResult<PySimulationLog> {
    let config = ratiotrace::SimConfig::from_json(config_json).map_err(err)?;
    ratiotrace::simulate(&config)
        .map(PySimulationLog)
        .map_err(err)
}

/// Replays a log in line form up to `time`.
#[pyfunction]
#[pyo3(signature = (log_jsonl, time, rates_json=None))]
fn replay_log(log_jsonl: &str, time: u32, rates_json: Option<&str>) -> PyResult<PySnapshot> {
    let records = logfile::read_log(log_jsonl.as_bytes()).map_err(err)?;
    let rates = match rates_json {
        Some(t) => snapshot::ExchangeRates::from_json(t).map_err(err)?,
        None => snapshot::ExchangeRates::unit(records.iter().map(|r| r.currency)),
    };
    snapshot::replay_records(&records, time, &rates)
        .map(PySnapshot)
        .map_err(err)
}

/// `binary_find` over `(address, balance)` pairs; the input is sorted first.
#[pyfunction]
fn binary_find(accounts: Accounts, target: &str) -> PyResult<Accounts> {
    let mut parsed = accounts
        .iter()
        .map(|(a, b)| Ok(snapshot::AccountBalance::new(*a, amount(b)?)))
        .collect::<PyResult<Vec<_>>>()?;
    parsed.sort_by_key(|a| (a.balance, a.address));
    Ok(to_accounts(finder::binary_find(&parsed, amount(target)?)))
}

#[pyfunction]
fn score(alphas: Vec<String>, balances: Vec<String>) -> PyResult<String> {
    finder::score(&amounts(&alphas)?, &amounts(&balances)?)
        .map(|s| s.to_string())
        .map_err(err)
}

#[pyfunction]
fn normalized_score(score: &str, m: usize) -> PyResult<String> {
    Ok(finder::normalized_score(amount(score)?, m).to_string())
}

#[pyfunction]
fn target_balance(pivot_balance: &str, alpha_1: &str, alpha_i: &str) -> PyResult<String> {
    finder::target_balance(amount(pivot_balance)?, amount(alpha_1)?, amount(alpha_i)?)
        .map(|a| a.to_string())
        .map_err(err)
}

/// Returns `{"best": answer | None, "retained": [answer], "diagnostics": {...}}`.
#[pyfunction]
#[pyo3(signature = (snapshot, portfolio, threshold, top=None))]
fn find_accounts<'py>(
    py: Python<'py>,
    snapshot: &PySnapshot,
    portfolio: &PyPortfolio,
    threshold: &str,
    top: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut params = finder::FinderParams::with_threshold(amount(threshold)?);
    params.max_answers = top;
    let outcome = finder::find_accounts(&snapshot.0, &portfolio.0, &params).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item(
        "best",
        outcome
            .best
            .as_ref()
            .map(|a| answer_to_py(py, a))
            .transpose()?,
    )?;
    let retained = outcome
        .retained
        .iter()
        .map(|a| answer_to_py(py, a))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("retained", retained)?;
    d.set_item("diagnostics", json_to_py(py, &outcome.diagnostics)?)?;
    Ok(d)
}

/// Returns `{"best": answer | None, "tuples_examined": int}`.
#[pyfunction]
#[pyo3(signature = (snapshot, portfolio, limit=oracle::DEFAULT_LIMIT))]
fn exhaustive_best<'py>(
    py: Python<'py>,
    snapshot: &PySnapshot,
    portfolio: &PyPortfolio,
    limit: u128,
) -> PyResult<Bound<'py, PyDict>> {
    let result = oracle::exhaustive_best(&snapshot.0, &portfolio.0, limit).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item(
        "best",
        result
            .best
            .as_ref()
            .map(|a| answer_to_py(py, a))
            .transpose()?,
    )?;
    d.set_item("tuples_examined", result.tuples_examined)?;
    Ok(d)
}

/// Runs a sweep; writes the CSV/JSON tables too when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    config_json: &str,
    out_dir: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let config = ExperimentConfig::from_json(config_json).map_err(err)?;
    let result = py
        .detach(|| experiment::run_experiment(&config))
        .map_err(err)?;
    if let Some(dir) = out_dir {
        experiment::write_outputs(&result, &dir).map_err(err)?;
    }
    json_to_py(py, &result)
}

#[pymodule]
fn ratiotrace_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimulationLog>()?;
    m.add_class::<PySnapshot>()?;
    m.add_class::<PyPortfolio>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(replay_log, m)?)?;
    m.add_function(wrap_pyfunction!(binary_find, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(normalized_score, m)?)?;
    m.add_function(wrap_pyfunction!(target_balance, m)?)?;
    m.add_function(wrap_pyfunction!(find_accounts, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_best, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
