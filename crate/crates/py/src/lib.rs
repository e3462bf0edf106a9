//! Python bindings for the cacheleak analysis library.

use cacheleak::extraction::LeakageBound;
use cacheleak::{
    AttackerKind, Block, Error, InitialStatus, Observation, Policy, SearchLimits, ToyMachine,
};
use num_bigint::BigUint;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(cacheleak_py, CacheLeakError, PyValueError);
create_exception!(cacheleak_py, InvariantViolation, CacheLeakError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvariantViolation(_) => InvariantViolation::new_err(e.to_string()),
        other => CacheLeakError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

/// New age of the block at age `target` after a hit on the block at age `base`.
#[pyfunction]
fn permutation(policy: &str, assoc: usize, base: usize, target: usize) -> PyResult<usize> {
    cacheleak::permutation(
        parse(policy)?,
        assoc,
        cacheleak::Age(base),
        cacheleak::Age(target),
    )
    .map(|a| a.value())
    .map_err(to_py)
}

/// Number of cache states a footprint of `fp` victim blocks can produce.
#[pyfunction]
#[pyo3(signature = (policy, assoc, fp, initial = "filled"))]
fn absorb(policy: &str, assoc: usize, fp: usize, initial: &str) -> PyResult<BigUint> {
    let r = cacheleak::absorb(parse(policy)?, assoc, fp, parse(initial)?).map_err(to_py)?;
    Ok(r.count)
}

#[pyfunction]
fn absorb_filled(policy: &str, assoc: usize, fp: usize) -> PyResult<BigUint> {
    absorb(policy, assoc, fp, "filled")
}

#[pyfunction]
fn absorb_empty(policy: &str, assoc: usize, fp: usize) -> PyResult<BigUint> {
    absorb(policy, assoc, fp, "empty")
}

#[pyfunction]
fn lambda_plru(k: usize, assoc: usize) -> PyResult<BigUint> {
    cacheleak::lambda_plru(k, assoc).map_err(to_py)
}

/// Analytic cap on extraction, or None when only the state count bounds it.
#[pyfunction]
#[pyo3(signature = (policy, assoc, attacker, fp = 0))]
fn leakage_bound(
    policy: &str,
    assoc: usize,
    attacker: &str,
    fp: usize,
) -> PyResult<Option<BigUint>> {
    match cacheleak::leakage_bound(parse(policy)?, assoc, parse(attacker)?, fp).map_err(to_py)? {
        LeakageBound::Finite(n) => Ok(Some(n)),
        LeakageBound::StateCount => Ok(None),
    }
}

#[pyfunction]
fn success_probability_bound(max_prior: f64, channel_count: u64) -> PyResult<f64> {
    cacheleak::success_probability_bound(max_prior, channel_count).map_err(to_py)
}

#[pyfunction]
fn compose_sets(counts: Vec<BigUint>) -> PyResult<BigUint> {
    cacheleak::compose_sets(&counts).map_err(to_py)
}

fn limits(budget_nodes: Option<u64>, max_depth: Option<usize>, witness: bool) -> SearchLimits {
    let mut l = SearchLimits {
        witness,
        ..SearchLimits::default()
    };
    if let Some(n) = budget_nodes {
        l.max_nodes = n;
    }
    if max_depth.is_some() {
        l.max_depth = max_depth;
    }
    l
}

fn result_dict<'py>(
    py: Python<'py>,
    r_max: u64,
    exact: bool,
    nodes: u64,
    witness: Option<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("r_max", r_max)?;
    d.set_item("bits", (r_max as f64).log2())?;
    d.set_item("exact", exact)?;
    d.set_item("nodes", nodes)?;
    d.set_item("witness", witness)?;
    Ok(d)
}

/// A set of possible victim cache states.
#[pyclass(name = "StateSet", module = "cacheleak_py", frozen)]
struct PyStateSet {
    inner: cacheleak::StateSet,
}

#[pymethods]
impl PyStateSet {
    /// States reachable from a filled or empty start with `fp` victim blocks.
    #[staticmethod]
    #[pyo3(signature = (policy, assoc, fp, initial = "filled"))]
    fn generate(policy: &str, assoc: usize, fp: usize, initial: &str) -> PyResult<Self> {
        let initial: InitialStatus = parse(initial)?;
        let inner = cacheleak::generate(parse(policy)?, assoc, fp, initial).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = cacheleak::StateSet::from_json(text).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn policy(&self) -> &'static str {
        self.inner.policy().name()
    }

    #[getter]
    fn assoc(&self) -> usize {
        self.inner.assoc()
    }

    #[getter]
    fn footprint(&self) -> usize {
        self.inner.universe().footprint()
    }

    /// Block names by age, youngest first.
    fn states(&self) -> Vec<Vec<String>> {
        let u = self.inner.universe();
        self.inner
            .states()
            .iter()
            .map(|s| s.lines().iter().map(|&b| u.name(b).to_owned()).collect())
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "StateSet(policy={}, assoc={}, footprint={}, states={})",
            self.inner.policy(),
            self.inner.assoc(),
            self.inner.universe().footprint(),
            self.inner.len()
        )
    }

    /// Maximum number of knowledge sets an attacker can split the set into.
    #[pyo3(signature = (attacker = "shared", fresh = None, budget_nodes = None, max_depth = None, witness = false))]
    fn max_leakage<'py>(
        &self,
        py: Python<'py>,
        attacker: &str,
        fresh: Option<usize>,
        budget_nodes: Option<u64>,
        max_depth: Option<usize>,
        witness: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let kind: AttackerKind = parse(attacker)?;
        let assoc = self.inner.assoc();
        let mut l = limits(budget_nodes, max_depth, witness);
        if max_depth.is_none() {
            l.max_depth =
                SearchLimits::for_cache(assoc, self.inner.universe().footprint()).max_depth;
        }
        let set = &self.inner;
        let (r_max, exact, nodes, tree) = py
            .detach(|| {
                let (r, machine, _) =
                    cacheleak::cache_leakage(set, kind, fresh.unwrap_or(assoc), &l)?;
                let u = machine.universe();
                let tree = r.witness.as_ref().map(|w| {
                    w.to_json(&|b: &Block| u.name(*b).to_owned(), &|o: &Observation| {
                        o.to_string()
                    })
                    .to_string()
                });
                Ok::<_, Error>((r.r_max, r.exact, r.nodes, tree))
            })
            .map_err(to_py)?;
        result_dict(py, r_max, exact, nodes, tree)
    }
}

/// Extraction on the seven-state example machine, optionally restricted to
/// some inputs.
#[pyfunction]
#[pyo3(signature = (inputs = None, witness = false))]
fn toy_max_leakage<'py>(
    py: Python<'py>,
    inputs: Option<Vec<u8>>,
    witness: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let inputs = inputs.unwrap_or_else(|| ToyMachine.inputs());
    let l = SearchLimits {
        shortest: true,
        ..limits(None, None, witness)
    };
    let r =
        cacheleak::max_leakage(&ToyMachine, &ToyMachine.states(), &inputs, &l).map_err(to_py)?;
    let tree = r.witness.as_ref().map(|w| {
        w.to_json(&|i: &u8| i.to_string(), &|o: &u8| o.to_string())
            .to_string()
    });
    result_dict(py, r.r_max, r.exact, r.nodes, tree)
}

#[pyfunction]
fn policies() -> Vec<&'static str> {
    Policy::ALL.iter().map(|p| p.name()).collect()
}

#[pymodule]
fn cacheleak_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CacheLeakError", m.py().get_type::<CacheLeakError>())?;
    m.add(
        "InvariantViolation",
        m.py().get_type::<InvariantViolation>(),
    )?;
    m.add_class::<PyStateSet>()?;
    m.add_function(wrap_pyfunction!(permutation, m)?)?;
    m.add_function(wrap_pyfunction!(absorb, m)?)?;
    m.add_function(wrap_pyfunction!(absorb_filled, m)?)?;
    m.add_function(wrap_pyfunction!(absorb_empty, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_plru, m)?)?;
    m.add_function(wrap_pyfunction!(leakage_bound, m)?)?;
    m.add_function(wrap_pyfunction!(success_probability_bound, m)?)?;
    m.add_function(wrap_pyfunction!(compose_sets, m)?)?;
    m.add_function(wrap_pyfunction!(toy_max_leakage, m)?)?;
    m.add_function(wrap_pyfunction!(policies, m)?)?;
    Ok(())
}
