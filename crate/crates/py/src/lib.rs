//! Python bindings: networks, parameter maps, simulation, Monte Carlo and
//! exact extents, sweeps, dominance comparisons and reductions.

use cascadelab::engine::{self, Distancing, Model, Seeding, Trigger};
use cascadelab::monotonicity::{self, Concordance, Mode, SweepMode, SweepSpec, Verdict};
use cascadelab::netcore::{self, ContactNetwork, EpidemicParams};
use cascadelab::oracle;
use cascadelab::reductions::{self, ReductionKind, VerifyMode};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: cascadelab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A directed contact network with named nodes.
#[pyclass(name = "Network", module = "cascadelab", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyNetwork {
    inner: ContactNetwork,
}

#[pymethods]
impl PyNetwork {
    /// Builds a network from node names and `(from, to)` arcs.
    #[new]
    #[pyo3(signature = (nodes, arcs, directed = true))]
    fn new(nodes: Vec<String>, arcs: Vec<(String, String)>, directed: bool) -> PyResult<Self> {
        let mut net = ContactNetwork::new();
        for name in &nodes {
            net.add_node(name);
        }
        for (u, v) in &arcs {
            let (a, b) = (net.add_node(u), net.add_node(v));
            net.add_arc(a, b).map_err(err)?;
            if !directed {
                net.add_arc(b, a).map_err(err)?;
            }
        }
        Ok(Self { inner: net })
    }

    /// `diamond`, `karate` or `complete:<n>`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(Self { inner: netcore::builtin(name).map_err(err)? })
    }

    /// Parses an edge list; returns the network and its parameters
    /// (per-arc transmission from the third column).
    #[staticmethod]
    #[pyo3(signature = (text, directed = false))]
    fn from_edge_list(text: &str, directed: bool) -> PyResult<(Self, PyParams)> {
        let (inner, params) = netcore::build_from_edge_list(text, directed).map_err(err)?;
        Ok((Self { inner }, PyParams { inner: params }))
    }

    #[pyo3(signature = (params = None))]
    fn to_edge_list(&self, params: Option<PyRef<'_, PyParams>>) -> String {
        match params {
            Some(p) => netcore::write_edge_list(&self.inner, &p.inner),
            None => netcore::write_edge_list(&self.inner, &EpidemicParams::new(&self.inner)),
        }
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn arc_count(&self) -> usize {
        self.inner.arc_count()
    }

    #[getter]
    fn names(&self) -> Vec<String> {
        self.inner.names().to_vec()
    }

    /// Arcs as name pairs, in arc-index order.
    #[getter]
    fn arcs(&self) -> Vec<(String, String)> {
        self.inner.arcs().iter().map(|&(u, v)| (self.inner.name(u).to_owned(), self.inner.name(v).to_owned())).collect()
    }

    fn index(&self, name: &str) -> PyResult<usize> {
        self.inner.require(name).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.node_count()
    }

    fn __repr__(&self) -> String {
        format!("Network(nodes={}, arcs={})", self.inner.node_count(), self.inner.arc_count())
    }
}

/// Induction and removal probabilities per node, transmission per arc.
#[pyclass(name = "Params", module = "cascadelab", skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: EpidemicParams,
}

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (network, sigma = 0.0, gamma = 0.0, tau = 1.0))]
    fn new(network: PyRef<'_, PyNetwork>, sigma: f64, gamma: f64, tau: f64) -> PyResult<Self> {
        let inner = EpidemicParams::uniform(&network.inner, sigma, gamma, tau);
        inner.validate(&network.inner).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn induction(&self) -> Vec<f64> {
        self.inner.induction.clone()
    }

    #[setter]
    fn set_induction(&mut self, v: Vec<f64>) {
        self.inner.induction = v;
    }

    #[getter]
    fn removal(&self) -> Vec<f64> {
        self.inner.removal.clone()
    }

    #[setter]
    fn set_removal(&mut self, v: Vec<f64>) {
        self.inner.removal = v;
    }

    #[getter]
    fn transmission(&self) -> Vec<f64> {
        self.inner.transmission.clone()
    }

    #[setter]
    fn set_transmission(&mut self, v: Vec<f64>) {
        self.inner.transmission = v;
    }

    /// Copy where `node` is the only initial infectee.
    fn with_single_seed(&self, network: PyRef<'_, PyNetwork>, node: &str) -> PyResult<Self> {
        let v = network.inner.require(node).map_err(err)?;
        Ok(Self { inner: self.inner.clone().with_single_seed(v) })
    }

    fn with_uniform_transmission(&self, tau: f64) -> Self {
        Self { inner: self.inner.clone().with_uniform_transmission(tau) }
    }

    fn with_uniform_removal(&self, gamma: f64) -> Self {
        Self { inner: self.inner.clone().with_uniform_removal(gamma) }
    }

    /// Reads `node sigma gamma` lines.
    fn apply_params_file(&mut self, network: PyRef<'_, PyNetwork>, text: &str) -> PyResult<()> {
        netcore::apply_params_file(text, &network.inner, &mut self.inner).map_err(err)
    }

    fn to_params_file(&self, network: PyRef<'_, PyNetwork>) -> String {
        netcore::write_params(&network.inner, &self.inner)
    }

    fn validate(&self, network: PyRef<'_, PyNetwork>) -> PyResult<()> {
        self.inner.validate(&network.inner).map_err(err)
    }

    /// Whether these parameters dominate `other` at every node and arc.
    fn dominates(&self, other: PyRef<'_, PyParams>) -> PyResult<bool> {
        netcore::dominates(&self.inner, &other.inner).map_err(err)
    }

    fn __eq__(&self, other: PyRef<'_, PyParams>) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Params(nodes={}, arcs={})",
            self.inner.induction.len(),
            self.inner.transmission.len()
        )
    }
}

/// Mean extent with a 95% half-width (zero for exact values).
#[pyclass(name = "Estimate", module = "cascadelab", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyEstimate {
    mean: f64,
    half_width_95: f64,
    replications: u64,
    exact: bool,
}

impl From<engine::ExtentEstimate> for PyEstimate {
    fn from(e: engine::ExtentEstimate) -> Self {
        Self { mean: e.mean, half_width_95: e.half_width_95, replications: e.replications, exact: e.exact }
    }
}

#[pymethods]
impl PyEstimate {
    fn contains(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width_95
    }

    fn __repr__(&self) -> String {
        format!("Estimate(mean={}, half_width_95={}, replications={})", self.mean, self.half_width_95, self.replications)
    }
}

/// Exact extent law: mean, distribution over 0..=n and per-node infection probabilities.
#[pyclass(name = "ExactResult", module = "cascadelab", frozen, get_all, skip_from_py_object)]
struct PyExactResult {
    mean_extent: f64,
    extent_distribution: Vec<f64>,
    infect_prob: Vec<f64>,
}

/// One realized epidemic: state symbols (S, I, R, D) per step and node.
#[pyclass(name = "Trajectory", module = "cascadelab", frozen, get_all, skip_from_py_object)]
struct PyTrajectory {
    steps: Vec<String>,
    extent: usize,
    final_time: usize,
    text: String,
}

fn model(name: &str, threshold: usize, trigger: &str) -> PyResult<Model> {
    let trigger = match trigger {
        "ever" => Trigger::EverInfected,
        "current" => Trigger::CurrentlyInfected,
        other => return Err(PyValueError::new_err(format!("trigger must be 'ever' or 'current', got {other:?}"))),
    };
    match name {
        "sir" => Ok(Model::Sir),
        "fleesir" => Ok(Model::FleeSir(Distancing { threshold, trigger })),
        other => Err(PyValueError::new_err(format!("model must be 'sir' or 'fleesir', got {other:?}"))),
    }
}

fn seeding(net: &ContactNetwork, seed_node: Option<&str>, uniform_seed: bool) -> PyResult<Seeding> {
    match (seed_node, uniform_seed) {
        (Some(_), true) => Err(PyValueError::new_err("seed_node and uniform_seed are mutually exclusive")),
        (Some(name), false) => Ok(Seeding::Node(net.require(name).map_err(err)?)),
        (None, true) => Ok(Seeding::UniformSingle),
        (None, false) => Ok(Seeding::Params),
    }
}

/// Runs one epidemic from a seeded generator.
#[pyfunction]
#[pyo3(signature = (network, params, model = "sir", seed = 0, threshold = 2, trigger = "ever"))]
fn simulate(
    network: PyRef<'_, PyNetwork>,
    params: PyRef<'_, PyParams>,
    model: &str,
    seed: u64,
    threshold: usize,
    trigger: &str,
) -> PyResult<PyTrajectory> {
    let model = self::model(model, threshold, trigger)?;
    params.inner.validate(&network.inner).map_err(err)?;
    let mut source = engine::RandomSource(engine::rng_from_seed(seed));
    let record = engine::simulate_with(&network.inner, &params.inner, &model, &mut source);
    let steps = (0..=record.final_time())
        .map(|t| record.states_at(t).iter().map(|s| s.symbol()).collect())
        .collect();
    Ok(PyTrajectory {
        steps,
        extent: record.extent(),
        final_time: record.final_time(),
        text: record.to_text(&network.inner),
    })
}

/// Monte Carlo mean extent; replications run in parallel and the result
/// depends only on `seed`.
#[pyfunction]
#[pyo3(signature = (network, params, model = "sir", replications = 10_000, seed = 0, seed_node = None, uniform_seed = false, threshold = 2, trigger = "ever"))]
#[allow(clippy::too_many_arguments)]
fn estimate_mean_extent(
    py: Python<'_>,
    network: PyRef<'_, PyNetwork>,
    params: PyRef<'_, PyParams>,
    model: &str,
    replications: u64,
    seed: u64,
    seed_node: Option<&str>,
    uniform_seed: bool,
    threshold: usize,
    trigger: &str,
) -> PyResult<PyEstimate> {
    let model = self::model(model, threshold, trigger)?;
    let seeding = self::seeding(&network.inner, seed_node, uniform_seed)?;
    let (net, p) = (&network.inner, &params.inner);
    let est = py
        .detach(|| engine::estimate_mean_extent_seeded(&model, net, p, seeding, replications, seed))
        .map_err(err)?;
    Ok(est.into())
}

/// Exact extent law by enumeration (small instances only).
#[pyfunction]
#[pyo3(signature = (network, params, model = "sir", seed_node = None, uniform_seed = false, threshold = 2, trigger = "ever"))]
#[allow(clippy::too_many_arguments)]
fn exact(
    py: Python<'_>,
    network: PyRef<'_, PyNetwork>,
    params: PyRef<'_, PyParams>,
    model: &str,
    seed_node: Option<&str>,
    uniform_seed: bool,
    threshold: usize,
    trigger: &str,
) -> PyResult<PyExactResult> {
    let model = self::model(model, threshold, trigger)?;
    let seeding = self::seeding(&network.inner, seed_node, uniform_seed)?;
    let (net, p) = (&network.inner, &params.inner);
    let r = py.detach(|| oracle::exact_model(net, p, &model, seeding)).map_err(err)?;
    Ok(PyExactResult { mean_extent: r.mean_extent, extent_distribution: r.extent_distribution, infect_prob: r.infect_prob })
}

/// Mean extent over uniform transmission values. Returns the points and
/// whether the curve is `"concordant"` (never drops) or `"discordant"`.
#[pyfunction]
#[pyo3(signature = (network, params, tau_grid, model = "sir", mode = "auto", replications = 10_000, seed = 0, seed_node = None, uniform_seed = false, threshold = 2, trigger = "ever", tolerance = 1e-12))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    network: PyRef<'_, PyNetwork>,
    params: PyRef<'_, PyParams>,
    tau_grid: Vec<f64>,
    model: &str,
    mode: &str,
    replications: u64,
    seed: u64,
    seed_node: Option<&str>,
    uniform_seed: bool,
    threshold: usize,
    trigger: &str,
    tolerance: f64,
) -> PyResult<(Vec<(f64, PyEstimate)>, String)> {
    let model = self::model(model, threshold, trigger)?;
    let seeding = self::seeding(&network.inner, seed_node, uniform_seed)?;
    let mode = match mode {
        "auto" => SweepMode::Auto,
        "exact" => SweepMode::Exact,
        "mc" => SweepMode::MonteCarlo,
        other => return Err(PyValueError::new_err(format!("mode must be auto, exact or mc, got {other:?}"))),
    };
    let spec = SweepSpec { model, seeding, base: &params.inner, tau_grid: &tau_grid, mode, replications, seed };
    let net = &network.inner;
    let (curve, class) = py
        .detach(|| {
            let curve = monotonicity::sweep(net, &spec)?;
            let class = monotonicity::classify(&curve, tolerance)?;
            Ok((curve, class))
        })
        .map_err(err)?;
    let class = match class {
        Concordance::Concordant => "concordant",
        Concordance::Discordant => "discordant",
    };
    Ok((curve.points.into_iter().map(|(t, e)| (t, e.into())).collect(), class.to_owned()))
}

/// Mean extents under `over` and `under` with a verdict:
/// `"ordered"`, `"tied"`, `"violation"` or `"inconclusive"`.
#[pyfunction]
#[pyo3(signature = (network, over, under, model = "sir", mode = "exact", replications = 10_000, seed = 0, allow_undominated = false, threshold = 2, trigger = "ever"))]
#[allow(clippy::too_many_arguments)]
fn compare(
    py: Python<'_>,
    network: PyRef<'_, PyNetwork>,
    over: PyRef<'_, PyParams>,
    under: PyRef<'_, PyParams>,
    model: &str,
    mode: &str,
    replications: u64,
    seed: u64,
    allow_undominated: bool,
    threshold: usize,
    trigger: &str,
) -> PyResult<(PyEstimate, PyEstimate, String)> {
    let model = self::model(model, threshold, trigger)?;
    let mode = match mode {
        "exact" => Mode::Exact,
        "mc" => Mode::MonteCarlo { replications, seed },
        other => return Err(PyValueError::new_err(format!("mode must be exact or mc, got {other:?}"))),
    };
    let (net, hi, lo) = (&network.inner, &over.inner, &under.inner);
    let report = py.detach(|| monotonicity::compare(&model, net, hi, lo, mode, allow_undominated)).map_err(err)?;
    let verdict = match report.verdict {
        Verdict::Ordered => "ordered",
        Verdict::Tied => "tied",
        Verdict::Violation => "violation",
        Verdict::Inconclusive => "inconclusive",
    };
    Ok((report.extent_over.into(), report.extent_under.into(), verdict.to_owned()))
}

/// Applies `tau_to_gamma` or `sigma_to_alpha`. Returns the reduced network,
/// its parameters, the extent offset and the time dilation.
#[pyfunction]
fn reduce(
    kind: &str,
    network: PyRef<'_, PyNetwork>,
    params: PyRef<'_, PyParams>,
) -> PyResult<(PyNetwork, PyParams, f64, usize)> {
    let kind: ReductionKind = kind.parse().map_err(err)?;
    let r = reductions::reduce(kind, &network.inner, &params.inner).map_err(err)?;
    Ok((PyNetwork { inner: r.network }, PyParams { inner: r.params }, r.extent_offset, r.time_dilation))
}

/// Checks a reduction exactly; returns `(original_mean, reduced_mean, holds)`
/// with the offset already removed from the reduced side.
#[pyfunction]
fn verify_reduction(
    py: Python<'_>,
    kind: &str,
    network: PyRef<'_, PyNetwork>,
    params: PyRef<'_, PyParams>,
) -> PyResult<(f64, f64, bool)> {
    let kind: ReductionKind = kind.parse().map_err(err)?;
    let (net, p) = (&network.inner, &params.inner);
    let v = py.detach(|| reductions::verify_reduction(kind, net, p, VerifyMode::Exact)).map_err(err)?;
    Ok((v.original.mean, v.reduced.mean, v.holds))
}

#[pymodule(name = "cascadelab")]
fn cascadelab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyExactResult>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_mean_extent, m)?)?;
    m.add_function(wrap_pyfunction!(exact, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(verify_reduction, m)?)?;
    Ok(())
}
