//! Python bindings for the netident library.
//!
//! The module mirrors the Rust API with a thin Pythonic skin: graphs,
//! models, families, and input vectors are classes; solving, detection,
//! reconstruction, and simulation are free functions returning dicts.
//! Exact rationals cross the boundary as `"p/q"` strings so nothing is
//! rounded on the way out; anywhere a rational is expected, an int, a
//! float, or a `"p/q"` string is accepted.

use num_bigint::BigInt;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use netident::detection as det;
use netident::exact::{format_rat, parse_rat, rat_from_f64, Rat};
use netident::graph::{self, GraphFamily, DEFAULT_ENUMERATION_CAP};
use netident::indication::{self, IndicationVector, Provenance};
use netident::models::{self, LtiNetworkModel, ModelSpec};
use netident::simulation as sim;
use netident::steady_state as ss;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Accept an int, a float, or a "p/q" string as an exact rational.
fn to_rat(v: &Bound<'_, PyAny>) -> PyResult<Rat> {
    if let Ok(i) = v.extract::<i64>() {
        return Ok(Rat::from_integer(i.into()));
    }
    if let Ok(s) = v.extract::<String>() {
        return parse_rat(&s).map_err(err);
    }
    if let Ok(f) = v.extract::<f64>() {
        return rat_from_f64(f)
            .ok_or_else(|| PyValueError::new_err(format!("{f} has no exact form")));
    }
    Err(PyValueError::new_err("expected int, float, or 'p/q' string"))
}

fn to_rats(vs: Vec<Bound<'_, PyAny>>) -> PyResult<Vec<Rat>> {
    vs.iter().map(to_rat).collect()
}

fn rats_to_strings(rs: &[Rat]) -> Vec<String> {
    rs.iter().map(format_rat).collect()
}

/// An undirected simple graph on agents 1..n.
#[pyclass(frozen)]
#[derive(Clone)]
struct Graph {
    inner: graph::Graph,
}

#[pymethods]
impl Graph {
    /// Graph(n, edges) with 1-based (i, j) pairs, as in the file formats.
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        let zero_based: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(i, j)| {
                if i == 0 || j == 0 {
                    Err(PyValueError::new_err("vertices are numbered from 1"))
                } else {
                    Ok((i - 1, j - 1))
                }
            })
            .collect::<PyResult<_>>()?;
        Ok(Graph { inner: graph::Graph::new(n, &zero_based).map_err(err)? })
    }

    #[staticmethod]
    fn empty(n: usize) -> Self {
        Graph { inner: graph::Graph::empty(n) }
    }

    #[staticmethod]
    fn complete(n: usize) -> Self {
        Graph { inner: graph::Graph::complete(n) }
    }

    #[staticmethod]
    fn path(n: usize) -> Self {
        Graph { inner: graph::Graph::path(n) }
    }

    /// Rebuild a graph from its edge-indicator key (the `key` property).
    #[staticmethod]
    fn from_key(n: usize, key: &str) -> PyResult<Self> {
        Ok(Graph { inner: graph::Graph::from_key_bits(n, key).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// Edge list with 1-based endpoints.
    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }

    /// Bit string over vertex pairs in lexicographic order; a stable id.
    #[getter]
    fn key(&self) -> String {
        self.inner.key_bits()
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={:?})", self.inner.n(), self.edges())
    }

    fn __eq__(&self, other: &Graph) -> bool {
        self.inner == other.inner
    }

    fn __hash__(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.inner.n().hash(&mut h);
        self.inner.key_bits().hash(&mut h);
        h.finish()
    }
}

/// Node dynamics plus coupling gains: the known part of the system.
#[pyclass(frozen)]
#[derive(Clone)]
struct Model {
    inner: ModelSpec,
}

#[pymethods]
impl Model {
    /// Rational LTI model: agent gains `a` (length n) and pair gains `b`
    /// (length n·(n−1)/2, or a single value used for every pair).
    #[staticmethod]
    fn lti(a: Vec<Bound<'_, PyAny>>, b: Vec<Bound<'_, PyAny>>) -> PyResult<Self> {
        let a = to_rats(a)?;
        let mut b = to_rats(b)?;
        let pairs = graph::pair_count(a.len());
        if b.len() == 1 && pairs > 1 {
            b = vec![b[0].clone(); pairs];
        }
        let m = LtiNetworkModel::new(a, b).map_err(err)?;
        Ok(Model { inner: ModelSpec::Lti(m) })
    }

    /// Hopfield-type nodes: output y = tanh(x/2), time constants `tau`,
    /// uniform sigmoidal coupling with slope `b`.
    #[staticmethod]
    fn neural(tau: Vec<f64>, b: f64) -> PyResult<Self> {
        let m = models::NetworkModel::neural(&tau, b).map_err(err)?;
        Ok(Model { inner: ModelSpec::Nonlinear(m) })
    }

    /// Parse the on-disk model format (`model=lti` / `model=neural`).
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        Ok(Model { inner: models::parse_model_config(text).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn is_lti(&self) -> bool {
        self.inner.as_lti().is_some()
    }

    /// Content hash used to pair tables with the model they were built for.
    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn config_text(&self) -> String {
        match &self.inner {
            ModelSpec::Lti(m) => m.to_config_text(),
            ModelSpec::Nonlinear(m) => m.to_config_text(),
        }
    }

    fn __repr__(&self) -> String {
        let kind = if self.inner.as_lti().is_some() { "lti" } else { "nonlinear" };
        format!("Model(kind={kind}, n={})", self.inner.n())
    }
}

/// A hypothesis set of candidate interaction graphs.
#[pyclass(frozen)]
#[derive(Clone)]
struct Family {
    inner: GraphFamily,
}

#[pymethods]
impl Family {
    /// Every graph on n vertices.
    #[staticmethod]
    fn all(n: usize) -> Self {
        Family { inner: GraphFamily::all(n) }
    }

    /// Every connected graph on n vertices.
    #[staticmethod]
    fn connected(n: usize) -> Self {
        Family { inner: GraphFamily::connected(n) }
    }

    /// Every spanning subgraph of `host`.
    #[staticmethod]
    fn subgraphs(host: &Graph) -> Self {
        Family { inner: GraphFamily::subgraphs_of(host.inner.clone()) }
    }

    /// Exactly these graphs.
    #[staticmethod]
    fn explicit(graphs: Vec<Graph>) -> PyResult<Self> {
        let gs = graphs.into_iter().map(|g| g.inner).collect();
        Ok(Family { inner: GraphFamily::explicit(gs).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn spec(&self) -> String {
        self.inner.spec_string()
    }

    /// Enumerate the members (errors out above `cap` graphs).
    #[pyo3(signature = (cap = DEFAULT_ENUMERATION_CAP))]
    fn members(&self, cap: u64) -> PyResult<Vec<Graph>> {
        let ms = self.inner.members(cap).map_err(err)?;
        Ok(ms.into_iter().map(|g| Graph { inner: g }).collect())
    }

    fn __repr__(&self) -> String {
        format!("Family({})", self.inner.spec_string())
    }
}

/// A designed constant input vector w.
#[pyclass(frozen, name = "IndicationVector")]
#[derive(Clone)]
struct PyIndication {
    inner: IndicationVector,
}

#[pymethods]
impl PyIndication {
    /// Seeded Gaussian draw, w = scale · z with z ~ N(0, I).
    #[staticmethod]
    #[pyo3(signature = (n, seed, scale = 1.0))]
    fn gaussian(n: usize, seed: u64, scale: f64) -> PyResult<Self> {
        Ok(PyIndication { inner: indication::gaussian_w(n, seed, scale).map_err(err)? })
    }

    /// Positional powers w = (1, M, …, M^(n−1)) with M sized so that one
    /// exact steady-state measurement identifies any member of `family`.
    #[staticmethod]
    fn radix(model: &Model, family: &Family) -> PyResult<Self> {
        let m = model
            .inner
            .as_lti()
            .ok_or_else(|| PyValueError::new_err("radix design requires an LTI model"))?;
        Ok(PyIndication { inner: indication::radix_w(&family.inner, m).map_err(err)? })
    }

    /// Wrap a hand-chosen vector (ints/floats/"p/q" strings).
    #[staticmethod]
    fn from_values(values: Vec<Bound<'_, PyAny>>) -> PyResult<Self> {
        Ok(PyIndication { inner: IndicationVector::from_exact(to_rats(values)?) })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn w(&self) -> Vec<f64> {
        self.inner.w.clone()
    }

    /// Exact entries as "p/q" strings, when the vector has them.
    #[getter]
    fn exact(&self) -> Option<Vec<String>> {
        self.inner.w_exact.as_deref().map(rats_to_strings)
    }

    #[getter]
    fn provenance(&self) -> &'static str {
        match self.inner.provenance {
            Provenance::Gaussian { .. } => "gaussian",
            Provenance::Radix { .. } => "radix",
            Provenance::Explicit => "explicit",
        }
    }

    /// (base M, numerator bound N, common denominator D) for radix vectors.
    #[getter]
    fn radix_params(&self) -> Option<(BigInt, BigInt, BigInt)> {
        match &self.inner.provenance {
            Provenance::Radix { m, n_bound, d } => {
                Some((m.clone(), n_bound.clone(), d.clone()))
            }
            _ => None,
        }
    }

    fn __repr__(&self) -> String {
        format!("IndicationVector({}, n={})", self.provenance(), self.inner.n())
    }
}

/// Steady-state lookup table over a family under one input vector.
#[pyclass(frozen, name = "Table")]
struct PyTable {
    inner: det::LookupTable,
}

#[pymethods]
impl PyTable {
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn model_fingerprint(&self) -> String {
        self.inner.model_fingerprint.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.entries.len()
    }

    /// Nearest-entry detection. Returns a dict with the winning graph,
    /// the distance to it, the margin to the runner-up, and whether the
    /// distance is inside the guaranteed ε/2 budget. An exact tie raises.
    fn detect<'py>(&self, py: Python<'py>, y: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let r = det::detect(&y, &self.inner).map_err(err)?;
        let out = PyDict::new_bound(py);
        out.set_item("graph", Graph { inner: r.graph }.into_py(py))?;
        out.set_item("distance", r.distance)?;
        out.set_item("margin", r.margin)?;
        out.set_item("confident", r.confident)?;
        Ok(out)
    }

    /// Serialize to the on-disk table format.
    fn to_text(&self) -> String {
        det::table_to_text(&self.inner)
    }

    /// Parse the on-disk table format, optionally insisting the table was
    /// built for a specific model fingerprint.
    #[staticmethod]
    #[pyo3(signature = (text, expect_fingerprint = None))]
    fn from_text(text: &str, expect_fingerprint: Option<&str>) -> PyResult<Self> {
        Ok(PyTable { inner: det::table_from_text(text, expect_fingerprint).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!(
            "Table(n={}, members={}, epsilon={:.6e})",
            self.inner.n,
            self.inner.entries.len(),
            self.inner.epsilon
        )
    }
}

/// Exactify a float vector entry-by-entry (every finite f64 is rational).
fn exactify(iv: &IndicationVector) -> PyResult<Vec<Rat>> {
    if let Some(ex) = &iv.w_exact {
        return Ok(ex.clone());
    }
    iv.w.iter()
        .map(|&v| rat_from_f64(v).ok_or_else(|| PyValueError::new_err("non-finite w entry")))
        .collect()
}

/// Solve the closed-loop steady state for one graph.
///
/// LTI models are solved in exact rational arithmetic (the dict then has a
/// `y_exact` list of "p/q" strings); anything else runs damped Newton to
/// `tol`. Returns {y, y_exact, residual_inf, tol}.
#[pyfunction]
#[pyo3(signature = (model, graph, w, tol = 1e-10))]
fn solve_steady_state<'py>(
    py: Python<'py>,
    model: &Model,
    graph: &Graph,
    w: &PyIndication,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let state = match &model.inner {
        ModelSpec::Lti(m) => {
            let w_exact = exactify(&w.inner)?;
            ss::solve_lti(&graph.inner, m, &w_exact).map_err(err)?
        }
        ModelSpec::Nonlinear(m) => {
            let opts = ss::NewtonOptions { tol, ..Default::default() };
            ss::solve_nonlinear(&graph.inner, m, &w.inner.w, &opts).map_err(err)?
        }
    };
    let out = PyDict::new_bound(py);
    out.set_item("y", state.y)?;
    out.set_item("y_exact", state.y_exact.as_deref().map(rats_to_strings))?;
    out.set_item("residual_inf", state.residual_inf)?;
    out.set_item("tol", state.tol)?;
    Ok(out)
}

/// Build the family's lookup table under `w`.
#[pyfunction]
#[pyo3(signature = (model, family, w, tol = 1e-10))]
fn build_table(model: &Model, family: &Family, w: &PyIndication, tol: f64) -> PyResult<PyTable> {
    let t = det::build_table(&family.inner, &model.inner, &w.inner, tol).map_err(err)?;
    Ok(PyTable { inner: t })
}

/// Shift all-integrator outputs to the zero-mean gauge the tables use.
/// A no-op for models with agent dynamics.
#[pyfunction]
fn gauge_align(model: &Model, y: Vec<f64>) -> Vec<f64> {
    sim::gauge_align(&model.inner.to_network(), &y)
}

fn reconstruction_dict<'py>(
    py: Python<'py>,
    r: det::Reconstruction,
) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new_bound(py);
    out.set_item("graph", Graph { inner: r.graph }.into_py(py))?;
    out.set_item("weights", rats_to_strings(&r.weights))?;
    out.set_item("decode_ops", r.decode_ops)?;
    out.set_item("solve_ops", r.solve_ops)?;
    Ok(out)
}

/// Recover graph and edge weights from one measured steady state under a
/// radix input. `claimed_err` is the caller's bound on the measurement
/// error; decoding refuses claims at or beyond the digit budget. Returns
/// {graph, weights, decode_ops, solve_ops}.
#[pyfunction]
#[pyo3(signature = (model, w, y, claimed_err = 1e-9))]
fn reconstruct_lti<'py>(
    py: Python<'py>,
    model: &Model,
    w: &PyIndication,
    y: Vec<f64>,
    claimed_err: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = model
        .inner
        .as_lti()
        .ok_or_else(|| PyValueError::new_err("reconstruction requires an LTI model"))?;
    let r = det::reconstruct_lti(&y, m, &w.inner, claimed_err).map_err(err)?;
    reconstruction_dict(py, r)
}

/// Exact-arithmetic reconstruction from "p/q"-string outputs.
#[pyfunction]
fn reconstruct_lti_exact<'py>(
    py: Python<'py>,
    model: &Model,
    w: &PyIndication,
    y: Vec<Bound<'_, PyAny>>,
) -> PyResult<Bound<'py, PyDict>> {
    let m = model
        .inner
        .as_lti()
        .ok_or_else(|| PyValueError::new_err("reconstruction requires an LTI model"))?;
    let y = to_rats(y)?;
    let r = det::reconstruct_lti_exact(&y, m, &w.inner).map_err(err)?;
    reconstruction_dict(py, r)
}

/// Smallest pairwise steady-state distance over the family under `w`.
/// Returns {epsilon, member_count, eps_sq_exact, closest_pair}.
#[pyfunction]
#[pyo3(signature = (model, family, w, tol = 1e-10))]
fn separation_index<'py>(
    py: Python<'py>,
    model: &Model,
    family: &Family,
    w: &PyIndication,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let report = match &model.inner {
        ModelSpec::Lti(m) => {
            let w_exact = exactify(&w.inner)?;
            indication::separation_index_lti(&w_exact, &family.inner, m).map_err(err)?
        }
        ModelSpec::Nonlinear(m) => {
            let opts = ss::NewtonOptions { tol, ..Default::default() };
            indication::separation_index_nonlinear(&w.inner.w, &family.inner, m, &opts)
                .map_err(err)?
        }
    };
    let out = PyDict::new_bound(py);
    out.set_item("epsilon", report.epsilon)?;
    out.set_item("member_count", report.member_count)?;
    out.set_item("eps_sq_exact", report.eps_sq_exact.as_ref().map(format_rat))?;
    let pair = report
        .argmin
        .map(|(a, b)| (Graph { inner: a }.into_py(py), Graph { inner: b }.into_py(py)));
    out.set_item("closest_pair", pair)?;
    Ok(out)
}

/// Digit-budget parameters for a family: (numerator bound N, common
/// denominator D, default base M).
#[pyfunction]
fn radix_bounds(model: &Model, family: &Family) -> PyResult<(BigInt, BigInt, BigInt)> {
    let m = model
        .inner
        .as_lti()
        .ok_or_else(|| PyValueError::new_err("radix bounds require an LTI model"))?;
    let (n_bound, d) = indication::radix_bounds(&family.inner, m).map_err(err)?;
    let base = indication::default_radix_base(&n_bound, &d);
    Ok((n_bound, d, base))
}

/// Fixed-step RK4 over [0, t_end] under constant input w (the closed loop
/// is driven so its steady state is the solver's). Returns {t, x, y} with
/// one row per recorded step; the endpoint is not certified as settled.
#[pyfunction]
#[pyo3(signature = (model, graph, w, t_end, x0 = None, h = 1e-3, record_every = 10))]
fn simulate<'py>(
    py: Python<'py>,
    model: &Model,
    graph: &Graph,
    w: &PyIndication,
    t_end: f64,
    x0: Option<Vec<f64>>,
    h: f64,
    record_every: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let net = model.inner.to_network();
    let drive: Vec<f64> = w.inner.w.iter().map(|v| -v).collect();
    let x0 = x0.unwrap_or_else(|| vec![0.0; net.n()]);
    let ctrl = sim::StepControl { h, record_every, ..Default::default() };
    let traj =
        sim::integrate(&net, &graph.inner, &drive, &x0, (0.0, t_end), &ctrl).map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("t", traj.t)?;
    out.set_item("x", traj.x)?;
    out.set_item("y", traj.y)?;
    Ok(out)
}

/// Integrate until the output rate and steady-state residual stay under
/// tolerance for a hold window, then cross-check against Newton. Returns
/// {converged, y, residual_inf, rate_inf, t_converged, newton_gap}.
#[pyfunction]
#[pyo3(signature = (model, graph, w, x0 = None, rate_tol = 1e-9, residual_tol = 1e-9,
                    hold = 1.0, max_time = 300.0, cross_check = true, h = 1e-3))]
#[allow(clippy::too_many_arguments)]
fn run_to_convergence<'py>(
    py: Python<'py>,
    model: &Model,
    graph: &Graph,
    w: &PyIndication,
    x0: Option<Vec<f64>>,
    rate_tol: f64,
    residual_tol: f64,
    hold: f64,
    max_time: f64,
    cross_check: bool,
    h: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let net = model.inner.to_network();
    let x0 = x0.unwrap_or_else(|| vec![0.0; net.n()]);
    let thresholds =
        sim::ConvergenceThresholds { rate_tol, residual_tol, hold, max_time, cross_check };
    let ctrl = sim::StepControl { h, ..Default::default() };
    let v = sim::run_to_convergence(&net, &graph.inner, &w.inner.w, &x0, &thresholds, &ctrl)
        .map_err(err)?;
    let out = PyDict::new_bound(py);
    out.set_item("converged", v.converged)?;
    out.set_item("y", v.y)?;
    out.set_item("residual_inf", v.residual_inf)?;
    out.set_item("rate_inf", v.rate_inf)?;
    out.set_item("t_converged", v.t_converged)?;
    out.set_item("newton_gap", v.newton_gap)?;
    Ok(out)
}

#[pymodule]
fn netident_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<Model>()?;
    m.add_class::<Family>()?;
    m.add_class::<PyIndication>()?;
    m.add_class::<PyTable>()?;
    m.add_function(wrap_pyfunction!(solve_steady_state, m)?)?;
    m.add_function(wrap_pyfunction!(build_table, m)?)?;
    m.add_function(wrap_pyfunction!(gauge_align, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_lti, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_lti_exact, m)?)?;
    m.add_function(wrap_pyfunction!(separation_index, m)?)?;
    m.add_function(wrap_pyfunction!(radix_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(run_to_convergence, m)?)?;
    Ok(())
}
