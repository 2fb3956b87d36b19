//! Agent and controller behaviours.
//!
//! An agent is a SISO system whose constant-input steady state is described
//! by a monotone relation: feed it a constant v and its output settles at
//! y = k(v), equivalently k⁻¹(y) = v. A controller is a strictly increasing
//! static function g acting on an output difference. The linear family
//! (k⁻¹(y) = aᵢ·y with aᵢ ≥ 0 rational, g(ζ) = b·ζ with b > 0 rational) is
//! kept exact; the neural preset (leaky integration with a tanh readout) is
//! the standing nonlinear example.
//!
//! Model config files use one line per agent / per pair, and a `*` wildcard
//! as a default that specific lines override:
//!
//! ```text
//! n=3
//! agent 1: lti a=1/2
//! agent 2: neural tau=0.75
//! agent *: lti a=1
//! ctrl 1 2: fn tanh 0.5 2
//! ctrl *: lti b=1/10
//! ```

use crate::exact::{format_rat, parse_rat, rat_to_f64, Rat};
use crate::graph::{pair_at, pair_count, pair_index};
use crate::textio::fmt_f64;
use num_traits::Zero;
use sha2::{Digest, Sha256};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("agent {0} has negative rate a = {1}")]
    NegativeA(usize, String),
    #[error("controller for pair ({0}, {1}) has non-positive gain")]
    NonpositiveGain(usize, usize),
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("input {x} outside the open domain ({lo}, {hi})")]
    OutsideDomain { x: f64, lo: f64, hi: f64 },
    #[error("{what} is not {requirement} near x = {x}")]
    NotMonotone { what: String, requirement: &'static str, x: f64 },
    #[error("agent {0} is not specified")]
    MissingAgent(usize),
    #[error("controller for pair ({0}, {1}) is not specified")]
    MissingController(usize, usize),
    #[error("unknown controller builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("model config: {0}")]
    Parse(String),
}

/// Scalar function with an analytic derivative and an open domain.
#[derive(Clone)]
pub struct ScalarFn {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    lo: f64,
    hi: f64,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn(domain ({}, {}))", self.lo, self.hi)
    }
}

impl ScalarFn {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> ScalarFn {
        ScalarFn { f: Arc::new(f), df: Arc::new(df), lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn with_domain(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lo: f64,
        hi: f64,
    ) -> ScalarFn {
        ScalarFn { f: Arc::new(f), df: Arc::new(df), lo, hi }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn eval(&self, x: f64) -> Result<f64, ModelError> {
        if !self.contains(x) {
            return Err(ModelError::OutsideDomain { x, lo: self.lo, hi: self.hi });
        }
        Ok((self.f)(x))
    }

    pub fn deriv(&self, x: f64) -> Result<f64, ModelError> {
        if !self.contains(x) {
            return Err(ModelError::OutsideDomain { x, lo: self.lo, hi: self.hi });
        }
        Ok((self.df)(x))
    }
}

/// State dynamics ẋ = f(x) + u + w with readout y = h(x), for simulation.
#[derive(Clone, Debug)]
pub struct AgentDynamics {
    pub f: ScalarFn,
    pub h: ScalarFn,
}

/// One agent: its steady-state relation k⁻¹, and (optionally) dynamics to
/// simulate. `integrator` marks the relation k⁻¹ ≡ 0, which needs special
/// handling everywhere a steady state is pinned down only up to the
/// consensus direction.
#[derive(Clone, Debug)]
pub struct AgentModel {
    pub k_inv: ScalarFn,
    pub dynamics: Option<AgentDynamics>,
    pub integrator: bool,
    descriptor: String,
}

impl AgentModel {
    /// Linear agent with rate a ≥ 0: k⁻¹(y) = a·y. a = 0 is a pure
    /// integrator (ẋ = u + w, y = x); a > 0 realises ẋ = −a·x + u + w, y = x.
    pub fn lti(a: &Rat) -> Result<AgentModel, ModelError> {
        if a < &Rat::zero() {
            return Err(ModelError::NegativeA(0, format_rat(a)));
        }
        let af = rat_to_f64(a);
        let integrator = a.is_zero();
        let identity = || ScalarFn::new(|x| x, |_| 1.0);
        Ok(AgentModel {
            k_inv: ScalarFn::new(move |y| af * y, move |_| af),
            dynamics: Some(AgentDynamics {
                f: ScalarFn::new(move |x| -af * x, move |_| -af),
                h: identity(),
            }),
            integrator,
            descriptor: format!("lti a={}", format_rat(a)),
        })
    }

    /// Leaky neural agent: ẋ = −x/τ + u + w, y = tanh(x), hence
    /// k⁻¹(y) = atanh(y)/τ on the open interval |y| < 1 − 1e−12.
    pub fn neural(tau: f64) -> Result<AgentModel, ModelError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ModelError::Parse(format!("neural tau must be positive, got {tau}")));
        }
        let lim = 1.0 - 1e-12;
        Ok(AgentModel {
            k_inv: ScalarFn::with_domain(
                move |y| y.atanh() / tau,
                move |y| 1.0 / (tau * (1.0 - y * y)),
                -lim,
                lim,
            ),
            dynamics: Some(AgentDynamics {
                f: ScalarFn::new(move |x| -x / tau, move |_| -1.0 / tau),
                h: ScalarFn::new(|x| x.tanh(), |x| 1.0 - x.tanh().powi(2)),
            }),
            integrator: false,
            descriptor: format!("neural tau={}", fmt_f64(tau)),
        })
    }

    /// Arbitrary agent. `descriptor` is the stable identity used for
    /// fingerprints; config files cannot reconstruct custom closures.
    pub fn custom(
        k_inv: ScalarFn,
        dynamics: Option<AgentDynamics>,
        integrator: bool,
        descriptor: impl Into<String>,
    ) -> AgentModel {
        AgentModel { k_inv, dynamics, integrator, descriptor: descriptor.into() }
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }
}

/// One controller: a strictly increasing coupling function g.
#[derive(Clone, Debug)]
pub struct ControllerModel {
    pub g: ScalarFn,
    descriptor: String,
}

impl ControllerModel {
    /// Exact linear coupling g(ζ) = b·ζ, b > 0 rational.
    pub fn lti(b: &Rat) -> Result<ControllerModel, ModelError> {
        if b <= &Rat::zero() {
            return Err(ModelError::NonpositiveGain(0, 0));
        }
        let bf = rat_to_f64(b);
        Ok(ControllerModel {
            g: ScalarFn::new(move |z| bf * z, move |_| bf),
            descriptor: format!("lti b={}", format_rat(b)),
        })
    }

    /// Named nonlinear builtins for config files:
    /// `linear <b>`, `tanh <gain> <scale>`, `cubic <b> <c>`.
    pub fn builtin(name: &str, params: &[f64]) -> Result<ControllerModel, ModelError> {
        let descriptor = format!(
            "fn {name} {}",
            params.iter().map(|p| fmt_f64(*p)).collect::<Vec<_>>().join(" ")
        );
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let g = match (name, params) {
            ("linear", &[b]) if positive(b) => ScalarFn::new(move |z| b * z, move |_| b),
            ("tanh", &[gain, scale]) if positive(gain) && positive(scale) => ScalarFn::new(
                move |z| gain * (scale * z).tanh(),
                move |z| gain * scale * (1.0 - (scale * z).tanh().powi(2)),
            ),
            ("cubic", &[b, c]) if positive(b) && c >= 0.0 && c.is_finite() => ScalarFn::new(
                move |z| b * z + c * z.powi(3),
                move |z| b + 3.0 * c * z * z,
            ),
            ("linear", _) | ("tanh", _) | ("cubic", _) => {
                return Err(ModelError::Parse(format!("bad parameters for builtin `{name}`")))
            }
            _ => return Err(ModelError::UnknownBuiltin(name.to_string())),
        };
        Ok(ControllerModel { g, descriptor })
    }

    pub fn custom(g: ScalarFn, descriptor: impl Into<String>) -> ControllerModel {
        ControllerModel { g, descriptor: descriptor.into() }
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }
}

/// The exact linear network model: rates aᵢ ≥ 0 and, because the graph is
/// unknown, a coupling gain b_ij > 0 for every unordered pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LtiNetworkModel {
    n: usize,
    a: Vec<Rat>,
    b: Vec<Rat>, // pair-indexed, length C(n,2)
}

impl LtiNetworkModel {
    pub fn new(a: Vec<Rat>, b: Vec<Rat>) -> Result<LtiNetworkModel, ModelError> {
        let n = a.len();
        if n == 0 {
            return Err(ModelError::Parse("need at least one agent".into()));
        }
        if b.len() != pair_count(n) {
            return Err(ModelError::WrongLength { expected: pair_count(n), got: b.len() });
        }
        for (i, ai) in a.iter().enumerate() {
            if ai < &Rat::zero() {
                return Err(ModelError::NegativeA(i, format_rat(ai)));
            }
        }
        for (t, bt) in b.iter().enumerate() {
            if bt <= &Rat::zero() {
                let (i, j) = pair_at(n, t);
                return Err(ModelError::NonpositiveGain(i, j));
            }
        }
        Ok(LtiNetworkModel { n, a, b })
    }

    pub fn uniform(n: usize, a: Rat, b: Rat) -> Result<LtiNetworkModel, ModelError> {
        LtiNetworkModel::new(vec![a; n], vec![b; pair_count(n)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &[Rat] {
        &self.a
    }

    /// True when every rate is zero — the all-integrator regime, where the
    /// steady-state map lives on the zero-mean subspace.
    pub fn a_is_zero(&self) -> bool {
        self.a.iter().all(|ai| ai.is_zero())
    }

    pub fn b_at(&self, i: usize, j: usize) -> &Rat {
        &self.b[pair_index(self.n, i.min(j), i.max(j))]
    }

    pub fn b_pairs(&self) -> &[Rat] {
        &self.b
    }

    /// Edge weights for a specific graph, in its canonical edge order.
    pub fn weights_for(&self, g: &crate::graph::Graph) -> Vec<Rat> {
        g.edges().iter().map(|&(i, j)| self.b_at(i, j).clone()).collect()
    }

    /// Behavioural form of this model (for simulation and the Newton solver).
    pub fn to_network(&self) -> NetworkModel {
        let agents = self.a.iter().map(|ai| AgentModel::lti(ai).unwrap()).collect();
        let controllers = self.b.iter().map(|bt| ControllerModel::lti(bt).unwrap()).collect();
        NetworkModel::new(agents, controllers).expect("linear models are monotone")
    }

    pub fn to_config_text(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for (i, ai) in self.a.iter().enumerate() {
            s.push_str(&format!("agent {}: lti a={}\n", i + 1, format_rat(ai)));
        }
        for (t, bt) in self.b.iter().enumerate() {
            let (i, j) = pair_at(self.n, t);
            s.push_str(&format!("ctrl {} {}: lti b={}\n", i + 1, j + 1, format_rat(bt)));
        }
        s
    }

    pub fn fingerprint(&self) -> String {
        fingerprint_of(&self.to_config_text())
    }
}

/// A fully specified network: one agent per vertex, one controller per
/// unordered pair. Constructed through [`NetworkModel::new`], which probes
/// monotonicity; invalid behaviours never circulate.
#[derive(Clone, Debug)]
pub struct NetworkModel {
    n: usize,
    agents: Vec<AgentModel>,
    controllers: Vec<ControllerModel>, // pair-indexed
}

/// Probe grid used by validation: 401 points spanning [−10, 10].
pub const PROBE_POINTS: usize = 401;
pub const PROBE_RANGE: (f64, f64) = (-10.0, 10.0);

impl NetworkModel {
    pub fn new(
        agents: Vec<AgentModel>,
        controllers: Vec<ControllerModel>,
    ) -> Result<NetworkModel, ModelError> {
        let n = agents.len();
        if n == 0 {
            return Err(ModelError::Parse("need at least one agent".into()));
        }
        if controllers.len() != pair_count(n) {
            return Err(ModelError::WrongLength {
                expected: pair_count(n),
                got: controllers.len(),
            });
        }
        let model = NetworkModel { n, agents, controllers };
        model.validate()?;
        Ok(model)
    }

    /// The standing nonlinear example: leaky neural agents with a shared
    /// linear coupling gain b > 0 on every pair.
    pub fn neural(taus: &[f64], b: f64) -> Result<NetworkModel, ModelError> {
        let agents = taus.iter().map(|&t| AgentModel::neural(t)).collect::<Result<_, _>>()?;
        let controllers = (0..pair_count(taus.len()))
            .map(|_| ControllerModel::builtin("linear", &[b]))
            .collect::<Result<_, _>>()?;
        NetworkModel::new(agents, controllers)
    }

    /// Monotonicity validation on the probe grid: every k⁻¹ nondecreasing,
    /// every g strictly increasing. A coupling that saturates so hard that
    /// consecutive probe values collide in f64 is rejected — at working
    /// precision it is observationally non-increasing.
    pub fn validate(&self) -> Result<(), ModelError> {
        let grid: Vec<f64> = (0..PROBE_POINTS)
            .map(|k| {
                PROBE_RANGE.0
                    + (PROBE_RANGE.1 - PROBE_RANGE.0) * k as f64 / (PROBE_POINTS - 1) as f64
            })
            .collect();
        for (i, agent) in self.agents.iter().enumerate() {
            let mut prev: Option<(f64, f64)> = None;
            for &x in &grid {
                if !agent.k_inv.contains(x) {
                    continue;
                }
                let fx = agent.k_inv.eval(x)?;
                if let Some((px, pfx)) = prev {
                    if !(fx >= pfx) {
                        return Err(ModelError::NotMonotone {
                            what: format!("agent {i} k_inv"),
                            requirement: "nondecreasing",
                            x: px,
                        });
                    }
                }
                prev = Some((x, fx));
            }
        }
        for (t, ctrl) in self.controllers.iter().enumerate() {
            let (i, j) = pair_at(self.n, t);
            let mut prev: Option<(f64, f64)> = None;
            for &x in &grid {
                if !ctrl.g.contains(x) {
                    continue;
                }
                let gx = ctrl.g.eval(x)?;
                if let Some((px, pgx)) = prev {
                    if !(gx > pgx) {
                        return Err(ModelError::NotMonotone {
                            what: format!("controller ({}, {}) g", i + 1, j + 1),
                            requirement: "strictly increasing",
                            x: px,
                        });
                    }
                }
                prev = Some((x, gx));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn agent(&self, i: usize) -> &AgentModel {
        &self.agents[i]
    }

    pub fn agents(&self) -> &[AgentModel] {
        &self.agents
    }

    pub fn controller(&self, i: usize, j: usize) -> &ControllerModel {
        &self.controllers[pair_index(self.n, i.min(j), i.max(j))]
    }

    pub fn is_all_integrator(&self) -> bool {
        self.agents.iter().all(|a| a.integrator)
    }

    pub fn has_dynamics(&self) -> bool {
        self.agents.iter().all(|a| a.dynamics.is_some())
    }

    /// k⁻¹ applied component-wise; fails if any yᵢ leaves its agent's domain.
    pub fn k_inv_all(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        if y.len() != self.n {
            return Err(ModelError::WrongLength { expected: self.n, got: y.len() });
        }
        y.iter().zip(&self.agents).map(|(&yi, a)| a.k_inv.eval(yi)).collect()
    }

    pub fn k_inv_deriv_all(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        if y.len() != self.n {
            return Err(ModelError::WrongLength { expected: self.n, got: y.len() });
        }
        y.iter().zip(&self.agents).map(|(&yi, a)| a.k_inv.deriv(yi)).collect()
    }

    pub fn to_config_text(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for (i, a) in self.agents.iter().enumerate() {
            s.push_str(&format!("agent {}: {}\n", i + 1, a.descriptor));
        }
        for (t, c) in self.controllers.iter().enumerate() {
            let (i, j) = pair_at(self.n, t);
            s.push_str(&format!("ctrl {} {}: {}\n", i + 1, j + 1, c.descriptor));
        }
        s
    }

    /// Stable identity for table validation: models match iff their
    /// canonical config text matches.
    pub fn fingerprint(&self) -> String {
        fingerprint_of(&self.to_config_text())
    }
}

pub fn fingerprint_of(canonical_text: &str) -> String {
    format!("{:x}", Sha256::digest(canonical_text.as_bytes()))
}

/// A parsed model config: exact linear if every line is `lti`, behavioural
/// otherwise.
#[derive(Clone, Debug)]
pub enum ModelSpec {
    Lti(LtiNetworkModel),
    Nonlinear(NetworkModel),
}

impl ModelSpec {
    pub fn n(&self) -> usize {
        match self {
            ModelSpec::Lti(m) => m.n(),
            ModelSpec::Nonlinear(m) => m.n(),
        }
    }

    pub fn as_lti(&self) -> Option<&LtiNetworkModel> {
        match self {
            ModelSpec::Lti(m) => Some(m),
            ModelSpec::Nonlinear(_) => None,
        }
    }

    pub fn to_network(&self) -> NetworkModel {
        match self {
            ModelSpec::Lti(m) => m.to_network(),
            ModelSpec::Nonlinear(m) => m.clone(),
        }
    }

    pub fn fingerprint(&self) -> String {
        match self {
            ModelSpec::Lti(m) => m.fingerprint(),
            ModelSpec::Nonlinear(m) => m.fingerprint(),
        }
    }
}

#[derive(Clone, Debug)]
enum AgentSpec {
    Lti(Rat),
    Neural(f64),
}

#[derive(Clone, Debug)]
enum CtrlSpec {
    Lti(Rat),
    Builtin(String, Vec<f64>),
}

/// Parse a model config (see the module header for the format).
pub fn parse_model_config(text: &str) -> Result<ModelSpec, ModelError> {
    let mut n_decl: Option<usize> = None;
    let mut agent_specs: Vec<(usize, AgentSpec)> = Vec::new();
    let mut agent_default: Option<AgentSpec> = None;
    let mut ctrl_specs: Vec<((usize, usize), CtrlSpec)> = Vec::new();
    let mut ctrl_default: Option<CtrlSpec> = None;
    let mut max_index = 0usize;

    let bad = |lineno: usize, msg: String| ModelError::Parse(format!("line {}: {msg}", lineno + 1));

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("n=") {
            n_decl = Some(
                rest.trim().parse().map_err(|_| bad(lineno, format!("bad n `{line}`")))?,
            );
            continue;
        }
        let (head, body) = line
            .split_once(':')
            .ok_or_else(|| bad(lineno, format!("expected `agent …:` or `ctrl …:`, got `{line}`")))?;
        let head_parts: Vec<&str> = head.split_whitespace().collect();
        let body = body.trim();
        match head_parts.as_slice() {
            ["agent", idx] => {
                let spec = parse_agent_spec(body).map_err(|m| bad(lineno, m))?;
                if *idx == "*" {
                    agent_default = Some(spec);
                } else {
                    let i: usize =
                        idx.parse().map_err(|_| bad(lineno, format!("bad agent index `{idx}`")))?;
                    if i == 0 {
                        return Err(bad(lineno, "agents are 1-based".into()));
                    }
                    max_index = max_index.max(i);
                    agent_specs.push((i - 1, spec));
                }
            }
            ["ctrl", "*"] | ["ctrl", "*", "*"] => {
                ctrl_default = Some(parse_ctrl_spec(body).map_err(|m| bad(lineno, m))?);
            }
            ["ctrl", a, b] => {
                let spec = parse_ctrl_spec(body).map_err(|m| bad(lineno, m))?;
                let parse_v = |s: &str| -> Result<usize, ModelError> {
                    let v: usize =
                        s.parse().map_err(|_| bad(lineno, format!("bad vertex `{s}`")))?;
                    if v == 0 {
                        return Err(bad(lineno, "vertices are 1-based".into()));
                    }
                    Ok(v)
                };
                let (i, j) = (parse_v(a)?, parse_v(b)?);
                if i == j {
                    return Err(bad(lineno, format!("ctrl pair ({i}, {j}) is a self loop")));
                }
                max_index = max_index.max(i).max(j);
                ctrl_specs.push(((i.min(j) - 1, i.max(j) - 1), spec));
            }
            _ => return Err(bad(lineno, format!("unrecognised line `{line}`"))),
        }
    }

    let n = match n_decl {
        Some(n) if n == 0 => return Err(ModelError::Parse("n must be at least 1".into())),
        Some(n) => {
            if max_index > n {
                return Err(ModelError::Parse(format!(
                    "index {max_index} exceeds declared n={n}"
                )));
            }
            n
        }
        None if max_index > 0 => max_index,
        None => return Err(ModelError::Parse("cannot infer n: add an n= line".into())),
    };

    // Resolve: specific lines first, wildcard fills the rest.
    let mut agents: Vec<Option<AgentSpec>> = vec![None; n];
    for (i, spec) in agent_specs {
        if agents[i].is_some() {
            return Err(ModelError::Parse(format!("agent {} specified twice", i + 1)));
        }
        agents[i] = Some(spec);
    }
    for slot in agents.iter_mut() {
        if slot.is_none() {
            *slot = agent_default.clone();
        }
    }
    let mut ctrls: Vec<Option<CtrlSpec>> = vec![None; pair_count(n)];
    for ((i, j), spec) in ctrl_specs {
        if j >= n {
            return Err(ModelError::Parse(format!("pair ({}, {}) out of range", i + 1, j + 1)));
        }
        let t = pair_index(n, i, j);
        if ctrls[t].is_some() {
            return Err(ModelError::Parse(format!("ctrl {} {} specified twice", i + 1, j + 1)));
        }
        ctrls[t] = Some(spec);
    }
    for slot in ctrls.iter_mut() {
        if slot.is_none() {
            *slot = ctrl_default.clone();
        }
    }

    let agents: Vec<AgentSpec> = agents
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or(ModelError::MissingAgent(i + 1)))
        .collect::<Result<_, _>>()?;
    let ctrls: Vec<CtrlSpec> = ctrls
        .into_iter()
        .enumerate()
        .map(|(t, s)| {
            s.ok_or_else(|| {
                let (i, j) = pair_at(n, t);
                ModelError::MissingController(i + 1, j + 1)
            })
        })
        .collect::<Result<_, _>>()?;

    let all_lti = agents.iter().all(|a| matches!(a, AgentSpec::Lti(_)))
        && ctrls.iter().all(|c| matches!(c, CtrlSpec::Lti(_)));
    if all_lti {
        let a = agents
            .into_iter()
            .map(|s| match s {
                AgentSpec::Lti(a) => a,
                AgentSpec::Neural(_) => unreachable!(),
            })
            .collect();
        let b = ctrls
            .into_iter()
            .map(|s| match s {
                CtrlSpec::Lti(b) => b,
                CtrlSpec::Builtin(..) => unreachable!(),
            })
            .collect();
        return Ok(ModelSpec::Lti(LtiNetworkModel::new(a, b)?));
    }

    let agents = agents
        .into_iter()
        .map(|s| match s {
            AgentSpec::Lti(a) => AgentModel::lti(&a),
            AgentSpec::Neural(tau) => AgentModel::neural(tau),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let controllers = ctrls
        .into_iter()
        .map(|s| match s {
            CtrlSpec::Lti(b) => ControllerModel::lti(&b),
            CtrlSpec::Builtin(name, params) => ControllerModel::builtin(&name, &params),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ModelSpec::Nonlinear(NetworkModel::new(agents, controllers)?))
}

fn parse_agent_spec(body: &str) -> Result<AgentSpec, String> {
    let parts: Vec<&str> = body.split_whitespace().collect();
    match parts.as_slice() {
        ["lti", kv] => {
            let v = kv.strip_prefix("a=").ok_or_else(|| format!("expected a=<p/q>, got `{kv}`"))?;
            Ok(AgentSpec::Lti(parse_rat(v).map_err(|e| e.to_string())?))
        }
        ["neural", kv] => {
            let v = kv
                .strip_prefix("tau=")
                .ok_or_else(|| format!("expected tau=<real>, got `{kv}`"))?;
            let tau: f64 = v.parse().map_err(|_| format!("bad tau `{v}`"))?;
            Ok(AgentSpec::Neural(tau))
        }
        _ => Err(format!("expected `lti a=<p/q>` or `neural tau=<real>`, got `{body}`")),
    }
}

fn parse_ctrl_spec(body: &str) -> Result<CtrlSpec, String> {
    let parts: Vec<&str> = body.split_whitespace().collect();
    match parts.as_slice() {
        ["lti", kv] => {
            let v = kv.strip_prefix("b=").ok_or_else(|| format!("expected b=<p/q>, got `{kv}`"))?;
            Ok(CtrlSpec::Lti(parse_rat(v).map_err(|e| e.to_string())?))
        }
        ["fn", name, rest @ ..] => {
            let params = rest
                .iter()
                .map(|p| p.parse::<f64>().map_err(|_| format!("bad parameter `{p}`")))
                .collect::<Result<Vec<f64>, _>>()?;
            Ok(CtrlSpec::Builtin((*name).to_string(), params))
        }
        _ => Err(format!("expected `lti b=<p/q>` or `fn <name> <params>`, got `{body}`")),
    }
}
