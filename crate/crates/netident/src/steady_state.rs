//! Steady states of the diffusively coupled closed loop.
//!
//! With every agent settled, the output y satisfies
//!
//! ```text
//! k⁻¹(y) + ℰ g(ℰᵀ y) = −w
//! ```
//!
//! For the linear family this is (A + ℰBℰᵀ) y = −w with A = diag(aᵢ) and
//! B the positive edge gains, and the steady-state map X sends w to
//! y = −X w. Two regimes:
//!
//! * some aᵢ > 0: A + ℰBℰᵀ is invertible and X is its exact inverse;
//! * all aᵢ = 0 (every agent a pure integrator): the map only exists on
//!   balanced inputs over a connected graph, and X is the Moore–Penrose
//!   pseudoinverse of the Laplacian, computed exactly as
//!   (L + 𝟙𝟙ᵀ/n)⁻¹ − 𝟙𝟙ᵀ/n. Outputs follow the zero-mean gauge 𝟙ᵀy = 0.
//!
//! Nonlinear models go through a damped Newton iteration on
//! G(y) = k⁻¹(y) + ℰ g(ℰᵀ y) + w, whose Jacobian
//! diag(k⁻¹′) + ℰ diag(g′) ℰᵀ is positive semidefinite wherever the model
//! validates, so the full step with backtracking is well behaved.

use crate::exact::{format_rat, invert_bareiss, rat_to_f64, ExactError, Rat, RatMat};
use crate::graph::{laplacian_rat, Graph};
use crate::models::{LtiNetworkModel, ModelError, NetworkModel};
use nalgebra::{DMatrix, DVector};
use num_traits::Zero;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("steady-state matrix A + EBE^T is singular for {0:?}")]
    SingularMap(Graph),
    #[error("all-integrator model requires a connected graph, got {0:?}")]
    DisconnectedAZero(Graph),
    #[error("all-integrator model requires a balanced input, but 1^T w = {0}")]
    BalanceViolated(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("Newton stopped after {iters} iterations with |G|_inf = {residual:e}")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("Newton line search found no decrease at iteration {iter}")]
    NoDecrease { iter: usize },
    #[error("Newton linear system is singular at iteration {iter}")]
    NumericalBreakdown { iter: usize },
}

/// Which regime a steady-state map was built in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SsKind {
    /// A ≠ 0: X = (A + ℰBℰᵀ)⁻¹ on all of ℝⁿ.
    ANonzero,
    /// A = 0: X = pinv(L); inputs are projected onto 𝟙⊥, outputs satisfy 𝟙ᵀy = 0.
    AZero,
}

/// The exact linear steady-state map of one (graph, model) pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SteadyStateMap {
    kind: SsKind,
    graph: Graph,
    x: RatMat,
}

impl SteadyStateMap {
    pub fn kind(&self) -> SsKind {
        self.kind
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn x(&self) -> &RatMat {
        &self.x
    }

    /// y = −X w, exactly. In the A = 0 regime X annihilates the consensus
    /// direction, so unbalanced inputs are implicitly projected onto 𝟙⊥.
    pub fn output_for(&self, w: &[Rat]) -> Vec<Rat> {
        self.x.mul_vec(w).into_iter().map(|v| -v).collect()
    }

    pub fn output_f64(&self, w: &[f64]) -> Vec<f64> {
        let xf = self.x.to_dmatrix();
        let wv = DVector::from_column_slice(w);
        (-(&xf * wv)).iter().copied().collect()
    }
}

/// Build the exact steady-state map X for one graph under a linear model.
pub fn build_x(g: &Graph, m: &LtiNetworkModel) -> Result<SteadyStateMap, SolveError> {
    if g.n() != m.n() {
        return Err(SolveError::Dimension(format!(
            "graph has n={}, model has n={}",
            g.n(),
            m.n()
        )));
    }
    let n = g.n();
    let l = laplacian_rat(g, &m.weights_for(g));
    if m.a_is_zero() {
        if !g.is_connected() {
            return Err(SolveError::DisconnectedAZero(g.clone()));
        }
        // pinv(L) = (L + J/n)^{-1} - J/n: the rank-one shift makes L
        // invertible along 𝟙 without touching it on 𝟙⊥.
        let jn = Rat::new(1.into(), (n as i64).into());
        let mut shifted = l.clone();
        for i in 0..n {
            for j in 0..n {
                shifted[(i, j)] += &jn;
            }
        }
        let mut x = invert_bareiss(&shifted).map_err(|e| match e {
            ExactError::Singular => SolveError::SingularMap(g.clone()),
            other => SolveError::Dimension(other.to_string()),
        })?;
        for i in 0..n {
            for j in 0..n {
                x[(i, j)] -= &jn;
            }
        }
        debug_assert!(pinv_invariants_hold(&x, &l));
        Ok(SteadyStateMap { kind: SsKind::AZero, graph: g.clone(), x })
    } else {
        let mut s = l;
        for (i, ai) in m.a().iter().enumerate() {
            s[(i, i)] += ai;
        }
        let x = invert_bareiss(&s).map_err(|e| match e {
            ExactError::Singular => SolveError::SingularMap(g.clone()),
            other => SolveError::Dimension(other.to_string()),
        })?;
        Ok(SteadyStateMap { kind: SsKind::ANonzero, graph: g.clone(), x })
    }
}

fn pinv_invariants_hold(x: &RatMat, l: &RatMat) -> bool {
    let n = l.rows();
    // X𝟙 = 0 and X·L = I − J/n, the projector onto 𝟙⊥.
    let ones = vec![Rat::from_integer(1.into()); n];
    if x.mul_vec(&ones).iter().any(|v| !v.is_zero()) {
        return false;
    }
    let xl = x.mul(l);
    let jn = Rat::new(1.into(), (n as i64).into());
    (0..n).all(|i| {
        (0..n).all(|j| {
            let want = if i == j { Rat::from_integer(1.into()) - &jn } else { -jn.clone() };
            xl[(i, j)] == want
        })
    })
}

/// A solved steady state: the output, and the equation residual certifying it.
#[derive(Clone, Debug)]
pub struct SteadyState {
    pub graph: Graph,
    pub w: Vec<f64>,
    pub y: Vec<f64>,
    /// Exact output, present on the linear path.
    pub y_exact: Option<Vec<Rat>>,
    /// k⁻¹(y) + ℰ g(ℰᵀ y) + w, component-wise, at the returned y.
    pub residual: Vec<f64>,
    pub residual_inf: f64,
    /// Tolerance the solve promised (0 on the exact path).
    pub tol: f64,
}

/// Solve the linear steady-state equation exactly.
///
/// In the all-integrator regime the graph must be connected and w balanced
/// (𝟙ᵀw = 0); the returned output is the zero-mean representative. The
/// residual of the exact path is identically zero — asserted, not rounded.
pub fn solve_lti(g: &Graph, m: &LtiNetworkModel, w: &[Rat]) -> Result<SteadyState, SolveError> {
    if w.len() != m.n() {
        return Err(SolveError::Dimension(format!(
            "w has {} entries, model has n={}",
            w.len(),
            m.n()
        )));
    }
    if m.a_is_zero() {
        let total: Rat = w.iter().sum();
        if !total.is_zero() {
            return Err(SolveError::BalanceViolated(format_rat(&total)));
        }
    }
    let map = build_x(g, m)?;
    let y_exact = map.output_for(w);

    // Certificate: plug y back into (A + L) y + w and demand exact zero.
    // (In the A = 0 regime the map kills any consensus component of w, so
    // this only closes because w was checked balanced above.)
    let l = laplacian_rat(g, &m.weights_for(g));
    let mut residual_exact = l.mul_vec(&y_exact);
    for i in 0..m.n() {
        residual_exact[i] += &m.a()[i] * &y_exact[i] + &w[i];
        assert!(
            residual_exact[i].is_zero(),
            "exact steady state failed its own certificate at agent {i}"
        );
    }

    let n = m.n();
    Ok(SteadyState {
        graph: g.clone(),
        w: w.iter().map(rat_to_f64).collect(),
        y: y_exact.iter().map(rat_to_f64).collect(),
        y_exact: Some(y_exact),
        residual: vec![0.0; n],
        residual_inf: 0.0,
        tol: 0.0,
    })
}

/// G(y) = k⁻¹(y) + ℰ g(ℰᵀ y) + w, the quantity a steady state zeroes.
pub fn residual_f64(
    g: &Graph,
    m: &NetworkModel,
    y: &[f64],
    w: &[f64],
) -> Result<Vec<f64>, ModelError> {
    let mut out = m.k_inv_all(y)?;
    for &(i, j) in g.edges() {
        let mu = m.controller(i, j).g.eval(y[i] - y[j])?;
        out[i] += mu;
        out[j] -= mu;
    }
    for (oi, wi) in out.iter_mut().zip(w) {
        *oi += wi;
    }
    Ok(out)
}

fn jacobian(
    g: &Graph,
    m: &NetworkModel,
    y: &[f64],
) -> Result<DMatrix<f64>, ModelError> {
    let n = y.len();
    let mut jac = DMatrix::zeros(n, n);
    for (i, di) in m.k_inv_deriv_all(y)?.into_iter().enumerate() {
        jac[(i, i)] = di;
    }
    for &(i, j) in g.edges() {
        let c = m.controller(i, j).g.deriv(y[i] - y[j])?;
        jac[(i, i)] += c;
        jac[(j, j)] += c;
        jac[(i, j)] -= c;
        jac[(j, i)] -= c;
    }
    Ok(jac)
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    /// Convergence threshold on ‖G(y)‖∞.
    pub tol: f64,
    pub max_iter: usize,
    /// Halvings allowed per line search before giving up.
    pub max_backtrack: u32,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-10, max_iter: 200, max_backtrack: 60 }
    }
}

/// Damped Newton solve of the steady-state equation for a general model.
pub fn solve_nonlinear(
    g: &Graph,
    m: &NetworkModel,
    w: &[f64],
    opts: &NewtonOptions,
) -> Result<SteadyState, SolveError> {
    solve_nonlinear_traced(g, m, w, opts, &mut |_| {})
}

/// Same as [`solve_nonlinear`] but reports every accepted iterate, starting
/// with y₀ — used to audit solver-level invariants such as Jacobian
/// semidefiniteness along the path.
pub fn solve_nonlinear_traced(
    g: &Graph,
    m: &NetworkModel,
    w: &[f64],
    opts: &NewtonOptions,
    on_iterate: &mut dyn FnMut(&[f64]),
) -> Result<SteadyState, SolveError> {
    let n = m.n();
    if g.n() != n || w.len() != n {
        return Err(SolveError::Dimension(format!(
            "graph n={}, model n={}, |w|={}",
            g.n(),
            n,
            w.len()
        )));
    }
    let all_integrator = m.is_all_integrator();
    if all_integrator {
        if !g.is_connected() {
            return Err(SolveError::DisconnectedAZero(g.clone()));
        }
        let total: f64 = w.iter().sum();
        let scale = 1.0 + w.iter().map(|v| v.abs()).sum::<f64>();
        if total.abs() > opts.tol * scale {
            return Err(SolveError::BalanceViolated(format!("{total:e}")));
        }
    }

    let mut y = vec![0.0; n];
    on_iterate(&y);
    let mut res = residual_f64(g, m, &y, w)?;
    let mut res_sq: f64 = res.iter().map(|r| r * r).sum();

    for iter in 0..opts.max_iter {
        let res_inf = res.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
        if res_inf <= opts.tol {
            return Ok(SteadyState {
                graph: g.clone(),
                w: w.to_vec(),
                y: if all_integrator { center(&y) } else { y },
                y_exact: None,
                residual_inf: res.iter().fold(0.0f64, |a, r| a.max(r.abs())),
                residual: res,
                tol: opts.tol,
            });
        }

        let mut jac = jacobian(g, m, &y)?;
        if all_integrator {
            // G lives in 𝟙⊥ here (balanced w), and so does the Newton
            // direction once the consensus direction is pinned: solving
            // (J + 𝟙𝟙ᵀ/n) d = −G keeps iterates zero-mean exactly.
            let shift = 1.0 / n as f64;
            for i in 0..n {
                for j in 0..n {
                    jac[(i, j)] += shift;
                }
            }
        }
        let rhs = DVector::from_iterator(n, res.iter().map(|r| -r));
        let d = jac
            .lu()
            .solve(&rhs)
            .ok_or(SolveError::NumericalBreakdown { iter })?;

        // Backtracking on ½‖G‖²: never accept a step that increases it;
        // a step that walks out of some k⁻¹ domain is rejected the same way.
        let mut t = 1.0f64;
        let mut accepted = None;
        for _ in 0..=opts.max_backtrack {
            let trial: Vec<f64> = y.iter().zip(d.iter()).map(|(yi, di)| yi + t * di).collect();
            if let Ok(trial_res) = residual_f64(g, m, &trial, w) {
                let trial_sq: f64 = trial_res.iter().map(|r| r * r).sum();
                if trial_sq <= res_sq * (1.0 - 1e-4 * t) || trial_sq < opts.tol * opts.tol {
                    accepted = Some((trial, trial_res, trial_sq));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((ny, nres, nsq)) = accepted else {
            return Err(SolveError::NoDecrease { iter });
        };
        y = ny;
        res = nres;
        res_sq = nsq;
        on_iterate(&y);
    }

    let res_inf = res.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    if res_inf <= opts.tol {
        return Ok(SteadyState {
            graph: g.clone(),
            w: w.to_vec(),
            y: if all_integrator { center(&y) } else { y },
            y_exact: None,
            residual_inf: res_inf,
            residual: res,
            tol: opts.tol,
        });
    }
    Err(SolveError::NonConvergence { iters: opts.max_iter, residual: res_inf })
}

fn center(y: &[f64]) -> Vec<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| v - mean).collect()
}
