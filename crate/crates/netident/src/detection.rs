//! Identifying the graph from a measured steady-state output.
//!
//! Two routes, matching the two model classes:
//!
//! * **Lookup table** (any validated model): precompute y_𝒢 for every
//!   family member under one indication vector, then classify a
//!   measurement by nearest entry. A measurement within ε/2 of the truth
//!   can only be nearest to the true graph, so `confident` results carry a
//!   guarantee, not a hope.
//! * **Radix reconstruction** (rational LTI models): under
//!   w = (1, M, …, M^(n−1)) each agent's output is a base-M encoding of
//!   its own row of the steady-state map X. Decode rows independently
//!   (each needs only its own y_i plus the public constants M, N, D),
//!   assemble X, invert it exactly, and read the Laplacian — graph and
//!   edge weights — off the result. No enumeration of the family at
//!   detection time.
//!
//! Lookup tables persist to a plain-text file so the expensive part can be
//! done offline; loads refuse a table whose model fingerprint does not
//! match the model presented at detection time.

use crate::exact::{
    invert_gauss_jordan_counted, rat_from_f64, rat_to_f64, round_to_bigint, ExactError, Rat,
    RatMat,
};
use crate::graph::{graph_from_laplacian_rat, Graph, GraphError, GraphFamily};
use crate::indication::{
    family_members_for_model, min_pairwise_exact, min_pairwise_f64, IndicationError,
    IndicationVector, Provenance,
};
use crate::models::{LtiNetworkModel, ModelSpec, NetworkModel};
use crate::steady_state::{build_x, solve_nonlinear, NewtonOptions, SolveError};
use crate::textio::{fmt_f64, fmt_number, parse_f64, parse_number, Number};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("D·R + offset = {0} is not an integer; the denominator bound D does not cover this row")]
    NotInteger(String),
    #[error("scaled total {0} is negative; the numerator bound N does not cover this row")]
    NegativeTotal(BigInt),
    #[error("digit {index} is {digit}, outside [0, {max}]; the bounds do not cover this row")]
    DigitOutOfRange { index: usize, digit: BigInt, max: BigInt },
    #[error("row does not fit in {expected} base-M digits (leftover {leftover})")]
    TooManyDigits { expected: usize, leftover: BigInt },
}

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error(transparent)]
    Family(#[from] GraphError),
    #[error(transparent)]
    Indication(#[from] IndicationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("w does not separate the family: graphs {g:?} and {h:?} share a steady state (epsilon = {epsilon})")]
    NotSeparating { g: Graph, h: Graph, epsilon: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("measurement is exactly equidistant (distance {distance}) from two table entries; refusing to guess")]
    Tie { distance: f64 },
    #[error("claimed measurement error {claimed:e} is not below the digit-rounding margin {margin:e}")]
    MeasurementTooNoisy { claimed: f64, margin: f64 },
    #[error("reconstruction needs a radix indication vector; this one is {0}")]
    NotRadix(String),
    #[error("decoded X is singular; the rows are mutually inconsistent")]
    SingularX,
    #[error("decoded X is not symmetric at ({0}, {1}); measurement does not come from this model class")]
    AsymmetricX(usize, usize),
    #[error("decoded X does not annihilate the consensus direction (row {0}); not an all-integrator steady-state map")]
    NotCentered(usize),
    #[error("table file: {0}")]
    BadTableFormat(String),
    #[error("table was built for model fingerprint {expected}, but the presented model has {found}")]
    FingerprintMismatch { expected: String, found: String },
}

/// Precomputed steady-state outputs for every graph in a family.
#[derive(Clone, Debug)]
pub struct LookupTable {
    pub n: usize,
    pub family_spec: String,
    pub model_fingerprint: String,
    /// Solve tolerance the entries were computed to (0 on the exact path).
    pub tol: f64,
    pub w: Vec<f64>,
    pub w_exact: Option<Vec<Rat>>,
    /// Separation index of the table; +∞ for a single-entry family.
    pub epsilon: f64,
    pub eps_sq_exact: Option<Rat>,
    pub entries: Vec<TableEntry>,
}

#[derive(Clone, Debug)]
pub struct TableEntry {
    pub graph: Graph,
    pub y: Vec<f64>,
    pub y_exact: Option<Vec<Rat>>,
}

/// What detection concluded, and how much room the conclusion has.
#[derive(Clone, Debug)]
pub struct DetectionResult {
    pub graph: Graph,
    /// Euclidean distance from the measurement to the winning entry.
    pub distance: f64,
    /// Gap to the runner-up (+∞ for a single-entry table).
    pub margin: f64,
    /// distance < ε/2: the measurement is inside the guaranteed budget,
    /// so no other family member can be the truth.
    pub confident: bool,
}

/// Build the lookup table for a family under one input vector.
///
/// LTI models with an exact w are solved in rational arithmetic and the
/// table's ε is exact; everything else goes through the Newton solver at
/// `tol`. A table whose ε vanishes — exactly zero on the exact path, or
/// below 10·tol on the solved path — is rejected with the colliding pair,
/// because detection against it could never be trusted.
pub fn build_table(
    family: &GraphFamily,
    model: &ModelSpec,
    w: &IndicationVector,
    tol: f64,
) -> Result<LookupTable, DetectionError> {
    if w.n() != model.n() {
        return Err(DetectionError::Dimension(format!(
            "w has {} entries, model has n={}",
            w.n(),
            model.n()
        )));
    }
    match (model, &w.w_exact) {
        (ModelSpec::Lti(m), Some(w_exact)) => build_table_exact(family, m, w, w_exact),
        _ => build_table_solved(family, &model.to_network(), w, model.fingerprint(), tol),
    }
}

fn build_table_exact(
    family: &GraphFamily,
    m: &LtiNetworkModel,
    iv: &IndicationVector,
    w_exact: &[Rat],
) -> Result<LookupTable, DetectionError> {
    let members = family_members_for_model(family, m)?;
    if members.is_empty() {
        return Err(IndicationError::EmptyFamily.into());
    }
    let outputs: Vec<Vec<Rat>> = members
        .par_iter()
        .map(|g| Ok(build_x(g, m)?.output_for(w_exact)))
        .collect::<Result<_, SolveError>>()?;
    let report = min_pairwise_exact(&members, &outputs);
    if let Some(e2) = &report.eps_sq_exact {
        if e2.is_zero() {
            let (g, h) = report.argmin.expect("zero epsilon needs a pair");
            return Err(DetectionError::NotSeparating { g, h, epsilon: 0.0 });
        }
    }
    let entries = members
        .into_iter()
        .zip(outputs)
        .map(|(graph, y_exact)| TableEntry {
            y: y_exact.iter().map(rat_to_f64).collect(),
            y_exact: Some(y_exact),
            graph,
        })
        .collect();
    Ok(LookupTable {
        n: m.n(),
        family_spec: family.spec_string(),
        model_fingerprint: m.fingerprint(),
        tol: 0.0,
        w: iv.w.clone(),
        w_exact: Some(w_exact.to_vec()),
        epsilon: report.epsilon,
        eps_sq_exact: report.eps_sq_exact,
        entries,
    })
}

fn build_table_solved(
    family: &GraphFamily,
    m: &NetworkModel,
    iv: &IndicationVector,
    fingerprint: String,
    tol: f64,
) -> Result<LookupTable, DetectionError> {
    let members: Vec<Graph> = if m.is_all_integrator() {
        family
            .members(crate::graph::DEFAULT_ENUMERATION_CAP)?
            .into_iter()
            .filter(Graph::is_connected)
            .collect()
    } else {
        family.members(crate::graph::DEFAULT_ENUMERATION_CAP)?
    };
    if members.is_empty() {
        return Err(IndicationError::EmptyFamily.into());
    }
    let opts = NewtonOptions { tol, ..NewtonOptions::default() };
    let outputs: Vec<Vec<f64>> = members
        .par_iter()
        .map(|g| Ok(solve_nonlinear(g, m, &iv.w, &opts)?.y))
        .collect::<Result<_, SolveError>>()?;
    let report = min_pairwise_f64(&members, &outputs);
    // Below 10·tol the "separation" is indistinguishable from solver noise.
    if report.member_count > 1 && report.epsilon <= 10.0 * tol {
        let (g, h) = report.argmin.expect("pair exists");
        return Err(DetectionError::NotSeparating { g, h, epsilon: report.epsilon });
    }
    let entries = members
        .into_iter()
        .zip(outputs)
        .map(|(graph, y)| TableEntry { graph, y, y_exact: None })
        .collect();
    Ok(LookupTable {
        n: m.n(),
        family_spec: family.spec_string(),
        model_fingerprint: fingerprint,
        tol,
        w: iv.w.clone(),
        w_exact: iv.w_exact.clone(),
        epsilon: report.epsilon,
        eps_sq_exact: None,
        entries,
    })
}

/// Nearest-entry classification of a measured output.
///
/// An exact tie between two entries is an error — the ε/2 guarantee cannot
/// hold at a tie, and picking a side would silently mask a measurement
/// problem. Anything short of a tie returns the nearest graph along with
/// the evidence (`distance`, `margin`, `confident`).
pub fn detect(y: &[f64], table: &LookupTable) -> Result<DetectionResult, DetectionError> {
    if y.len() != table.n {
        return Err(DetectionError::Dimension(format!(
            "measurement has {} entries, table has n={}",
            y.len(),
            table.n
        )));
    }
    if table.entries.is_empty() {
        return Err(DetectionError::BadTableFormat("table has no entries".into()));
    }
    let mut best: Option<(f64, usize)> = None;
    let mut second = f64::INFINITY;
    for (idx, entry) in table.entries.iter().enumerate() {
        let d2: f64 = y.iter().zip(&entry.y).map(|(a, b)| (a - b) * (a - b)).sum();
        match best {
            None => best = Some((d2, idx)),
            Some((bd, _)) if d2 < bd => {
                second = bd;
                best = Some((d2, idx));
            }
            Some(_) => {
                if d2 < second {
                    second = d2;
                }
            }
        }
    }
    let (best_sq, best_idx) = best.expect("nonempty table");
    if best_sq == second {
        return Err(DetectionError::Tie { distance: best_sq.sqrt() });
    }
    let distance = best_sq.sqrt();
    Ok(DetectionResult {
        graph: table.entries[best_idx].graph.clone(),
        distance,
        margin: second.sqrt() - distance,
        confident: distance < table.epsilon / 2.0,
    })
}

/// Decode one row of X from its scalar radix encoding R = row·w, exactly.
///
/// With w = (1, M, …, M^(n−1)), every entry p/q of the row (q | D, |p| ≤ N)
/// contributes one base-M digit of the shifted integer
/// T = D·R + Σᵢ N·D·Mⁱ, namely dᵢ = D·rowᵢ + N·D ∈ [0, 2ND]. Extracting n
/// digits and undoing the shift returns the row; any violation of the digit
/// structure is reported as the specific bound that failed.
pub fn radix_decode_row(
    r: &Rat,
    base: &BigInt,
    n_bound: &BigInt,
    d: &BigInt,
    n: usize,
) -> Result<Vec<Rat>, DecodeError> {
    let shifted = Rat::from_integer(d.clone()) * r + Rat::from_integer(radix_offset(base, n_bound, d, n));
    if !shifted.denom().is_one() {
        return Err(DecodeError::NotInteger(crate::exact::format_rat(&shifted)));
    }
    decode_digits(shifted.numer().clone(), base, n_bound, d, n)
}

fn radix_offset(base: &BigInt, n_bound: &BigInt, d: &BigInt, n: usize) -> BigInt {
    // Σ_{i<n} N·D·M^i
    let nd = n_bound * d;
    let mut total = BigInt::zero();
    let mut p = BigInt::one();
    for _ in 0..n {
        total += &nd * &p;
        p *= base;
    }
    total
}

fn decode_digits(
    mut t: BigInt,
    base: &BigInt,
    n_bound: &BigInt,
    d: &BigInt,
    n: usize,
) -> Result<Vec<Rat>, DecodeError> {
    if t.is_negative() {
        return Err(DecodeError::NegativeTotal(t));
    }
    let nd = n_bound * d;
    let max_digit = BigInt::from(2) * &nd;
    let mut row = Vec::with_capacity(n);
    for index in 0..n {
        let digit = &t % base;
        t /= base;
        if digit > max_digit {
            return Err(DecodeError::DigitOutOfRange { index, digit, max: max_digit });
        }
        row.push(Rat::new(digit - &nd, d.clone()));
    }
    if !t.is_zero() {
        return Err(DecodeError::TooManyDigits { expected: n, leftover: t });
    }
    Ok(row)
}

/// The absolute error in a single measured output entry that the decode's
/// final rounding absorbs: anything strictly below 1/(2D) leaves every
/// digit intact.
pub fn decode_margin_abs(d: &BigInt) -> f64 {
    0.5 / rat_to_f64(&Rat::from_integer(d.clone()))
}

/// The same budget as a relative error against the largest input component
/// M^(n−1) — the honest yardstick when the measurement error scales with
/// the signal, as convergence error does. Underflows to 0 for bases too
/// large for f64, where only exact measurements can be decoded.
pub fn decode_margin_relative(base: &BigInt, d: &BigInt, n: usize) -> f64 {
    let top = Rat::from_integer(base.pow(n.saturating_sub(1) as u32));
    decode_margin_abs(d) / rat_to_f64(&top)
}

/// Decode one row from a measured (f64) output entry: rationalize the
/// measurement exactly, shift, round once to the nearest integer, then
/// extract digits. Sound whenever the measurement error is below
/// [`decode_margin_abs`].
pub fn decode_x_row_measured(
    y_i: f64,
    base: &BigInt,
    n_bound: &BigInt,
    d: &BigInt,
    n: usize,
) -> Result<Vec<Rat>, DecodeError> {
    let r = rat_from_f64(-y_i)
        .ok_or_else(|| DecodeError::NotInteger(format!("non-finite measurement {y_i}")))?;
    let shifted =
        Rat::from_integer(d.clone()) * r + Rat::from_integer(radix_offset(base, n_bound, d, n));
    decode_digits(round_to_bigint(&shifted), base, n_bound, d, n)
}

/// Everything a radix reconstruction produced, including its cost.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub graph: Graph,
    /// Recovered edge weights, aligned with `graph.edges()`.
    pub weights: Vec<Rat>,
    pub x: RatMat,
    pub laplacian: RatMat,
    /// Base-M digit extractions performed (n per row, n² total).
    pub decode_ops: u64,
    /// Row-operation units spent inverting X.
    pub solve_ops: u64,
    pub wall: std::time::Duration,
}

fn radix_params(iv: &IndicationVector) -> Result<(&BigInt, &BigInt, &BigInt), DetectionError> {
    match &iv.provenance {
        Provenance::Radix { m, n_bound, d } => Ok((m, n_bound, d)),
        Provenance::Gaussian { .. } => Err(DetectionError::NotRadix("gaussian".into())),
        Provenance::Explicit => Err(DetectionError::NotRadix("explicit".into())),
    }
}

/// Reconstruct graph and weights from an exact steady-state output.
pub fn reconstruct_lti_exact(
    y: &[Rat],
    m: &LtiNetworkModel,
    iv: &IndicationVector,
) -> Result<Reconstruction, DetectionError> {
    let rows = decode_rows(iv, m, |base, n_bound, d, n| {
        y.par_iter()
            .map(|yi| radix_decode_row(&(-yi), base, n_bound, d, n))
            .collect::<Result<Vec<_>, _>>()
    })?;
    assemble(rows, m)
}

/// Reconstruct graph and weights from a measured (f64) steady-state
/// output with a caller-declared error bound.
///
/// `claimed_err` is the caller's bound on the per-entry measurement error.
/// Zero means exact; otherwise it must sit strictly below the conservative
/// margin [`decode_margin_relative`]·M^(n−1) = 1/(2D) — callers whose error
/// genuinely scales with the signal should compare against the relative
/// margin themselves before trusting a decode of the high-order entries.
pub fn reconstruct_lti(
    y: &[f64],
    m: &LtiNetworkModel,
    iv: &IndicationVector,
    claimed_err: f64,
) -> Result<Reconstruction, DetectionError> {
    {
        let (_, _, d) = radix_params(iv)?;
        let margin = decode_margin_abs(d);
        if claimed_err != 0.0 && !(claimed_err.abs() < margin) {
            return Err(DetectionError::MeasurementTooNoisy {
                claimed: claimed_err.abs(),
                margin,
            });
        }
    }
    // All-integrator outputs carry a gauge constant that depends on the
    // initial condition; strip it by centering, since the true output is
    // zero-mean.
    let centered: Vec<f64>;
    let y = if m.a_is_zero() {
        let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
        centered = y.iter().map(|v| v - mean).collect();
        &centered[..]
    } else {
        y
    };
    let rows = decode_rows(iv, m, |base, n_bound, d, n| {
        y.par_iter()
            .map(|&yi| decode_x_row_measured(yi, base, n_bound, d, n))
            .collect::<Result<Vec<_>, _>>()
    })?;
    assemble(rows, m)
}

fn decode_rows<F>(
    iv: &IndicationVector,
    m: &LtiNetworkModel,
    decode: F,
) -> Result<(Vec<Vec<Rat>>, u64), DetectionError>
where
    F: FnOnce(&BigInt, &BigInt, &BigInt, usize) -> Result<Vec<Vec<Rat>>, DecodeError>,
{
    let (base, n_bound, d) = radix_params(iv)?;
    let n = m.n();
    if iv.n() != n {
        return Err(DetectionError::Dimension(format!(
            "w has {} entries, model has n={}",
            iv.n(),
            n
        )));
    }
    let rows = decode(base, n_bound, d, n)?;
    Ok((rows, (n * n) as u64))
}

fn assemble(
    (rows, decode_ops): (Vec<Vec<Rat>>, u64),
    m: &LtiNetworkModel,
) -> Result<Reconstruction, DetectionError> {
    let started = Instant::now();
    let n = m.n();
    let x = RatMat::from_rows(rows);
    for i in 0..n {
        for j in (i + 1)..n {
            if x[(i, j)] != x[(j, i)] {
                return Err(DetectionError::AsymmetricX(i, j));
            }
        }
    }
    let (laplacian, solve_ops) = if m.a_is_zero() {
        // X = pinv(L): check X𝟙 = 0, then undo the pseudoinverse through
        // the same rank-one shift used to build it.
        let jn = Rat::new(BigInt::one(), BigInt::from(n as i64));
        for i in 0..n {
            let row_sum: Rat = (0..n).map(|j| x[(i, j)].clone()).sum();
            if !row_sum.is_zero() {
                return Err(DetectionError::NotCentered(i));
            }
        }
        let mut shifted = x.clone();
        for i in 0..n {
            for j in 0..n {
                shifted[(i, j)] += &jn;
            }
        }
        let (mut l, ops) = invert_gauss_jordan_counted(&shifted).map_err(|e| match e {
            ExactError::Singular => DetectionError::SingularX,
            other => DetectionError::Dimension(other.to_string()),
        })?;
        for i in 0..n {
            for j in 0..n {
                l[(i, j)] -= &jn;
            }
        }
        (l, ops)
    } else {
        let (s, ops) = invert_gauss_jordan_counted(&x).map_err(|e| match e {
            ExactError::Singular => DetectionError::SingularX,
            other => DetectionError::Dimension(other.to_string()),
        })?;
        // S = A + L, so the Laplacian is S with the known rates removed.
        let mut l = s;
        for (i, ai) in m.a().iter().enumerate() {
            l[(i, i)] -= ai;
        }
        (l, ops)
    };
    let (graph, weights) = graph_from_laplacian_rat(&laplacian)?;
    Ok(Reconstruction {
        graph,
        weights,
        x,
        laplacian,
        decode_ops,
        solve_ops,
        wall: started.elapsed(),
    })
}

const TABLE_MAGIC: &str = "netident-table v1";

/// Render a table to its on-disk text form.
pub fn table_to_text(t: &LookupTable) -> String {
    let mut out = String::new();
    out.push_str(TABLE_MAGIC);
    out.push('\n');
    out.push_str(&format!("n={}\n", t.n));
    out.push_str(&format!("family={}\n", t.family_spec));
    out.push_str(&format!("model_fingerprint={}\n", t.model_fingerprint));
    out.push_str(&format!("tol={}\n", fmt_f64(t.tol)));
    if t.epsilon.is_finite() {
        out.push_str(&format!("epsilon={}\n", fmt_f64(t.epsilon)));
    } else {
        out.push_str("epsilon=inf\n");
    }
    if let Some(e2) = &t.eps_sq_exact {
        out.push_str(&format!("eps_sq={}\n", crate::exact::format_rat(e2)));
    }
    let w_line: Vec<String> = match &t.w_exact {
        Some(ws) => ws.iter().map(|v| fmt_number(&Number::from_rat(v.clone()))).collect(),
        None => t.w.iter().map(|&v| fmt_f64(v)).collect(),
    };
    out.push_str(&format!("w={}\n", w_line.join(" ")));
    for entry in &t.entries {
        let ys: Vec<String> = match &entry.y_exact {
            Some(ys) => ys.iter().map(|v| fmt_number(&Number::from_rat(v.clone()))).collect(),
            None => entry.y.iter().map(|&v| fmt_f64(v)).collect(),
        };
        out.push_str(&format!("entry {} {}\n", entry.graph.key_bits(), ys.join(" ")));
    }
    out
}

/// Parse a table file. When `expect_fingerprint` is given, a table built
/// for a different model is refused — stale tables must never classify.
pub fn table_from_text(
    text: &str,
    expect_fingerprint: Option<&str>,
) -> Result<LookupTable, DetectionError> {
    let bad = |msg: &str| DetectionError::BadTableFormat(msg.to_string());
    let mut lines = text.lines();
    // Tools may stamp provenance comments above the header; skip them.
    let first = lines.by_ref().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    if first != Some(TABLE_MAGIC) {
        return Err(bad("missing header line"));
    }
    let mut n: Option<usize> = None;
    let mut family_spec = String::new();
    let mut fingerprint = String::new();
    let mut tol: Option<f64> = None;
    let mut epsilon: Option<f64> = None;
    let mut eps_sq: Option<Rat> = None;
    let mut w: Option<Vec<Number>> = None;
    let mut entries: Vec<TableEntry> = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("entry ") {
            let n = n.ok_or_else(|| bad("entry before n="))?;
            let mut parts = rest.split_whitespace();
            let key = parts.next().ok_or_else(|| bad("entry without key"))?;
            let graph = Graph::from_key_bits(n, key)?;
            let nums: Vec<Number> =
                parts.map(parse_number).collect::<Result<_, _>>().map_err(|e| {
                    DetectionError::BadTableFormat(format!("entry value: {e}"))
                })?;
            if nums.len() != n {
                return Err(bad("entry with wrong output length"));
            }
            let y: Vec<f64> = nums.iter().map(|v| v.value).collect();
            let y_exact: Option<Vec<Rat>> = nums
                .iter()
                .map(|v| v.exact.clone())
                .collect::<Option<Vec<_>>>();
            entries.push(TableEntry { graph, y, y_exact });
        } else if let Some(v) = line.strip_prefix("n=") {
            n = Some(v.parse().map_err(|_| bad("bad n="))?);
        } else if let Some(v) = line.strip_prefix("family=") {
            family_spec = v.to_string();
        } else if let Some(v) = line.strip_prefix("model_fingerprint=") {
            fingerprint = v.to_string();
        } else if let Some(v) = line.strip_prefix("tol=") {
            tol = Some(parse_f64(v).map_err(|e| DetectionError::BadTableFormat(e.to_string()))?);
        } else if let Some(v) = line.strip_prefix("epsilon=") {
            epsilon = Some(if v == "inf" {
                f64::INFINITY
            } else {
                parse_f64(v).map_err(|e| DetectionError::BadTableFormat(e.to_string()))?
            });
        } else if let Some(v) = line.strip_prefix("eps_sq=") {
            eps_sq = Some(
                crate::exact::parse_rat(v)
                    .map_err(|e| DetectionError::BadTableFormat(e.to_string()))?,
            );
        } else if let Some(v) = line.strip_prefix("w=") {
            w = Some(
                v.split_whitespace()
                    .map(parse_number)
                    .collect::<Result<_, _>>()
                    .map_err(|e| DetectionError::BadTableFormat(format!("w: {e}")))?,
            );
        } else {
            return Err(DetectionError::BadTableFormat(format!("unrecognized line: {line}")));
        }
    }
    let n = n.ok_or_else(|| bad("missing n="))?;
    let w = w.ok_or_else(|| bad("missing w="))?;
    if w.len() != n {
        return Err(bad("w length does not match n"));
    }
    if fingerprint.is_empty() {
        return Err(bad("missing model_fingerprint="));
    }
    if let Some(expected) = expect_fingerprint {
        if expected != fingerprint {
            return Err(DetectionError::FingerprintMismatch {
                expected: expected.to_string(),
                found: fingerprint,
            });
        }
    }
    if entries.is_empty() {
        return Err(bad("table has no entries"));
    }
    Ok(LookupTable {
        n,
        family_spec,
        model_fingerprint: fingerprint,
        tol: tol.ok_or_else(|| bad("missing tol="))?,
        epsilon: epsilon.ok_or_else(|| bad("missing epsilon="))?,
        eps_sq_exact: eps_sq,
        w: w.iter().map(|v| v.value).collect(),
        w_exact: w.iter().map(|v| v.exact.clone()).collect::<Option<Vec<_>>>(),
        entries,
    })
}
