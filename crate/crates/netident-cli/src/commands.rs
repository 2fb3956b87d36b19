//! One function per subcommand. Each builds a canonical description of its
//! effective inputs (content hashes, never paths), stamps every artifact
//! with the resulting config hash, and maps library errors onto the exit
//! contract: 0 confident/success, 2 ambiguous, 3 decode failure, 1 config.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use netident::detection::{
    build_table, decode_margin_abs, decode_margin_relative, detect, reconstruct_lti,
    reconstruct_lti_exact, table_from_text, table_to_text, DetectionError, DetectionResult,
    LookupTable, Reconstruction,
};
use netident::exact::format_rat;
use netident::graph::Graph;
use netident::indication::{
    gaussian_w, radix_w, radix_w_with_base, separation_index_lti, separation_index_nonlinear,
    IndicationVector, Provenance,
};
use netident::models::{fingerprint_of, ModelSpec};
use netident::simulation::{
    gauge_align, integrate, run_scenario, run_to_convergence_recorded, trajectory_to_csv,
    ConvergenceThresholds, StepControl, Trajectory,
};
use netident::steady_state::{solve_lti, solve_nonlinear, NewtonOptions, SteadyState};
use num_bigint::BigInt;
use serde_json::json;

use crate::files::{
    config_hash, exactify, json_numbers, parse_family, parse_model, parse_scenario, parse_w_file,
    parse_y_file, preamble, read_graph, read_text, render_w_file, render_y_file, write_artifact,
    TOOL,
};
use crate::Outcome;

fn load_model(path: &Path) -> Result<(ModelSpec, String)> {
    let text = read_text(path)?;
    let spec = parse_model(&text).with_context(|| format!("parsing model {}", path.display()))?;
    Ok((spec, text))
}

fn sha(text: &str) -> String {
    fingerprint_of(text)
}

fn zeros(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

fn parse_x0(s: Option<&str>, n: usize) -> Result<Vec<f64>> {
    match s {
        None => Ok(zeros(n)),
        Some(s) => {
            let vals: Vec<f64> = s
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| anyhow!("x0: cannot parse `{t}`")))
                .collect::<Result<_>>()?;
            if vals.len() != n {
                bail!("x0 has {} entries, model has n={n}", vals.len());
            }
            Ok(vals)
        }
    }
}

/// Errors that mean "the digits could not be read", as opposed to a
/// misconfigured run.
fn is_decode_failure(e: &DetectionError) -> bool {
    matches!(
        e,
        DetectionError::Decode(_)
            | DetectionError::MeasurementTooNoisy { .. }
            | DetectionError::SingularX
            | DetectionError::AsymmetricX(..)
    )
}

fn detection_json(r: &DetectionResult, table: &LookupTable, cfg: &str) -> serde_json::Value {
    json!({
        "tool": TOOL,
        "config": cfg,
        "verdict": if r.confident { "confident" } else { "ambiguous" },
        "graph_key": r.graph.key_bits(),
        "graph": r.graph.to_string(),
        "distance": r.distance,
        "margin": r.margin,
        "epsilon": table.epsilon,
        "confident": r.confident,
    })
}

fn reconstruction_json(rec: &Reconstruction, cfg: &str) -> serde_json::Value {
    let edges: Vec<serde_json::Value> = rec
        .graph
        .edges()
        .iter()
        .zip(&rec.weights)
        .map(|(&(i, j), wt)| json!({ "i": i + 1, "j": j + 1, "weight": format_rat(wt) }))
        .collect();
    json!({
        "tool": TOOL,
        "config": cfg,
        "verdict": "recovered",
        "graph_key": rec.graph.key_bits(),
        "graph": rec.graph.to_string(),
        "edges": edges,
        "decode_ops": rec.decode_ops,
        "solve_ops": rec.solve_ops,
    })
}

fn write_json(path: &Path, record: &serde_json::Value) -> Result<PathBuf> {
    write_artifact(path, &format!("{record:#}\n"))
}

// ---------------------------------------------------------------------
// gen-w
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WMode {
    /// Seeded standard-normal entries scaled by --scale.
    Gaussian,
    /// Exact powers of a base chosen from the family's digit bounds.
    Radix,
}

#[derive(Args, Debug)]
pub struct GenWArgs {
    #[arg(long, value_enum)]
    pub mode: WMode,
    /// Number of agents (gaussian mode).
    #[arg(long)]
    pub n: Option<usize>,
    /// RNG seed (gaussian mode).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scale factor on the draw (gaussian mode).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Model file (radix mode; must be lti).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Candidate family: all:N, connected:N, subgraphs:FILE, or a file of graphs (radix mode).
    #[arg(long)]
    pub family: Option<String>,
    /// Override the radix base M (must satisfy M > (2N+1)D).
    #[arg(long)]
    pub base: Option<String>,
    /// Where to write the w file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn gen_w(a: &GenWArgs) -> Result<Outcome> {
    match a.mode {
        WMode::Gaussian => {
            let n = a.n.ok_or_else(|| anyhow!("--mode gaussian needs --n"))?;
            let seed = a.seed.ok_or_else(|| anyhow!("--mode gaussian needs --seed"))?;
            let iv = gaussian_w(n, seed, a.scale)?;
            let canon = format!("gen-w\nmode=gaussian\nn={n}\nseed={seed}\nscale={:e}\n", a.scale);
            let path = write_artifact(&a.out, &render_w_file(&iv, &config_hash(&canon)))?;
            println!(
                "wrote gaussian w (n={n}, seed={seed}, scale={}) to {}",
                a.scale,
                path.display()
            );
        }
        WMode::Radix => {
            let model_path =
                a.model.as_ref().ok_or_else(|| anyhow!("--mode radix needs --model"))?;
            let family_spec =
                a.family.as_ref().ok_or_else(|| anyhow!("--mode radix needs --family"))?;
            let (spec, m_text) = load_model(model_path)?;
            let m = spec
                .as_lti()
                .ok_or_else(|| anyhow!("radix design needs an exact linear (lti) model"))?;
            let family = parse_family(family_spec, Path::new("."))?;
            let iv = match &a.base {
                Some(b) => {
                    let base: BigInt =
                        b.parse().map_err(|_| anyhow!("--base: `{b}` is not an integer"))?;
                    radix_w_with_base(&family, m, base)?
                }
                None => radix_w(&family, m)?,
            };
            let Provenance::Radix { m: base, n_bound, d } = &iv.provenance else {
                unreachable!("radix_w always returns radix provenance")
            };
            let canon = format!(
                "gen-w\nmode=radix\nfamily={}\nmodel_sha={}\nbase={base}\n",
                family.spec_string(),
                sha(&m_text)
            );
            let abs = decode_margin_abs(d);
            let rel = decode_margin_relative(base, d, m.n());
            let path = write_artifact(&a.out, &render_w_file(&iv, &config_hash(&canon)))?;
            println!("wrote radix w to {}", path.display());
            println!("base M = {base}  (numerator bound N = {n_bound}, common denominator D = {d})");
            println!("per-agent measurement budget: |error| < 1/(2D) = {abs:.4e}");
            println!("relative to the largest component M^(n-1): {rel:.4e}");
            if base.pow(m.n().saturating_sub(1) as u32) > BigInt::from(1u64 << 53) {
                eprintln!(
                    "warning: the largest component exceeds 2^53; f64 measurements cannot \
                     carry the digits — decode from exact outputs only"
                );
            }
        }
    }
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------
// solve-ss
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SolveSsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub w: PathBuf,
    /// Newton tolerance on the residual (nonlinear models).
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Write the output vector here (printed to stdout otherwise).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Append-style CSV row: graph key, outputs, residual.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Full record with exact "p/q" strings when available.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Insist on the exact path (error for non-lti models).
    #[arg(long)]
    pub exact: bool,
}

pub fn solve_ss(a: &SolveSsArgs) -> Result<Outcome> {
    let (spec, m_text) = load_model(&a.model)?;
    let g = read_graph(&a.graph)?;
    let w_text = read_text(&a.w)?;
    let iv = parse_w_file(&w_text)?;
    let canon = format!(
        "solve-ss\nmodel_sha={}\ngraph={}\nw_sha={}\ntol={:e}\n",
        sha(&m_text),
        g.key_bits(),
        sha(&w_text),
        a.tol
    );
    let cfg = config_hash(&canon);

    let ss: SteadyState = match &spec {
        ModelSpec::Lti(m) => solve_lti(&g, m, &exactify(&iv.w, &iv.w_exact)?)?,
        ModelSpec::Nonlinear(m) => {
            if a.exact {
                bail!("--exact requires an lti model; this one has nonlinear parts");
            }
            solve_nonlinear(&g, m, &iv.w, &NewtonOptions { tol: a.tol, ..Default::default() })?
        }
    };

    let method = if ss.y_exact.is_some() { "exact-lti" } else { "newton" };
    println!("steady state of {g} ({method}), residual_inf = {:.4e}", ss.residual_inf);
    let notes = vec![
        format!("source=solve-ss method={method}"),
        format!("graph_key={}", g.key_bits()),
        format!("residual_inf={:.17e}", ss.residual_inf),
    ];
    let y_text = render_y_file(&ss.y, ss.y_exact.as_deref(), &cfg, &notes);
    match &a.out {
        Some(p) => {
            let path = write_artifact(p, &y_text)?;
            println!("wrote y to {}", path.display());
        }
        None => {
            for (i, v) in ss.y.iter().enumerate() {
                match &ss.y_exact {
                    Some(ex) => println!("y{} = {} = {v:.6}", i + 1, format_rat(&ex[i])),
                    None => println!("y{} = {v:.17e}", i + 1),
                }
            }
        }
    }
    if let Some(p) = &a.csv {
        let mut s = preamble("steady-csv", &cfg, None);
        s += "graph_key";
        for i in 1..=g.n() {
            s += &format!(",y{i}");
        }
        s += ",residual_inf\n";
        s += &g.key_bits();
        for v in &ss.y {
            s += &format!(",{}", netident::textio::fmt_f64(*v));
        }
        s += &format!(",{}\n", netident::textio::fmt_f64(ss.residual_inf));
        let path = write_artifact(p, &s)?;
        println!("wrote CSV to {}", path.display());
    }
    if let Some(p) = &a.json {
        let record = json!({
            "tool": TOOL,
            "config": cfg,
            "graph_key": g.key_bits(),
            "graph": g.to_string(),
            "n": g.n(),
            "method": method,
            "y": json_numbers(&ss.y, ss.y_exact.as_deref()),
            "y_f64": ss.y,
            "residual_inf": ss.residual_inf,
            "tol": ss.tol,
        });
        let path = write_json(p, &record)?;
        println!("wrote record to {}", path.display());
    }
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub w: PathBuf,
    /// Initial state, space-separated (default: all zeros).
    #[arg(long)]
    pub x0: Option<String>,
    /// Integrate exactly to this time.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Integrate until the output settles and certify the steady state.
    #[arg(long)]
    pub to_convergence: bool,
    /// Fixed integration step.
    #[arg(long, default_value_t = 1e-3)]
    pub h: f64,
    /// Record every k-th step.
    #[arg(long, default_value_t = 10)]
    pub record_every: usize,
    /// Include state columns x1..xn in the trajectory CSV.
    #[arg(long)]
    pub states: bool,
    /// Trajectory CSV path.
    #[arg(long)]
    pub traj: Option<PathBuf>,
    /// Terminal output vector path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-9)]
    pub rate_tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub residual_tol: f64,
    /// How long the rate must stay quiet, in time units.
    #[arg(long, default_value_t = 1.0)]
    pub hold: f64,
    #[arg(long, default_value_t = 300.0)]
    pub max_time: f64,
    /// Skip the independent Newton cross-check of the terminal output.
    #[arg(long)]
    pub no_cross_check: bool,
}

fn render_traj(traj: &Trajectory, states: bool, cfg: &str) -> String {
    let mut s = preamble("trajectory", cfg, None);
    for (t, g) in &traj.schedule {
        s += &format!("# t={t} graph={}\n", g.key_bits());
    }
    s + &trajectory_to_csv(traj, states)
}

pub fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let (spec, m_text) = load_model(&a.model)?;
    let g = read_graph(&a.graph)?;
    let w_text = read_text(&a.w)?;
    let iv = parse_w_file(&w_text)?;
    let net = spec.to_network();
    let x0 = parse_x0(a.x0.as_deref(), net.n())?;
    let ctrl = StepControl { h: a.h, record_every: a.record_every, ..Default::default() };
    let canon = format!(
        "simulate\nmodel_sha={}\ngraph={}\nw_sha={}\nx0={:?}\nt_end={:?}\nto_convergence={}\nh={:e}\n",
        sha(&m_text),
        g.key_bits(),
        sha(&w_text),
        x0,
        a.t_end,
        a.to_convergence,
        a.h
    );
    let cfg = config_hash(&canon);

    let (traj, notes, terminal): (Trajectory, Vec<String>, Vec<f64>) =
        match (a.t_end, a.to_convergence) {
            (Some(t_end), false) => {
                let drive: Vec<f64> = iv.w.iter().map(|v| -v).collect();
                let traj = integrate(&net, &g, &drive, &x0, (0.0, t_end), &ctrl)?;
                let y = traj.y.last().cloned().unwrap_or_default();
                println!("integrated {g} to t = {t_end} (uncertified horizon run)");
                (traj, vec![format!("source=simulate t_end={t_end} (uncertified)")], y)
            }
            (None, true) => {
                let thr = ConvergenceThresholds {
                    rate_tol: a.rate_tol,
                    residual_tol: a.residual_tol,
                    hold: a.hold,
                    max_time: a.max_time,
                    cross_check: !a.no_cross_check,
                };
                let (traj, v) = run_to_convergence_recorded(&net, &g, &iv.w, &x0, &thr, &ctrl)?;
                if !v.converged {
                    // Save the evidence before reporting the failure.
                    if let Some(p) = &a.traj {
                        let path = write_artifact(p, &render_traj(&traj, a.states, &cfg))?;
                        eprintln!("partial trajectory saved to {}", path.display());
                    }
                    bail!(
                        "no convergence by t = {}: residual {:.3e}, rate {:.3e}",
                        a.max_time,
                        v.residual_inf,
                        v.rate_inf
                    );
                }
                println!(
                    "{g} settled at t = {:.3}: residual_inf = {:.3e}, rate_inf = {:.3e}",
                    v.t_converged.unwrap_or(f64::NAN),
                    v.residual_inf,
                    v.rate_inf
                );
                if let Some(gap) = v.newton_gap {
                    println!("cross-check |y_sim − y_newton|∞ = {gap:.3e}");
                }
                let mut notes = vec![
                    format!("source=simulate to_convergence graph_key={}", g.key_bits()),
                    format!("residual_inf={:.17e}", v.residual_inf),
                ];
                if let Some(gap) = v.newton_gap {
                    notes.push(format!("newton_gap={gap:.17e}"));
                }
                (traj, notes, v.y)
            }
            _ => bail!("pass exactly one of --t-end or --to-convergence"),
        };

    if let Some(p) = &a.traj {
        let path = write_artifact(p, &render_traj(&traj, a.states, &cfg))?;
        println!("wrote trajectory to {}", path.display());
    }
    if let Some(p) = &a.out {
        let path = write_artifact(p, &render_y_file(&terminal, None, &cfg, &notes))?;
        println!("wrote terminal y to {}", path.display());
    } else {
        for (i, v) in terminal.iter().enumerate() {
            println!("y{} = {v:.17e}", i + 1);
        }
    }
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------
// build-table
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct BuildTableArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Candidate family: all:N, connected:N, subgraphs:FILE, or a graphs file.
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub w: PathBuf,
    /// Steady-state solve tolerance for table entries.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn build_table_cmd(a: &BuildTableArgs) -> Result<Outcome> {
    let (spec, m_text) = load_model(&a.model)?;
    let family = parse_family(&a.family, Path::new("."))?;
    let w_text = read_text(&a.w)?;
    let iv = parse_w_file(&w_text)?;
    let canon = format!(
        "build-table\nmodel_sha={}\nfamily={}\nw_sha={}\ntol={:e}\n",
        sha(&m_text),
        family.spec_string(),
        sha(&w_text),
        a.tol
    );
    let cfg = config_hash(&canon);
    let table = build_table(&family, &spec, &iv, a.tol)?;
    let text = preamble("table-artifact", &cfg, None) + &table_to_text(&table);
    let path = write_artifact(&a.out, &text)?;
    println!(
        "wrote table ({} entries, epsilon = {:.6e}) to {}",
        table.entries.len(),
        table.epsilon,
        path.display()
    );
    Ok(Outcome::Done)
}

// ---------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// Verify the table's model fingerprint and apply the model's output
    /// gauge to the measurement before lookup.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn detect_cmd(a: &DetectArgs) -> Result<Outcome> {
    let table_text = read_text(&a.table)?;
    let model = a.model.as_ref().map(|p| load_model(p)).transpose()?;
    let expect = model.as_ref().map(|(spec, _)| spec.fingerprint());
    let table = table_from_text(&table_text, expect.as_deref())?;
    let y_text = read_text(&a.y)?;
    let (y, _) = parse_y_file(&y_text)?;
    let y = match &model {
        Some((spec, _)) => gauge_align(&spec.to_network(), &y),
        None => y,
    };
    let canon = format!(
        "detect\ntable_sha={}\ny_sha={}\nmodel_sha={}\n",
        sha(&table_text),
        sha(&y_text),
        model.as_ref().map(|(_, t)| sha(t)).unwrap_or_else(|| "none".into())
    );
    let cfg = config_hash(&canon);

    let (record, outcome) = match detect(&y, &table) {
        Ok(r) => {
            let verdict = if r.confident { "confident" } else { "ambiguous" };
            println!(
                "detected {} ({verdict}): distance {:.6e}, margin {:.6e}, table epsilon {:.6e}",
                r.graph, r.distance, r.margin, table.epsilon
            );
            let out = if r.confident { Outcome::Done } else { Outcome::Ambiguous };
            (detection_json(&r, &table, &cfg), out)
        }
        Err(DetectionError::Tie { distance }) => {
            println!("ambiguous: measurement is exactly equidistant ({distance:.6e}) from two entries");
            let record = json!({
                "tool": TOOL,
                "config": cfg,
                "verdict": "tie",
                "distance": distance,
                "epsilon": table.epsilon,
                "confident": false,
            });
            (record, Outcome::Ambiguous)
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(p) = &a.json {
        let path = write_json(p, &record)?;
        println!("wrote record to {}", path.display());
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------
// reconstruct-lti
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Exact linear model supplying the agent gains A.
    #[arg(long)]
    pub model: PathBuf,
    /// The radix w file the measurement was taken under.
    #[arg(long)]
    pub w: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// Error bound you claim for an approximate measurement; must be below
    /// the digit budget 1/(2D). Exact y files ignore this.
    #[arg(long, default_value_t = 1e-9)]
    pub claimed_err: f64,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn reconstruct_cmd(a: &ReconstructArgs) -> Result<Outcome> {
    let (spec, m_text) = load_model(&a.model)?;
    let m = spec.as_lti().ok_or_else(|| anyhow!("reconstruction needs an lti model"))?;
    let w_text = read_text(&a.w)?;
    let iv = parse_w_file(&w_text)?;
    let y_text = read_text(&a.y)?;
    let (y, y_exact) = parse_y_file(&y_text)?;
    let canon = format!(
        "reconstruct-lti\nmodel_sha={}\nw_sha={}\ny_sha={}\nclaimed_err={:e}\n",
        sha(&m_text),
        sha(&w_text),
        sha(&y_text),
        a.claimed_err
    );
    let cfg = config_hash(&canon);

    let result = match &y_exact {
        Some(ex) => reconstruct_lti_exact(ex, m, &iv),
        None => reconstruct_lti(&y, m, &iv, a.claimed_err),
    };
    match result {
        Ok(rec) => {
            let weights: Vec<String> = rec
                .graph
                .edges()
                .iter()
                .zip(&rec.weights)
                .map(|(&(i, j), wt)| format!("{}-{}: {}", i + 1, j + 1, format_rat(wt)))
                .collect();
            println!("recovered {}", rec.graph);
            if weights.is_empty() {
                println!("no edges");
            } else {
                println!("weights: {}", weights.join(", "));
            }
            if let Some(p) = &a.json {
                let path = write_json(p, &reconstruction_json(&rec, &cfg))?;
                println!("wrote record to {}", path.display());
            }
            Ok(Outcome::Done)
        }
        Err(e) if is_decode_failure(&e) => {
            eprintln!("decode failure: {e}");
            if let Some(p) = &a.json {
                let record = json!({
                    "tool": TOOL,
                    "config": cfg,
                    "verdict": "decode-failure",
                    "error": e.to_string(),
                });
                write_json(p, &record)?;
            }
            Ok(Outcome::DecodeFailure)
        }
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------------
// epsilon
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct EpsilonArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub w: PathBuf,
    /// Newton tolerance for nonlinear steady states.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

pub fn epsilon_cmd(a: &EpsilonArgs) -> Result<Outcome> {
    let (spec, m_text) = load_model(&a.model)?;
    let family = parse_family(&a.family, Path::new("."))?;
    let w_text = read_text(&a.w)?;
    let iv = parse_w_file(&w_text)?;
    let canon = format!(
        "epsilon\nmodel_sha={}\nfamily={}\nw_sha={}\ntol={:e}\n",
        sha(&m_text),
        family.spec_string(),
        sha(&w_text),
        a.tol
    );
    let cfg = config_hash(&canon);
    let report = match &spec {
        ModelSpec::Lti(m) => separation_index_lti(&exactify(&iv.w, &iv.w_exact)?, &family, m)?,
        ModelSpec::Nonlinear(m) => separation_index_nonlinear(
            &iv.w,
            &family,
            m,
            &NewtonOptions { tol: a.tol, ..Default::default() },
        )?,
    };
    println!("epsilon = {:.6e} over {} family members", report.epsilon, report.member_count);
    if let Some(e2) = &report.eps_sq_exact {
        println!("exact epsilon^2 = {}", format_rat(e2));
    }
    match &report.argmin {
        Some((g, h)) => println!("closest pair: {g}  vs  {h}"),
        None => println!("single-member family: nothing to confuse (epsilon = +inf)"),
    }
    if let Some(p) = &a.json {
        let record = json!({
            "tool": TOOL,
            "config": cfg,
            "epsilon": report.epsilon,
            "eps_sq_exact": report.eps_sq_exact.as_ref().map(format_rat),
            "member_count": report.member_count,
            "closest_pair": report.argmin.as_ref().map(|(g, h)| [g.key_bits(), h.key_bits()]),
        });
        let path = write_json(p, &record)?;
        println!("wrote record to {}", path.display());
    }
    if report.epsilon > 0.0 {
        Ok(Outcome::Done)
    } else {
        println!("w does NOT separate this family");
        Ok(Outcome::Ambiguous)
    }
}

// ---------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PipelineMode {
    /// Gaussian w + lookup-table detection.
    Table,
    /// Radix w + exact reconstruction (lti models only).
    Radix,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Measure {
    /// Solve the steady-state equation directly.
    Solve,
    /// Integrate the closed loop until it settles.
    Simulate,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub family: String,
    /// Ground-truth graph the measurements are generated from.
    #[arg(long)]
    pub hidden: PathBuf,
    #[arg(long, value_enum)]
    pub mode: PipelineMode,
    #[arg(long, value_enum, default_value_t = Measure::Solve)]
    pub measure: Measure,
    /// Gaussian seed (table mode).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gaussian scale (table mode).
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Claimed measurement error for radix decoding of simulated outputs.
    #[arg(long, default_value_t = 1e-9)]
    pub claimed_err: f64,
    /// Fault injection: add this to agent 1's measured output.
    #[arg(long)]
    pub corrupt_y: Option<f64>,
    #[arg(long, default_value = ".")]
    pub outdir: PathBuf,
    #[arg(long, default_value_t = 300.0)]
    pub max_time: f64,
}

pub fn pipeline_cmd(a: &PipelineArgs) -> Result<Outcome> {
    let (spec, m_text) = load_model(&a.model)?;
    let family = parse_family(&a.family, Path::new("."))?;
    let hidden_text = read_text(&a.hidden)?;
    let hidden = Graph::from_text(&hidden_text)?;
    let net = spec.to_network();
    if hidden.n() != spec.n() {
        bail!("hidden graph has n={}, model has n={}", hidden.n(), spec.n());
    }
    let canon = format!(
        "pipeline\nmode={:?}\nmeasure={:?}\nmodel_sha={}\nfamily={}\nhidden_sha={}\nseed={}\nscale={:e}\ntol={:e}\ncorrupt={:?}\n",
        a.mode,
        a.measure,
        sha(&m_text),
        family.spec_string(),
        sha(&hidden_text),
        a.seed,
        a.scale,
        a.tol,
        a.corrupt_y
    );
    let cfg = config_hash(&canon);
    let out = |name: &str| a.outdir.join(name);

    // 1. Design the input.
    let iv: IndicationVector = match a.mode {
        PipelineMode::Table => gaussian_w(spec.n(), a.seed, a.scale)?,
        PipelineMode::Radix => {
            let m = spec
                .as_lti()
                .ok_or_else(|| anyhow!("radix pipeline needs an lti model"))?;
            radix_w(&family, m)?
        }
    };
    let w_path = write_artifact(&out("w.txt"), &render_w_file(&iv, &cfg))?;
    println!("[1/4] designed w → {}", w_path.display());

    // 2. Measure the hidden system.
    let thr = ConvergenceThresholds { max_time: a.max_time, ..Default::default() };
    let ctrl = StepControl::default();
    let (mut y, mut y_exact, residual, source) = match a.measure {
        Measure::Solve => match &spec {
            ModelSpec::Lti(m) => {
                let ss = solve_lti(&hidden, m, &exactify(&iv.w, &iv.w_exact)?)?;
                (ss.y, ss.y_exact, ss.residual_inf, "solve (exact)")
            }
            ModelSpec::Nonlinear(m) => {
                let ss = solve_nonlinear(
                    &hidden,
                    m,
                    &iv.w,
                    &NewtonOptions { tol: a.tol, ..Default::default() },
                )?;
                (ss.y, None, ss.residual_inf, "solve (newton)")
            }
        },
        Measure::Simulate => {
            let (traj, v) = run_to_convergence_recorded(&net, &hidden, &iv.w, &zeros(net.n()), &thr, &ctrl)?;
            let t_path = write_artifact(&out("trajectory.csv"), &render_traj(&traj, false, &cfg))?;
            println!("      trajectory → {}", t_path.display());
            if !v.converged {
                bail!(
                    "no convergence by t = {}: residual {:.3e}, rate {:.3e}",
                    a.max_time,
                    v.residual_inf,
                    v.rate_inf
                );
            }
            (v.y, None, v.residual_inf, "simulate")
        }
    };
    if let Some(delta) = a.corrupt_y {
        y[0] += delta;
        y_exact = None; // a corrupted measurement has no exact form
    }
    let notes = vec![
        format!("source={source} hidden_key={}", hidden.key_bits()),
        format!("residual_inf={residual:.17e}"),
    ];
    let y_path = write_artifact(&out("y.txt"), &render_y_file(&y, y_exact.as_deref(), &cfg, &notes))?;
    println!("[2/4] measured hidden system ({source}) → {}", y_path.display());

    // 3 + 4. Identify and record.
    match a.mode {
        PipelineMode::Table => {
            let table = build_table(&family, &spec, &iv, a.tol)?;
            let t_path = write_artifact(
                &out("table.txt"),
                &(preamble("table-artifact", &cfg, None) + &table_to_text(&table)),
            )?;
            println!("[3/4] built table ({} entries, epsilon = {:.4e}) → {}", table.entries.len(), table.epsilon, t_path.display());
            let y_al = gauge_align(&net, &y);
            let (record, verdict, outcome, detected) = match detect(&y_al, &table) {
                Ok(r) => {
                    let v = if r.confident { "confident" } else { "ambiguous" };
                    let o = if r.confident { Outcome::Done } else { Outcome::Ambiguous };
                    (detection_json(&r, &table, &cfg), v, o, Some(r.graph.clone()))
                }
                Err(DetectionError::Tie { distance }) => (
                    json!({"tool": TOOL, "config": cfg, "verdict": "tie", "distance": distance, "confident": false}),
                    "tie",
                    Outcome::Ambiguous,
                    None,
                ),
                Err(e) => return Err(e.into()),
            };
            write_json(&out("detection.json"), &record)?;
            let matched = detected.as_ref() == Some(&hidden);
            let summary = json!({
                "tool": TOOL,
                "config": cfg,
                "mode": "table",
                "seed": a.seed,
                "hidden_key": hidden.key_bits(),
                "detected_key": detected.as_ref().map(Graph::key_bits),
                "match": matched,
                "verdict": verdict,
            });
            write_json(&out("pipeline.json"), &summary)?;
            match &detected {
                Some(d) => println!(
                    "[4/4] detected {d} ({verdict}) — {}",
                    if matched { "matches the hidden graph" } else { "DOES NOT match the hidden graph" }
                ),
                None => println!("[4/4] detection inconclusive ({verdict})"),
            }
            Ok(outcome)
        }
        PipelineMode::Radix => {
            let m = spec.as_lti().expect("checked above");
            let result = match &y_exact {
                Some(ex) => reconstruct_lti_exact(ex, m, &iv),
                None => reconstruct_lti(&y, m, &iv, a.claimed_err),
            };
            match result {
                Ok(rec) => {
                    write_json(&out("reconstruction.json"), &reconstruction_json(&rec, &cfg))?;
                    let matched = rec.graph == hidden;
                    let summary = json!({
                        "tool": TOOL,
                        "config": cfg,
                        "mode": "radix",
                        "hidden_key": hidden.key_bits(),
                        "recovered_key": rec.graph.key_bits(),
                        "match": matched,
                        "verdict": "recovered",
                    });
                    write_json(&out("pipeline.json"), &summary)?;
                    println!(
                        "[4/4] reconstructed {} — {}",
                        rec.graph,
                        if matched { "matches the hidden graph" } else { "DOES NOT match the hidden graph" }
                    );
                    Ok(Outcome::Done)
                }
                Err(e) if is_decode_failure(&e) => {
                    eprintln!("decode failure: {e}");
                    let summary = json!({
                        "tool": TOOL,
                        "config": cfg,
                        "mode": "radix",
                        "hidden_key": hidden.key_bits(),
                        "verdict": "decode-failure",
                        "error": e.to_string(),
                    });
                    write_json(&out("pipeline.json"), &summary)?;
                    Ok(Outcome::DecodeFailure)
                }
                Err(e) => Err(e.into()),
            }
        }
    }
}

// ---------------------------------------------------------------------
// scenario
// ---------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub outdir: PathBuf,
}

pub fn scenario_cmd(a: &ScenarioArgs) -> Result<Outcome> {
    let sc = parse_scenario(&a.config)?;
    let cfg = config_hash(&sc.canon);
    let net = sc.model.to_network();
    let x0 = match &sc.x0 {
        Some(v) => {
            if v.len() != net.n() {
                bail!("x0 has {} entries, model has n={}", v.len(), net.n());
            }
            v.clone()
        }
        None => zeros(net.n()),
    };
    let table = build_table(&sc.family, &sc.model, &sc.iv, sc.table_tol)?;
    let out = |name: &str| a.outdir.join(name);
    let t_path = write_artifact(
        &out("table.txt"),
        &(preamble("table-artifact", &cfg, None) + &table_to_text(&table)),
    )?;
    println!(
        "built table over {} candidates (epsilon = {:.4e}) → {}",
        table.entries.len(),
        table.epsilon,
        t_path.display()
    );

    let thr = ConvergenceThresholds {
        rate_tol: sc.rate_tol,
        residual_tol: sc.residual_tol,
        hold: sc.hold,
        max_time: sc.t_end,
        cross_check: false,
    };
    let ctrl = StepControl { h: sc.h, record_every: sc.record_every, ..Default::default() };
    let outcome =
        run_scenario(&net, &sc.schedule, &sc.iv.w, &x0, sc.t_end, &thr, &ctrl, Some(&table))?;

    let traj_path =
        write_artifact(&out("trajectory.csv"), &render_traj(&outcome.trajectory, sc.states, &cfg))?;
    println!("wrote trajectory to {}", traj_path.display());

    let mut all_confident = true;
    let mut seg_records = Vec::new();
    for (idx, seg) in outcome.segments.iter().enumerate() {
        let det = seg.detection.as_ref();
        let confident = det.is_some_and(|d| d.confident);
        let matches_schedule = det.map(|d| d.graph == seg.graph);
        all_confident &= seg.verdict.converged && confident;
        let det_str = match det {
            Some(d) => format!(
                "detected {} ({}{})",
                d.graph,
                if d.confident { "confident" } else { "ambiguous" },
                match matches_schedule {
                    Some(true) => ", matches schedule",
                    Some(false) => ", MISMATCH vs schedule",
                    None => "",
                }
            ),
            None => "no table".to_string(),
        };
        println!(
            "segment {idx} [{:.2}, {:.2}) {}: {} (residual {:.2e}); {det_str}",
            seg.t_start,
            seg.t_end,
            seg.graph,
            if seg.verdict.converged { "converged" } else { "NOT converged" },
            seg.verdict.residual_inf,
        );
        seg_records.push(json!({
            "index": idx,
            "t_start": seg.t_start,
            "t_end": seg.t_end,
            "scheduled_key": seg.graph.key_bits(),
            "converged": seg.verdict.converged,
            "t_converged": seg.verdict.t_converged,
            "residual_inf": seg.verdict.residual_inf,
            "rate_inf": seg.verdict.rate_inf,
            "detection": det.map(|d| json!({
                "graph_key": d.graph.key_bits(),
                "distance": d.distance,
                "margin": d.margin,
                "confident": d.confident,
                "matches_schedule": matches_schedule,
            })),
        }));
    }
    let record = json!({
        "tool": TOOL,
        "config": cfg,
        "epsilon": table.epsilon,
        "segments": seg_records,
    });
    let s_path = write_json(&out("segments.json"), &record)?;
    println!("wrote segment records to {}", s_path.display());
    Ok(if all_confident { Outcome::Done } else { Outcome::Ambiguous })
}
