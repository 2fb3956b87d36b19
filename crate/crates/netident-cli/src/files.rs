//! On-disk formats the tool reads and writes: model configs, w and y
//! vectors, graph families, scenario configs, and the standard artifact
//! preamble. Everything is line-oriented text — `#` starts a comment,
//! `key=value` lines carry structure, bare lines carry numbers. Exact
//! values are "p/q" strings; approximate ones are 17-significant-digit
//! decimals. Nothing here depends on locale or time.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use netident::exact::{format_rat, Rat};
use netident::graph::{pair_count, parse_graph_list, Graph, GraphFamily};
use netident::indication::{IndicationVector, Provenance};
use netident::models::{fingerprint_of, LtiNetworkModel, ModelSpec, NetworkModel};
use netident::textio::{atomic_write, fmt_f64, parse_number, Number};
use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOOL: &str = concat!("netident ", env!("CARGO_PKG_VERSION"));

/// Short content hash binding an artifact to the run that produced it.
/// Reruns with identical inputs produce identical hashes, hence identical
/// artifacts; anything time- or path-dependent is deliberately excluded.
pub fn config_hash(canon: &str) -> String {
    fingerprint_of(canon)[..16].to_string()
}

/// Standard header for every artifact this tool writes.
pub fn preamble(kind: &str, config: &str, seed: Option<u64>) -> String {
    let seed = seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    format!("# netident-{kind} v1\n# tool={TOOL}\n# config={config}\n# seed={seed}\n")
}

/// Resolve an output path: relative paths land under $NETIDENT_OUTDIR when
/// that is set, else stay relative to the working directory.
pub fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os("NETIDENT_OUTDIR") {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Write an artifact atomically, creating parent directories. Returns the
/// resolved path for reporting.
pub fn write_artifact(path: &Path, content: &str) -> Result<PathBuf> {
    let full = resolve_out(path);
    if let Some(dir) = full.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
    }
    atomic_write(&full, content).with_context(|| format!("writing {}", full.display()))?;
    Ok(full)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

// ---------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------

/// Uniform draws in [0.5, 1] — the conventional way this tool seeds
/// heterogeneous neural time constants.
pub fn taus_from_seed(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| 0.5 + 0.5 * rng.gen::<f64>()).collect()
}

fn kv_lines(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key=value, got `{line}`", lineno + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn rat_list(s: &str, what: &str, expected: usize) -> Result<Vec<Rat>> {
    let vals: Vec<Rat> = s
        .split_whitespace()
        .map(|t| netident::exact::parse_rat(t).map_err(|e| anyhow!("{what}: {e}")))
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        bail!("{what}: expected {expected} values, got {}", vals.len());
    }
    Ok(vals)
}

fn f64_list(s: &str, what: &str, expected: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = s
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| anyhow!("{what}: cannot parse `{t}`")))
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        bail!("{what}: expected {expected} values, got {}", vals.len());
    }
    Ok(vals)
}

/// Parse a model config.
///
/// ```text
/// model=lti            |  model=neural
/// n=3                  |  n=3
/// a=1 1 1              |  tau=0.6 0.85 0.7   (or tau_seed=42)
/// b=1 1/2 3            |  b=0.1
/// ```
///
/// `a` is per-agent, `b` for an LTI model is per node pair in the order
/// (1,2), (1,3), …, (2,3), …; for a neural model `b` is the single shared
/// coupling gain. `tau_seed` draws τ uniformly from [0.5, 1].
pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let mut kind = None;
    let mut n = None;
    let mut fields: Vec<(String, String)> = Vec::new();
    for (k, v) in kv_lines(text)? {
        match k.as_str() {
            "model" => kind = Some(v),
            "n" => n = Some(v.parse::<usize>().map_err(|_| anyhow!("n: not an integer"))?),
            _ => fields.push((k, v)),
        }
    }
    let kind = kind.ok_or_else(|| anyhow!("model file needs a `model=` line"))?;
    let n = n.ok_or_else(|| anyhow!("model file needs an `n=` line"))?;
    let get = |key: &str| fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    match kind.as_str() {
        "lti" => {
            let a = rat_list(get("a").ok_or_else(|| anyhow!("lti model needs `a=`"))?, "a", n)?;
            let b = rat_list(
                get("b").ok_or_else(|| anyhow!("lti model needs `b=`"))?,
                "b",
                pair_count(n),
            )?;
            Ok(ModelSpec::Lti(LtiNetworkModel::new(a, b)?))
        }
        "neural" => {
            let b: f64 = get("b")
                .ok_or_else(|| anyhow!("neural model needs `b=`"))?
                .parse()
                .map_err(|_| anyhow!("b: not a number"))?;
            let taus = match (get("tau"), get("tau_seed")) {
                (Some(t), None) => f64_list(t, "tau", n)?,
                (None, Some(s)) => {
                    let seed: u64 = s.parse().map_err(|_| anyhow!("tau_seed: not an integer"))?;
                    taus_from_seed(n, seed)
                }
                _ => bail!("neural model needs exactly one of `tau=` or `tau_seed=`"),
            };
            Ok(ModelSpec::Nonlinear(NetworkModel::neural(&taus, b)?))
        }
        other => bail!("unknown model kind `{other}` (expected lti or neural)"),
    }
}

// ---------------------------------------------------------------------
// w files
// ---------------------------------------------------------------------

/// Render an indication vector with enough structure to rebuild it:
/// the radix parameters or the Gaussian seed travel with the numbers.
pub fn render_w_file(iv: &IndicationVector, config: &str) -> String {
    let seed = match &iv.provenance {
        Provenance::Gaussian { seed, .. } => Some(*seed),
        _ => None,
    };
    let mut s = preamble("w", config, seed);
    match &iv.provenance {
        Provenance::Gaussian { seed, scale } => {
            s += &format!("mode=gaussian\nseed={seed}\nscale={scale}\n");
        }
        Provenance::Radix { m, n_bound, d } => {
            s += "mode=radix\n";
            if let Some(f) = &iv.family {
                s += &format!("family={f}\n");
            }
            s += &format!("base={m}\nn_bound={n_bound}\nd={d}\n");
        }
        Provenance::Explicit => s += "mode=explicit\n",
    }
    match &iv.w_exact {
        Some(w) => {
            for r in w {
                s += &format_rat(r);
                s.push('\n');
            }
        }
        None => {
            for v in &iv.w {
                s += &fmt_f64(*v);
                s.push('\n');
            }
        }
    }
    s
}

fn parse_bigint(s: &str, what: &str) -> Result<BigInt> {
    s.parse::<BigInt>().map_err(|_| anyhow!("{what}: `{s}` is not an integer"))
}

/// Parse a w file. A plain list of numbers (no `mode=` line) is accepted
/// as an explicitly supplied vector.
pub fn parse_w_file(text: &str) -> Result<IndicationVector> {
    let mut keys: Vec<(String, String)> = Vec::new();
    let mut numbers: Vec<Number> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.contains('=') {
            let (k, v) = line.split_once('=').unwrap();
            keys.push((k.trim().to_string(), v.trim().to_string()));
        } else {
            numbers
                .push(parse_number(line).map_err(|e| anyhow!("line {}: {e}", lineno + 1))?);
        }
    }
    if numbers.is_empty() {
        bail!("w file contains no entries");
    }
    let get = |key: &str| keys.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let w: Vec<f64> = numbers.iter().map(|x| x.value).collect();
    let exact: Option<Vec<Rat>> = numbers.iter().map(|x| x.exact.clone()).collect();
    let family = get("family").map(str::to_string);
    match get("mode").unwrap_or("explicit") {
        "gaussian" => {
            let seed: u64 = get("seed")
                .ok_or_else(|| anyhow!("gaussian w file needs `seed=`"))?
                .parse()
                .map_err(|_| anyhow!("seed: not an integer"))?;
            let scale = get("scale").unwrap_or("1").to_string();
            Ok(IndicationVector { w, w_exact: exact, provenance: Provenance::Gaussian { seed, scale }, family })
        }
        "radix" => {
            let base = parse_bigint(get("base").ok_or_else(|| anyhow!("radix w file needs `base=`"))?, "base")?;
            let n_bound =
                parse_bigint(get("n_bound").ok_or_else(|| anyhow!("radix w file needs `n_bound=`"))?, "n_bound")?;
            let d = parse_bigint(get("d").ok_or_else(|| anyhow!("radix w file needs `d=`"))?, "d")?;
            let w_exact =
                exact.ok_or_else(|| anyhow!("radix w entries must be exact integers"))?;
            // The decoder trusts these parameters; make sure the numbers
            // are actually the powers they claim to be.
            let mut power = BigInt::from(1);
            for (i, r) in w_exact.iter().enumerate() {
                if *r != Rat::from_integer(power.clone()) {
                    bail!("radix w entry {} is {}, expected base^{i} = {power}", i + 1, format_rat(r));
                }
                power *= &base;
            }
            Ok(IndicationVector {
                w,
                w_exact: Some(w_exact),
                provenance: Provenance::Radix { m: base, n_bound, d },
                family,
            })
        }
        "explicit" => {
            Ok(IndicationVector { w, w_exact: exact, provenance: Provenance::Explicit, family })
        }
        other => bail!("unknown w mode `{other}`"),
    }
}

// ---------------------------------------------------------------------
// y files
// ---------------------------------------------------------------------

/// Render a measured or solved output vector. `notes` become comments —
/// provenance for humans, invisible to parsers.
pub fn render_y_file(
    y: &[f64],
    y_exact: Option<&[Rat]>,
    config: &str,
    notes: &[String],
) -> String {
    let mut s = preamble("y", config, None);
    for note in notes {
        s += &format!("# {note}\n");
    }
    match y_exact {
        Some(ex) => {
            for r in ex {
                s += &format_rat(r);
                s.push('\n');
            }
        }
        None => {
            for v in y {
                s += &fmt_f64(*v);
                s.push('\n');
            }
        }
    }
    s
}

/// Parse a y file: bare numbers, one per agent. Exact entries are carried
/// through only when every line is exact.
pub fn parse_y_file(text: &str) -> Result<(Vec<f64>, Option<Vec<Rat>>)> {
    let mut numbers = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.contains('=') {
            bail!("line {}: `{line}` is not a number — this looks like a w or config file", lineno + 1);
        }
        numbers.push(parse_number(line).map_err(|e| anyhow!("line {}: {e}", lineno + 1))?);
    }
    if numbers.is_empty() {
        bail!("y file contains no entries");
    }
    let y = numbers.iter().map(|x| x.value).collect();
    let exact = numbers.into_iter().map(|x| x.exact).collect();
    Ok((y, exact))
}

// ---------------------------------------------------------------------
// Graphs and families
// ---------------------------------------------------------------------

pub fn read_graph(path: &Path) -> Result<Graph> {
    let text = read_text(path)?;
    Graph::from_text(&text).with_context(|| format!("parsing graph {}", path.display()))
}

/// A family on the command line is `all:N`, `connected:N`,
/// `subgraphs:<graph file>`, or the path of a file listing candidate
/// graphs (blocks of the usual graph format).
pub fn parse_family(spec: &str, base: &Path) -> Result<GraphFamily> {
    if let Some(n) = spec.strip_prefix("all:") {
        return Ok(GraphFamily::all(n.parse().map_err(|_| anyhow!("all:<n> needs an integer"))?));
    }
    if let Some(n) = spec.strip_prefix("connected:") {
        return Ok(GraphFamily::connected(
            n.parse().map_err(|_| anyhow!("connected:<n> needs an integer"))?,
        ));
    }
    if let Some(host) = spec.strip_prefix("subgraphs:") {
        return Ok(GraphFamily::subgraphs_of(read_graph(&base.join(host))?));
    }
    let path = base.join(spec);
    let text = read_text(&path)?;
    let graphs = parse_graph_list(&text)
        .with_context(|| format!("parsing family file {}", path.display()))?;
    GraphFamily::explicit(graphs).map_err(Into::into)
}

// ---------------------------------------------------------------------
// Scenario configs
// ---------------------------------------------------------------------

pub struct ScenarioConfig {
    pub model: ModelSpec,
    pub iv: IndicationVector,
    /// Candidate family for the lookup table; defaults to the distinct
    /// graphs of the schedule.
    pub family: GraphFamily,
    pub schedule: Vec<(f64, Graph)>,
    pub t_end: f64,
    pub x0: Option<Vec<f64>>,
    /// Lookup-table build tolerance.
    pub table_tol: f64,
    pub rate_tol: f64,
    pub residual_tol: f64,
    pub hold: f64,
    pub h: f64,
    pub record_every: usize,
    pub states: bool,
    /// Canonical content description for the config hash.
    pub canon: String,
}

/// Parse a scenario config. Paths inside the file are relative to the
/// file's own directory.
///
/// ```text
/// model=neural10.model
/// w=w.txt
/// family=candidates.graphs      (optional)
/// t_end=80
/// t=0 graph=g0.graph
/// t=20 graph=g1.graph
/// ```
///
/// Optional knobs: `x0=…`, `tol=`, `rate_tol=`, `residual_tol=`, `hold=`,
/// `h=`, `record_every=`, `states=true`.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = read_text(path)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut canon = format!("scenario\nconfig_sha={}\n", fingerprint_of(&text));

    let mut model = None;
    let mut iv = None;
    let mut family_spec: Option<String> = None;
    let mut schedule: Vec<(f64, Graph)> = Vec::new();
    let mut t_end = None;
    let mut x0 = None;
    let mut table_tol = 1e-10;
    let mut rate_tol = 1e-9;
    let mut residual_tol = 1e-9;
    let mut hold = 1.0;
    let mut h = 1e-3;
    let mut record_every = 10usize;
    let mut states = false;

    let parse_f = |v: &str, what: &str| -> Result<f64> {
        v.parse::<f64>().map_err(|_| anyhow!("{what}: cannot parse `{v}`"))
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| anyhow!("{} line {}: {msg}", path.display(), lineno + 1);
        if let Some(rest) = line.strip_prefix("t=") {
            let (t_str, g_part) = rest
                .split_once(char::is_whitespace)
                .ok_or_else(|| err("schedule entry must be `t=<time> graph=<file>`".into()))?;
            let g_file = g_part
                .trim()
                .strip_prefix("graph=")
                .ok_or_else(|| err("schedule entry must be `t=<time> graph=<file>`".into()))?;
            let t = parse_f(t_str, "t")?;
            let g_text = read_text(&base.join(g_file))?;
            canon += &format!("graph_sha={}\n", fingerprint_of(&g_text));
            let g = Graph::from_text(&g_text)?;
            schedule.push((t, g));
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
        match k.trim() {
            "model" => {
                let m_text = read_text(&base.join(v.trim()))?;
                canon += &format!("model_sha={}\n", fingerprint_of(&m_text));
                model = Some(parse_model(&m_text)?);
            }
            "w" => {
                let w_text = read_text(&base.join(v.trim()))?;
                canon += &format!("w_sha={}\n", fingerprint_of(&w_text));
                iv = Some(parse_w_file(&w_text)?);
            }
            "family" => family_spec = Some(v.trim().to_string()),
            "t_end" => t_end = Some(parse_f(v.trim(), "t_end")?),
            "x0" => x0 = Some(f64_list(v, "x0", v.split_whitespace().count())?),
            "tol" => table_tol = parse_f(v.trim(), "tol")?,
            "rate_tol" => rate_tol = parse_f(v.trim(), "rate_tol")?,
            "residual_tol" => residual_tol = parse_f(v.trim(), "residual_tol")?,
            "hold" => hold = parse_f(v.trim(), "hold")?,
            "h" => h = parse_f(v.trim(), "h")?,
            "record_every" => {
                record_every =
                    v.trim().parse().map_err(|_| err("record_every: not an integer".into()))?
            }
            "states" => states = v.trim() == "true",
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }

    let model = model.ok_or_else(|| anyhow!("scenario config needs `model=`"))?;
    let iv = iv.ok_or_else(|| anyhow!("scenario config needs `w=`"))?;
    let t_end = t_end.ok_or_else(|| anyhow!("scenario config needs `t_end=`"))?;
    if schedule.is_empty() {
        bail!("scenario config needs at least one `t=… graph=…` entry");
    }
    let family = match family_spec {
        Some(spec) => parse_family(&spec, &base)?,
        None => {
            let mut members: Vec<Graph> = schedule.iter().map(|(_, g)| g.clone()).collect();
            members.sort_by_key(Graph::key_bits);
            members.dedup();
            GraphFamily::explicit(members)?
        }
    };
    Ok(ScenarioConfig {
        model,
        iv,
        family,
        schedule,
        t_end,
        x0,
        table_tol,
        rate_tol,
        residual_tol,
        hold,
        h,
        record_every,
        states,
        canon,
    })
}

// ---------------------------------------------------------------------
// Misc numeric rendering
// ---------------------------------------------------------------------

/// Exact rationals when available, else decimals — for JSON records.
pub fn json_numbers(y: &[f64], y_exact: Option<&[Rat]>) -> Vec<serde_json::Value> {
    match y_exact {
        Some(ex) => ex.iter().map(|r| serde_json::Value::String(format_rat(r))).collect(),
        None => y.iter().map(|v| serde_json::json!(v)).collect(),
    }
}

/// Best-effort exact view of a parsed vector: exact entries when the file
/// carried them, dyadic exactification of the doubles otherwise.
pub fn exactify(w: &[f64], w_exact: &Option<Vec<Rat>>) -> Result<Vec<Rat>> {
    if let Some(ex) = w_exact {
        return Ok(ex.clone());
    }
    w.iter()
        .map(|&v| {
            netident::exact::rat_from_f64(v).ok_or_else(|| anyhow!("non-finite entry {v} in w"))
        })
        .collect()
}
