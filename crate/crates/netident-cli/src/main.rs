//! `netident` — identify a diffusively coupled network's interaction graph
//! from steady-state outputs under a designed constant input.
//!
//! The subcommands mirror the workflow: design an input (`gen-w`), obtain
//! outputs (`solve-ss` or `simulate`), and read the graph back (`detect`
//! against a prebuilt table, or `reconstruct-lti` digit by digit). The
//! `pipeline` and `scenario` commands chain those stages end to end.
//!
//! Exit codes: 0 success (detection confident), 2 ambiguous detection,
//! 3 radix decode failure, 1 usage or configuration error.

mod commands;
mod files;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "netident",
    version,
    about = "Identify a network's interaction graph from steady-state outputs",
    after_help = "Environment: NETIDENT_OUTDIR prefixes relative output paths; \
                  NETIDENT_JOBS caps worker threads (--jobs overrides)."
)]
struct Cli {
    /// Worker threads for table building and row decoding.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Design an indication input vector (gaussian or radix).
    GenW(commands::GenWArgs),
    /// Solve the steady-state equation for one graph.
    SolveSs(commands::SolveSsArgs),
    /// Integrate the closed loop (fixed horizon or to convergence).
    Simulate(commands::SimulateArgs),
    /// Precompute the steady-state lookup table for a family.
    BuildTable(commands::BuildTableArgs),
    /// Classify a measured output against a lookup table.
    Detect(commands::DetectArgs),
    /// Recover graph and edge weights exactly from a radix measurement.
    ReconstructLti(commands::ReconstructArgs),
    /// Report the separation index of an input over a family.
    Epsilon(commands::EpsilonArgs),
    /// gen-w → measure → identify, end to end, against a hidden graph.
    Pipeline(commands::PipelineArgs),
    /// Run a graph-switching schedule with per-segment detection.
    Scenario(commands::ScenarioArgs),
}

/// What a run concluded, beyond plain success/failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Success; detection (if any) was confident.
    Done,
    /// Detection could not commit to a single graph.
    Ambiguous,
    /// Radix digits could not be read from the measurement.
    DecodeFailure,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // --help and --version arrive here too; only real usage errors
            // take the config-error exit code.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let jobs = cli
        .jobs
        .or_else(|| std::env::var("NETIDENT_JOBS").ok().and_then(|v| v.parse().ok()));
    if let Some(j) = jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let result = match &cli.cmd {
        Cmd::GenW(a) => commands::gen_w(a),
        Cmd::SolveSs(a) => commands::solve_ss(a),
        Cmd::Simulate(a) => commands::simulate(a),
        Cmd::BuildTable(a) => commands::build_table_cmd(a),
        Cmd::Detect(a) => commands::detect_cmd(a),
        Cmd::ReconstructLti(a) => commands::reconstruct_cmd(a),
        Cmd::Epsilon(a) => commands::epsilon_cmd(a),
        Cmd::Pipeline(a) => commands::pipeline_cmd(a),
        Cmd::Scenario(a) => commands::scenario_cmd(a),
    };
    match result {
        Ok(Outcome::Done) => {}
        Ok(Outcome::Ambiguous) => std::process::exit(2),
        Ok(Outcome::DecodeFailure) => std::process::exit(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
