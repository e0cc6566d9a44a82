//! Command-line front end for the network diffusion toolkit.
//!
//! Graphs come in as JSON files (see `GraphFile` in the library),
//! trajectories go out as CSV with full double precision, matrices and
//! reports as JSON. Every command writes a manifest next to its output with
//! seeds and input digests; identical invocations produce identical files.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use diffnet::dynamics::{expected_trajectory, Trajectory};
use diffnet::exogenous::{
    dynamic_learning_trajectory, inhomogeneous_trajectory, pid_expanded_response, reduce_stubborn,
    stubborn_steady_state,
};
use diffnet::graph::{GraphFile, Protocol, TransitionRateMatrix, WeightedDigraph};
use diffnet::modal::controlled_response;
use diffnet::monte_carlo::sample_paths;
use diffnet::redesign::{respectrum, RespectrumPlan};
use diffnet::spectral::{steady_state_vectors, SpectralDecomposition, C64};
use nalgebra::{DMatrix, DVector};
use serde_json::json;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

mod learn;
mod manifest;
mod output;
mod parse;
mod repro;

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "diffnet",
    version,
    about = "Simulate, control, and redesign diffusion over weighted directed networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues, steady-state vectors, and diagnostics of a graph's rate matrix.
    Spectrum {
        #[arg(long)]
        graph: PathBuf,
        /// Override the protocol stored in the graph file (P1 or P2).
        #[arg(long)]
        protocol: Option<String>,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic expected trajectory of the homogeneous dynamics.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        protocol: Option<String>,
        /// Initial node properties, comma separated.
        #[arg(long)]
        s0: String,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0.25)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo ensemble of the stochastic update protocols.
    Mc {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long)]
        s0: String,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0.25)]
        dt: f64,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// exact or disc:K (K substeps per unit time).
        #[arg(long, default_value = "exact")]
        scheme: String,
        /// Ensemble-mean CSV path; stderr CSV lands next to it.
        #[arg(long)]
        out: PathBuf,
        /// Also write every trial into this CSV (trial column prepended).
        #[arg(long)]
        dump_trials: Option<PathBuf>,
    },
    /// Driven dynamics: exogenous inputs, stubborn agents, or learning gains.
    Drive {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long)]
        s0: String,
        /// const:[...], impulse:[...], or pw:FILE.csv.
        #[arg(long)]
        input: Option<String>,
        /// Hold nodes constant: "3=1.0,5=0.2" (1-based).
        #[arg(long)]
        stubborn: Option<String>,
        /// p:BETA:RHO or pid:B1,B2,B3:RHO.
        #[arg(long)]
        gains: Option<String>,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0.25)]
        dt: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Impulse response with a controller on one quasi-mode.
    Control {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        protocol: Option<String>,
        /// Impulse vector, comma separated.
        #[arg(long)]
        impulse: String,
        /// Target quasi-mode (1-based, eigenvalue-sorted).
        #[arg(long, default_value_t = 1)]
        mode: usize,
        /// none, p:K, or i:K.
        #[arg(long, default_value = "none")]
        ctrl: String,
        #[arg(long, default_value_t = 3.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        /// Base path: writes BASE.csv (nodes) and BASE.quasi.csv (modes).
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild the rate matrix with edited eigenvalues over the same basis.
    Respectrum {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        protocol: Option<String>,
        /// mode=M:VALUE, comma separated or repeated; modes 1-based.
        #[arg(long)]
        edit: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabular Q-learning over a set of candidate rate matrices.
    Learn {
        /// JSON config; see the README for the schema.
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate a bundled scenario into a directory.
    Repro {
        /// fig2, fig4 (alias fig3), fig5, sec5b, sec6a, fig13, or fig14.
        target: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn parse_protocol(s: &str) -> Result<Protocol> {
    match s {
        "P1" | "p1" => Ok(Protocol::Conservative),
        "P2" | "p2" => Ok(Protocol::NonConservative),
        other => bail!("unknown protocol {other:?} (want P1 or P2)"),
    }
}

/// Load a graph file, apply an optional protocol override.
fn load_graph(path: &Path, protocol: Option<&String>) -> Result<(WeightedDigraph, Protocol)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading graph file {}", path.display()))?;
    let file: GraphFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing graph file {}", path.display()))?;
    let g = file.to_graph()?;
    let protocol = match protocol {
        Some(s) => parse_protocol(s)?,
        None => file.protocol,
    };
    Ok((g, protocol))
}

fn check_s0(s0: &DVector<f64>, n: usize) -> Result<()> {
    if s0.len() != n {
        bail!("--s0 has {} entries but the graph has {n} nodes", s0.len());
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Spectrum {
            graph,
            protocol,
            out,
        } => {
            let (g, proto) = load_graph(&graph, protocol.as_ref())?;
            let q = g.transition_rate_matrix(proto);
            let report = spectrum_report(&q)?;
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                None => println!("{text}"),
                Some(path) => {
                    std::fs::write(&path, text)?;
                    RunManifest::new("spectrum", json!({"graph": graph, "protocol": proto.to_string()}))
                        .input(&graph)?
                        .output(&path)
                        .write_alongside(&path)?;
                }
            }
        }
        Command::Simulate {
            graph,
            protocol,
            s0,
            horizon,
            dt,
            out,
        } => {
            let (g, proto) = load_graph(&graph, protocol.as_ref())?;
            let s0 = parse::vector(&s0)?;
            check_s0(&s0, g.node_count())?;
            let times = parse::time_grid(horizon, dt)?;
            let q = g.transition_rate_matrix(proto);
            let traj = expected_trajectory(&q, &s0, &times)?;
            output::write_trajectory(&traj, &out)?;
            RunManifest::new(
                "simulate",
                json!({"graph": graph, "protocol": proto.to_string(), "horizon": horizon, "dt": dt}),
            )
            .input(&graph)?
            .output(&out)
            .write_alongside(&out)?;
        }
        Command::Mc {
            graph,
            protocol,
            s0,
            horizon,
            dt,
            trials,
            seed,
            scheme,
            out,
            dump_trials,
        } => {
            let (g, proto) = load_graph(&graph, protocol.as_ref())?;
            let s0 = parse::vector(&s0)?;
            check_s0(&s0, g.node_count())?;
            let times = parse::time_grid(horizon, dt)?;
            let scheme = parse::scheme(&scheme)?;
            let ensemble =
                sample_paths(&g, proto, &s0, horizon, &times, trials, seed, scheme)?;
            for w in &ensemble.warnings {
                eprintln!("warning: {w}");
            }
            output::write_trajectory(&ensemble.mean, &out)?;
            let stderr_path = output::sibling(&out, "stderr");
            output::write_stderr_csv(&ensemble, &stderr_path)?;
            let mut manifest = RunManifest::new(
                "mc",
                json!({
                    "graph": graph, "protocol": proto.to_string(), "horizon": horizon,
                    "dt": dt, "trials": trials, "scheme": format!("{scheme:?}"),
                }),
            )
            .seed(seed)
            .input(&graph)?
            .output(&out)
            .output(&stderr_path);
            if let Some(path) = dump_trials {
                output::write_trials_csv(&ensemble, &path)?;
                manifest = manifest.output(&path);
            }
            manifest.write_alongside(&out)?;
        }
        Command::Drive {
            graph,
            protocol,
            s0,
            input,
            stubborn,
            gains,
            horizon,
            dt,
            out,
        } => {
            let (g, proto) = load_graph(&graph, protocol.as_ref())?;
            let n = g.node_count();
            let times = parse::time_grid(horizon, dt)?;
            let q = g.transition_rate_matrix(proto);
            let traj = drive(&q, n, &s0, input.as_deref(), stubborn.as_deref(), gains.as_deref(), &times)?;
            output::write_trajectory(&traj, &out)?;
            RunManifest::new(
                "drive",
                json!({
                    "graph": graph, "protocol": proto.to_string(), "input": input,
                    "stubborn": stubborn, "gains": gains, "horizon": horizon, "dt": dt,
                }),
            )
            .input(&graph)?
            .output(&out)
            .write_alongside(&out)?;
        }
        Command::Control {
            graph,
            protocol,
            impulse,
            mode,
            ctrl,
            horizon,
            dt,
            out,
        } => {
            let (g, proto) = load_graph(&graph, protocol.as_ref())?;
            let impulse = parse::vector(&impulse)?;
            check_s0(&impulse, g.node_count())?;
            let times = parse::time_grid(horizon, dt)?;
            let q = g.transition_rate_matrix(proto);
            let ctrls = parse::controller(&ctrl, mode, g.node_count())?;
            let resp = controlled_response(&q, &impulse, &ctrls, &times)?;
            if resp.marginal {
                eprintln!("warning: a closed-loop pole sits on the imaginary axis");
            }
            let node_path = out.with_extension("csv");
            let quasi_path = out.with_extension("quasi.csv");
            output::write_trajectory(&resp.node, &node_path)?;
            output::write_quasi_csv(&times, &resp.quasi, &quasi_path)?;
            RunManifest::new(
                "control",
                json!({
                    "graph": graph, "protocol": proto.to_string(), "mode": mode,
                    "ctrl": ctrl, "horizon": horizon, "dt": dt,
                }),
            )
            .input(&graph)?
            .output(&node_path)
            .output(&quasi_path)
            .write_alongside(&node_path)?;
        }
        Command::Respectrum {
            graph,
            protocol,
            edit,
            out,
        } => {
            let (g, proto) = load_graph(&graph, protocol.as_ref())?;
            let q = g.transition_rate_matrix(proto);
            let edits = parse::edits(&edit)?;
            let base = diffnet::redesign::degenerate_basis_choice(q.matrix(), 1e-8)?;
            let mut map = BTreeMap::new();
            for (mode, value) in edits {
                if mode >= base.dim() {
                    bail!("edit mode {} outside 1..={}", mode + 1, base.dim());
                }
                map.insert(mode, C64::new(value, 0.0));
            }
            let plan = RespectrumPlan::new(base, proto, map)?;
            let outcome = respectrum(&plan)?;
            output::write_respectrum_json(&outcome, q.matrix(), proto, &out)?;
            RunManifest::new(
                "respectrum",
                json!({"graph": graph, "protocol": proto.to_string(), "edits": edit}),
            )
            .input(&graph)?
            .output(&out)
            .write_alongside(&out)?;
        }
        Command::Learn { config, out } => learn::run(&config, &out)?,
        Command::Repro { target, out, seed } => repro::run(&target, &out, seed)?,
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn drive(
    q: &TransitionRateMatrix,
    n: usize,
    s0: &str,
    input: Option<&str>,
    stubborn: Option<&str>,
    gains: Option<&str>,
    times: &[f64],
) -> Result<Trajectory> {
    match (stubborn, gains) {
        (Some(spec), None) => {
            // Reduced system: --s0 gives the free nodes' start values, the
            // stubborn nodes hold the assigned values.
            let (indices, values) = parse::stubborn(spec, n)?;
            let rs = reduce_stubborn(q, &indices, &values)?;
            let s0 = parse::vector(s0)?;
            if s0.len() != rs.free_indices().len() {
                bail!(
                    "--s0 needs {} entries (free nodes) with this stubborn set",
                    rs.free_indices().len()
                );
            }
            let traj = rs.trajectory(&s0, times)?;
            let s_star = stubborn_steady_state(&rs)?;
            eprintln!(
                "stubborn fixed point (free nodes, 1-based order {:?}): {:?}",
                rs.free_indices().iter().map(|i| i + 1).collect::<Vec<_>>(),
                s_star.as_slice()
            );
            // Report trajectories on the full node set.
            let values = traj
                .values()
                .iter()
                .map(|v| rs.embed(v))
                .collect::<Vec<_>>();
            Ok(Trajectory::new(
                times.to_vec(),
                values,
                Some(q.protocol()),
                diffnet::dynamics::TrajectorySource::Inhomogeneous,
            )?)
        }
        (None, Some(gain_spec)) => {
            let s0 = parse::vector(s0)?;
            check_s0(&s0, n)?;
            let gains = parse::gains(gain_spec)?;
            let input = input.ok_or_else(|| {
                anyhow::anyhow!("--gains needs --input as the reference signal")
            })?;
            let x = parse::input_signal(input, n)?;
            if gains.beta[1] != 0.0 || gains.beta[2] != 0.0 {
                let resp =
                    pid_expanded_response(q, &gains, &x, &s0, &DVector::zeros(n), times)?;
                eprintln!("closed-loop stability: {:?}", resp.stability);
                Ok(resp.s)
            } else {
                Ok(dynamic_learning_trajectory(q, &gains, &x, &s0, times)?)
            }
        }
        (None, None) => {
            let s0 = parse::vector(s0)?;
            check_s0(&s0, n)?;
            let input = input.ok_or_else(|| {
                anyhow::anyhow!("drive needs --input, --stubborn, or --gains")
            })?;
            let u = parse::input_signal(input, n)?;
            Ok(inhomogeneous_trajectory(q.matrix(), &s0, &u, times)?)
        }
        (Some(_), Some(_)) => bail!("--stubborn and --gains cannot be combined"),
    }
}

fn spectrum_report(q: &TransitionRateMatrix) -> Result<serde_json::Value> {
    let d = SpectralDecomposition::compute(q.matrix())?;
    let steady = steady_state_vectors(q).ok();
    Ok(json!({
        "protocol": q.protocol().to_string(),
        "eigenvalues": d
            .eigenvalues()
            .iter()
            .map(|e| json!({"re": e.re, "im": e.im}))
            .collect::<Vec<_>>(),
        "steady_mode": d.steady_index().map(|k| k + 1),
        "condition": d.condition(),
        "v_rs": steady.as_ref().map(|p| p.v_rs.as_slice().to_vec()),
        "v_ls": steady.as_ref().map(|p| p.v_ls.as_slice().to_vec()),
        "psi": steady.as_ref().map(|p| p.psi),
        "omega": steady.as_ref().map(|p| p.omega),
    }))
}

/// Shared by learn/repro for building conservative action sets.
pub(crate) fn random_complete_actions(
    n: usize,
    count: usize,
    base_seed: u64,
    protocol: Protocol,
) -> Result<Vec<DMatrix<f64>>> {
    (0..count)
        .map(|k| {
            Ok(diffnet::graph::generate_random_graph(
                diffnet::graph::RandomModel::RandomComplete { n },
                base_seed + k as u64,
            )?
            .transition_rate_matrix(protocol)
            .into_matrix())
        })
        .collect()
}
