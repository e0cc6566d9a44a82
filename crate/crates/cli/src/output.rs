//! File writers: CSV for trajectories, JSON for matrices and reports.

use anyhow::{Context, Result};
use diffnet::dynamics::Trajectory;
use diffnet::graph::Protocol;
use diffnet::monte_carlo::TrajectoryEnsemble;
use diffnet::redesign::RespectrumOutcome;
use diffnet::spectral::{C64, GeneratorViolation};
use nalgebra::DMatrix;
use serde_json::json;
use std::io::Write;
use std::path::{Path, PathBuf};

pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    traj.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

/// `name.csv` -> `name.tag.csv` next to the original.
pub fn sibling(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path.extension().map_or("csv".into(), |e| e.to_string_lossy());
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

pub fn write_stderr_csv(e: &TrajectoryEnsemble, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(w, "t")?;
    for i in 1..=e.mean.node_count() {
        write!(w, ",node{i}")?;
    }
    writeln!(w)?;
    for (t, se) in e.mean.times().iter().zip(&e.stderr) {
        write!(w, "{t}")?;
        for x in se.iter() {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_trials_csv(e: &TrajectoryEnsemble, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(w, "trial,t")?;
    for i in 1..=e.mean.node_count() {
        write!(w, ",node{i}")?;
    }
    writeln!(w)?;
    for (k, trial) in e.trials.iter().enumerate() {
        for (t, v) in trial.times().iter().zip(trial.values()) {
            write!(w, "{k},{t}")?;
            for x in v.iter() {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn write_quasi_csv(times: &[f64], quasi: &[Vec<C64>], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(w, "t")?;
    for k in 1..=quasi.len() {
        write!(w, ",mode{k}_re,mode{k}_im")?;
    }
    writeln!(w)?;
    for (idx, t) in times.iter().enumerate() {
        write!(w, "{t}")?;
        for series in quasi {
            write!(w, ",{},{}", series[idx].re, series[idx].im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Off-diagonal entries of a generator as a 1-based weighted edge list.
pub fn edge_list(q: &DMatrix<f64>, threshold: f64) -> Vec<serde_json::Value> {
    let n = q.nrows();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && q[(i, j)].abs() > threshold {
                edges.push(json!({"from": i + 1, "to": j + 1, "weight": q[(i, j)]}));
            }
        }
    }
    edges
}

pub fn matrix_rows(q: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..q.nrows())
        .map(|i| (0..q.ncols()).map(|j| q[(i, j)]).collect())
        .collect()
}

pub fn write_respectrum_json(
    outcome: &RespectrumOutcome,
    original: &DMatrix<f64>,
    protocol: Protocol,
    path: &Path,
) -> Result<()> {
    let delta = &outcome.q_new - original;
    let violations: Vec<String> = outcome
        .report
        .violations
        .iter()
        .map(|v| match v {
            GeneratorViolation::NegativeOffDiagonal { row, col, value } => {
                format!("negative off-diagonal ({},{}) = {value}", row + 1, col + 1)
            }
            GeneratorViolation::SumNotZero { index, sum } => {
                format!("sum at {} is {sum}", index + 1)
            }
        })
        .collect();
    let doc = json!({
        "protocol": protocol.to_string(),
        "matrix": matrix_rows(&outcome.q_new),
        "is_generator": outcome.report.is_generator,
        "violations": violations,
        "edges": edge_list(&outcome.q_new, 1e-12),
        "delta_edges": edge_list(&delta, 1e-12),
    });
    std::fs::write(path, serde_json::to_string_pretty(&doc)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
