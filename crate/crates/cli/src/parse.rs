//! Parsers for the small argument mini-languages.

use anyhow::{anyhow, bail, Context, Result};
use diffnet::exogenous::InputSignal;
use diffnet::modal::{ControllerKind, ControllerSpec};
use diffnet::monte_carlo::SimulationScheme;
use nalgebra::DVector;
use std::path::Path;

/// Comma-separated float list: `0,0,0,0,1`.
pub fn vector(s: &str) -> Result<DVector<f64>> {
    let values = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {x:?}"))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("empty vector");
    }
    Ok(DVector::from_vec(values))
}

/// Bracketed or bare float list: `[1,0,1,0]` or `1,0,1,0`.
fn bracketed(s: &str) -> Result<DVector<f64>> {
    vector(s.trim().trim_start_matches('[').trim_end_matches(']'))
}

/// Input mini-language: `const:[...]`, `impulse:[...]`, `pw:FILE.csv`.
///
/// The piecewise file holds `t,v1,...,vN` rows (no header) with ascending
/// knots; the value holds from its knot to the next.
pub fn input_signal(spec: &str, n: usize) -> Result<InputSignal> {
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| anyhow!("input spec {spec:?} needs kind:payload"))?;
    let signal = match kind {
        "const" => InputSignal::Constant(bracketed(rest)?),
        "impulse" => InputSignal::Impulse(bracketed(rest)?),
        "pw" => {
            let text = std::fs::read_to_string(Path::new(rest))
                .with_context(|| format!("reading piecewise input {rest}"))?;
            let mut knots = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') || line.starts_with('t') {
                    continue;
                }
                let v = vector(line).with_context(|| format!("{rest}:{}", lineno + 1))?;
                if v.len() != n + 1 {
                    bail!("{rest}:{}: expected t plus {n} values", lineno + 1);
                }
                knots.push((v[0], DVector::from_fn(n, |i, _| v[i + 1])));
            }
            if knots.is_empty() {
                bail!("piecewise input {rest} has no rows");
            }
            InputSignal::Piecewise(knots)
        }
        other => bail!("unknown input kind {other:?} (expected const/impulse/pw)"),
    };
    if signal.dimension() != n {
        bail!(
            "--input has dimension {} but the graph has {n} nodes",
            signal.dimension()
        );
    }
    Ok(signal)
}

/// Stubborn assignment list with 1-based node ids: `3=1.0,5=0.2`.
pub fn stubborn(s: &str, n: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for part in s.split(',') {
        let (node, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("bad --stubborn entry {part:?} (want NODE=VALUE)"))?;
        let node: usize = node.trim().parse().context("stubborn node id")?;
        if node == 0 || node > n {
            bail!("stubborn node {node} outside 1..={n}");
        }
        indices.push(node - 1);
        values.push(value.trim().parse::<f64>().context("stubborn value")?);
    }
    Ok((indices, values))
}

/// Gains: `p:BETA:RHO` (proportional) or `pid:B1,B2,B3:RHO`.
pub fn gains(s: &str) -> Result<diffnet::exogenous::LearningGains> {
    let parts: Vec<&str> = s.split(':').collect();
    let g = match parts.as_slice() {
        ["p", beta, rho] => diffnet::exogenous::LearningGains::proportional(
            beta.parse().context("gain beta")?,
            rho.parse().context("gain rho")?,
        )?,
        ["pid", betas, rho] => {
            let b: Vec<f64> = betas
                .split(',')
                .map(|x| x.parse::<f64>().context("pid gain"))
                .collect::<Result<_>>()?;
            if b.len() != 3 {
                bail!("pid gains need three values B1,B2,B3");
            }
            diffnet::exogenous::LearningGains::pid(b[0], b[1], b[2], rho.parse().context("gain rho")?)?
        }
        _ => bail!("bad --gains {s:?} (want p:BETA:RHO or pid:B1,B2,B3:RHO)"),
    };
    Ok(g)
}

/// Controller: `none`, `p:K`, or `i:K`, applied to a 1-based mode.
pub fn controller(s: &str, mode_1based: usize, n: usize) -> Result<Vec<ControllerSpec>> {
    if mode_1based == 0 || mode_1based > n {
        bail!("--mode {mode_1based} outside 1..={n}");
    }
    let mode = mode_1based - 1;
    let kind = match s.split_once(':') {
        None if s == "none" => ControllerKind::None,
        Some(("p", k)) => ControllerKind::Proportional(k.parse().context("controller gain")?),
        Some(("i", k)) => ControllerKind::Integral(k.parse().context("controller gain")?),
        _ => bail!("bad --ctrl {s:?} (want none, p:K, or i:K)"),
    };
    Ok(match kind {
        ControllerKind::None => vec![],
        kind => vec![ControllerSpec { mode, kind }],
    })
}

/// Scheme: `exact` or `disc:K` substeps per unit time.
pub fn scheme(s: &str) -> Result<SimulationScheme> {
    match s.split_once(':') {
        None if s == "exact" => Ok(SimulationScheme::ExactEvent),
        Some(("disc", k)) => Ok(SimulationScheme::Discretized {
            substeps_per_unit: k.parse().context("substeps")?,
        }),
        _ => bail!("bad --scheme {s:?} (want exact or disc:K)"),
    }
}

/// Eigenvalue edits: `mode=1:-4.5`, comma separated. Modes are 1-based in
/// eigenvalue-sorted order.
pub fn edits(parts: &[String]) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for s in parts.iter().flat_map(|p| p.split(',')) {
        let rest = s
            .trim()
            .strip_prefix("mode=")
            .ok_or_else(|| anyhow!("bad --edit {s:?} (want mode=M:VALUE)"))?;
        let (mode, value) = rest
            .split_once(':')
            .ok_or_else(|| anyhow!("bad --edit {s:?} (want mode=M:VALUE)"))?;
        let mode: usize = mode.parse().context("edit mode index")?;
        if mode == 0 {
            bail!("edit modes are 1-based");
        }
        out.push((mode - 1, value.parse::<f64>().context("edit value")?));
    }
    if out.is_empty() {
        bail!("no edits given");
    }
    Ok(out)
}

/// Uniform grid 0..=horizon with step dt.
pub fn time_grid(horizon: f64, dt: f64) -> Result<Vec<f64>> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        bail!("need positive --horizon and --dt");
    }
    let mut t = 0.0;
    let mut out = Vec::new();
    while t <= horizon + 1e-12 {
        out.push(t);
        t += dt;
    }
    Ok(out)
}
