//! Event-driven stochastic simulation of the two update protocols.
//!
//! Each directed edge carries an independent Poisson clock with rate `r`.
//! The exact scheme draws the next event from the exponential race over all
//! edges; the discretized scheme reproduces the fixed-substep methodology
//! (each edge fires with probability `r * dt` per substep) and exists for
//! comparison rather than accuracy.
//!
//! Trials run in parallel on independent RNG streams derived from
//! `(master seed, trial index)`, and the ensemble reducer accumulates in
//! trial order, so results are bit-identical regardless of thread count.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{Trajectory, TrajectorySource};
use crate::error::{Error, Result};
use crate::graph::{Protocol, WeightedDigraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimulationScheme {
    /// Exponential inter-event times over the edge race; statistically exact.
    ExactEvent,
    /// Fixed substeps per unit time with independent Bernoulli edge firings.
    Discretized { substeps_per_unit: u32 },
}

/// Per-trial trajectories on a common grid plus instance statistics.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub trials: Vec<Trajectory>,
    pub mean: Trajectory,
    /// Standard error of the mean per (time, node).
    pub stderr: Vec<DVector<f64>>,
    pub seed: u64,
    pub scheme: SimulationScheme,
    pub n_trials: usize,
    pub warnings: Vec<String>,
}

impl TrajectoryEnsemble {
    /// Escalate accumulated warnings into an error.
    pub fn require_no_warnings(&self) -> Result<&Self> {
        if self.warnings.is_empty() {
            Ok(self)
        } else {
            Err(Error::BadHorizon(self.warnings.join("; ")))
        }
    }
}

/// Per-element average of the trials, tagged as an ensemble mean.
pub fn ensemble_mean(e: &TrajectoryEnsemble) -> Trajectory {
    e.mean.clone()
}

/// Run `n_trials` independent sample paths of the chosen protocol and
/// scheme, sampled onto `grid`.
#[allow(clippy::too_many_arguments)]
pub fn sample_paths(
    g: &WeightedDigraph,
    protocol: Protocol,
    s0: &DVector<f64>,
    horizon: f64,
    grid: &[f64],
    n_trials: usize,
    seed: u64,
    scheme: SimulationScheme,
) -> Result<TrajectoryEnsemble> {
    if s0.len() != g.node_count() {
        return Err(Error::DimensionMismatch {
            expected: g.node_count(),
            got: s0.len(),
        });
    }
    if !(horizon > 0.0) {
        return Err(Error::BadHorizon(format!("horizon {horizon} must be > 0")));
    }
    if grid.is_empty()
        || grid.iter().any(|&t| !(0.0..=horizon).contains(&t))
        || grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::BadHorizon(
            "grid must be strictly ascending within [0, horizon]".into(),
        ));
    }
    if n_trials == 0 {
        return Err(Error::BadHorizon("n_trials must be >= 1".into()));
    }

    let mut warnings = Vec::new();
    if g.edges().is_empty() {
        warnings.push("graph has no edges; trajectories are constant".into());
    }
    if let SimulationScheme::Discretized { substeps_per_unit } = scheme {
        if substeps_per_unit == 0 {
            return Err(Error::BadHorizon("substeps_per_unit must be >= 1".into()));
        }
        let dt = 1.0 / f64::from(substeps_per_unit);
        let max_rate = g.edges().iter().map(|e| e.rate).fold(0.0, f64::max);
        if max_rate * dt > 0.1 {
            warnings.push(format!(
                "Bernoulli approximation is coarse: max rate*dt = {:.3} > 0.1",
                max_rate * dt
            ));
        }
    }

    let values: Vec<Vec<DVector<f64>>> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            match scheme {
                SimulationScheme::ExactEvent => {
                    run_exact(g, protocol, s0, horizon, grid, &mut rng, |_, _| {})
                }
                SimulationScheme::Discretized { substeps_per_unit } => {
                    run_discretized(g, protocol, s0, horizon, grid, substeps_per_unit, &mut rng)
                }
            }
        })
        .collect();

    let n_nodes = s0.len();
    let mut mean = vec![DVector::<f64>::zeros(n_nodes); grid.len()];
    for trial in &values {
        for (acc, v) in mean.iter_mut().zip(trial) {
            *acc += v;
        }
    }
    for acc in &mut mean {
        *acc /= n_trials as f64;
    }

    let mut stderr = vec![DVector::<f64>::zeros(n_nodes); grid.len()];
    if n_trials >= 2 {
        for trial in &values {
            for ((acc, v), m) in stderr.iter_mut().zip(trial).zip(&mean) {
                let d = v - m;
                *acc += d.component_mul(&d);
            }
        }
        let denom = ((n_trials - 1) * n_trials) as f64;
        for acc in &mut stderr {
            *acc = acc.map(|x| (x / denom).sqrt());
        }
    }

    let trials = values
        .into_iter()
        .map(|v| Trajectory::new(grid.to_vec(), v, Some(protocol), TrajectorySource::Analytic))
        .collect::<Result<Vec<_>>>()?;
    let mean = Trajectory::new(
        grid.to_vec(),
        mean,
        Some(protocol),
        TrajectorySource::EnsembleMean,
    )?;

    Ok(TrajectoryEnsemble {
        trials,
        mean,
        stderr,
        seed,
        scheme,
        n_trials,
        warnings,
    })
}

/// One exact-event trial recording every post-event state; used by the
/// pathwise property tests.
pub fn sample_event_log(
    g: &WeightedDigraph,
    protocol: Protocol,
    s0: &DVector<f64>,
    horizon: f64,
    seed: u64,
) -> Vec<(f64, DVector<f64>)> {
    let mut rng = trial_rng(seed, 0);
    let mut log = Vec::new();
    run_exact(g, protocol, s0, horizon, &[horizon], &mut rng, |t, s| {
        log.push((t, s.clone()));
    });
    log
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn apply_update(protocol: Protocol, s: &mut DVector<f64>, from: usize, to: usize, c: f64) {
    match protocol {
        Protocol::Conservative => {
            // Transfer form keeps the per-path total exact.
            let transfer = c * s[to];
            s[from] += transfer;
            s[to] -= transfer;
        }
        Protocol::NonConservative => {
            s[from] = c * s[to] + (1.0 - c) * s[from];
        }
    }
}

fn exp_variate<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln() / rate
}

fn run_exact<R: Rng>(
    g: &WeightedDigraph,
    protocol: Protocol,
    s0: &DVector<f64>,
    horizon: f64,
    grid: &[f64],
    rng: &mut R,
    mut on_event: impl FnMut(f64, &DVector<f64>),
) -> Vec<DVector<f64>> {
    let mut cumulative = Vec::with_capacity(g.edges().len());
    let mut total = 0.0;
    for e in g.edges() {
        total += e.rate;
        cumulative.push(total);
    }

    let mut state = s0.clone();
    let mut out = Vec::with_capacity(grid.len());
    let mut grid_idx = 0;
    let mut t = 0.0;

    if total <= 0.0 {
        while grid_idx < grid.len() {
            out.push(state.clone());
            grid_idx += 1;
        }
        return out;
    }

    loop {
        let t_next = t + exp_variate(rng, total);
        let cutoff = t_next.min(horizon);
        while grid_idx < grid.len() && grid[grid_idx] < cutoff {
            out.push(state.clone());
            grid_idx += 1;
        }
        if t_next > horizon {
            while grid_idx < grid.len() {
                out.push(state.clone());
                grid_idx += 1;
            }
            return out;
        }
        // Winner of the exponential race, proportional to edge rates.
        let pick = rng.random::<f64>() * total;
        let idx = cumulative.partition_point(|&c| c <= pick).min(g.edges().len() - 1);
        let e = &g.edges()[idx];
        apply_update(protocol, &mut state, e.from, e.to, e.confidence);
        t = t_next;
        on_event(t, &state);
    }
}

fn run_discretized<R: Rng>(
    g: &WeightedDigraph,
    protocol: Protocol,
    s0: &DVector<f64>,
    horizon: f64,
    grid: &[f64],
    substeps_per_unit: u32,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let dt = 1.0 / f64::from(substeps_per_unit);
    let mut state = s0.clone();
    let mut out = Vec::with_capacity(grid.len());
    let mut grid_idx = 0;
    let mut step: u64 = 0;

    loop {
        let t = step as f64 * dt;
        let t_next = (step + 1) as f64 * dt;
        let cutoff = t_next.min(horizon);
        while grid_idx < grid.len() && (grid[grid_idx] < cutoff || grid[grid_idx] <= t) {
            out.push(state.clone());
            grid_idx += 1;
        }
        if grid_idx == grid.len() {
            return out;
        }
        if t_next > horizon {
            while grid_idx < grid.len() {
                out.push(state.clone());
                grid_idx += 1;
            }
            return out;
        }
        for e in g.edges() {
            if rng.random::<f64>() < e.rate * dt {
                apply_update(protocol, &mut state, e.from, e.to, e.confidence);
            }
        }
        step += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::expected_trajectory;
    use crate::presets;

    fn grid(to: f64, step: f64) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::new();
        while t <= to + 1e-12 {
            out.push(t);
            t += step;
        }
        out
    }

    #[test]
    fn symmetric_two_node_equilibrates() {
        let g = WeightedDigraphFixture::two_node();
        let s0 = DVector::from_vec(vec![1.0, 0.0]);
        let times = grid(20.0, 2.0);
        let e = sample_paths(
            &g,
            Protocol::Conservative,
            &s0,
            20.0,
            &times,
            2000,
            42,
            SimulationScheme::ExactEvent,
        )
        .unwrap();
        let last = e.mean.last_value();
        let se = e.stderr.last().unwrap();
        for i in 0..2 {
            assert!(
                (last[i] - 0.5).abs() <= 3.0 * se[i].max(1e-3),
                "node {i}: {} vs 0.5 (se {})",
                last[i],
                se[i]
            );
        }
    }

    struct WeightedDigraphFixture;
    impl WeightedDigraphFixture {
        fn two_node() -> WeightedDigraph {
            WeightedDigraph::from_weights(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap()
        }
    }

    #[test]
    fn edgeless_graph_is_constant_with_warning() {
        let g = WeightedDigraph::new(3, vec![]).unwrap();
        let s0 = DVector::from_vec(vec![0.1, 0.2, 0.3]);
        let e = sample_paths(
            &g,
            Protocol::Conservative,
            &s0,
            5.0,
            &[0.0, 2.5, 5.0],
            4,
            1,
            SimulationScheme::ExactEvent,
        )
        .unwrap();
        assert!(!e.warnings.is_empty());
        for trial in &e.trials {
            for v in trial.values() {
                assert_eq!(v, &s0);
            }
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let g = presets::path_with_back_weight(5, 0.2).unwrap();
        let s0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let times = grid(5.0, 0.5);
        for scheme in [
            SimulationScheme::ExactEvent,
            SimulationScheme::Discretized {
                substeps_per_unit: 100,
            },
        ] {
            let a = sample_paths(&g, Protocol::Conservative, &s0, 5.0, &times, 32, 7, scheme)
                .unwrap();
            let b = sample_paths(&g, Protocol::Conservative, &s0, 5.0, &times, 32, 7, scheme)
                .unwrap();
            assert_eq!(a.mean.values(), b.mean.values());
            for (x, y) in a.trials.iter().zip(&b.trials) {
                assert_eq!(x.values(), y.values());
            }
            let c = sample_paths(&g, Protocol::Conservative, &s0, 5.0, &times, 32, 8, scheme)
                .unwrap();
            assert_ne!(a.mean.values(), c.mean.values());
        }
    }

    #[test]
    fn mean_is_recomputable_from_trials() {
        let g = presets::path_with_back_weight(4, 0.5).unwrap();
        let s0 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let times = [0.0, 1.0, 2.0];
        let e = sample_paths(
            &g,
            Protocol::NonConservative,
            &s0,
            2.0,
            &times,
            10,
            3,
            SimulationScheme::ExactEvent,
        )
        .unwrap();
        for (k, _) in times.iter().enumerate() {
            let mut acc = DVector::zeros(4);
            for t in &e.trials {
                acc += t.value_at(k);
            }
            acc /= 10.0;
            assert!((acc - e.mean.value_at(k)).amax() < 1e-15);
        }
    }

    #[test]
    fn single_trial_mean_is_the_trial() {
        let g = presets::path_with_back_weight(4, 0.5).unwrap();
        let s0 = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let e = sample_paths(
            &g,
            Protocol::Conservative,
            &s0,
            3.0,
            &[0.0, 1.5, 3.0],
            1,
            5,
            SimulationScheme::ExactEvent,
        )
        .unwrap();
        assert_eq!(e.mean.values(), e.trials[0].values());
    }

    #[test]
    fn polling_ensemble_approaches_consensus_value() {
        // Asymmetric path under the polling rule: by t = 15 the downstream
        // nodes sit near the analytic consensus value.
        let g = presets::path_with_back_weight(5, 0.2).unwrap();
        let s0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let q = g.transition_rate_matrix(Protocol::NonConservative);
        let c_v = crate::dynamics::consensus_value(&q, &s0).unwrap();
        let e = sample_paths(
            &g,
            Protocol::NonConservative,
            &s0,
            15.0,
            &[15.0],
            2000,
            29,
            SimulationScheme::ExactEvent,
        )
        .unwrap();
        let last = e.mean.last_value();
        for node in 2..5 {
            assert!(
                (last[node] - c_v).abs() < 0.02,
                "node {}: {} vs {c_v}",
                node + 1,
                last[node]
            );
        }
    }

    #[test]
    fn two_constant_trials_average_elementwise() {
        // Degenerate but direct check of the reducer.
        let g = WeightedDigraph::new(2, vec![]).unwrap();
        let s0 = DVector::from_vec(vec![2.0, 4.0]);
        let e = sample_paths(
            &g,
            Protocol::Conservative,
            &s0,
            1.0,
            &[0.0, 1.0],
            2,
            9,
            SimulationScheme::ExactEvent,
        )
        .unwrap();
        assert_eq!(ensemble_mean(&e).value_at(1), &s0);
        assert_eq!(e.mean.source, TrajectorySource::EnsembleMean);
    }

    #[test]
    fn pathwise_conservation_under_p1() {
        let g = presets::path_with_back_weight(5, 0.2).unwrap();
        let s0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let log = sample_event_log(&g, Protocol::Conservative, &s0, 50.0, 11);
        assert!(!log.is_empty());
        let total0 = s0.sum();
        for (_, s) in &log {
            assert!((s.sum() - total0).abs() < 1e-12);
        }
    }

    #[test]
    fn pathwise_convexity_under_p2() {
        let g = presets::path_with_back_weight(5, 0.37).unwrap();
        let s0 = DVector::from_vec(vec![0.0, 0.3, -1.0, 0.0, 1.0]);
        let log = sample_event_log(&g, Protocol::NonConservative, &s0, 50.0, 13);
        let mut lo = s0.min();
        let mut hi = s0.max();
        for (_, s) in &log {
            let slack = 1e-12 * (hi - lo).abs().max(1.0);
            assert!(s.min() >= lo - slack && s.max() <= hi + slack);
            lo = lo.min(s.min());
            hi = hi.max(s.max());
        }
    }

    #[test]
    fn discretized_matches_analytic_roughly() {
        let g = presets::path_with_back_weight(5, 0.2).unwrap();
        let s0 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let times = grid(6.0, 1.0);
        let q = g.transition_rate_matrix(Protocol::Conservative);
        let analytic = expected_trajectory(&q, &s0, &times).unwrap();
        let e = sample_paths(
            &g,
            Protocol::Conservative,
            &s0,
            6.0,
            &times,
            3000,
            17,
            SimulationScheme::Discretized {
                substeps_per_unit: 1000,
            },
        )
        .unwrap();
        assert!(e.warnings.is_empty());
        for (k, _) in times.iter().enumerate() {
            let diff = (e.mean.value_at(k) - analytic.value_at(k)).amax();
            assert!(diff < 0.05, "t={} diff={diff}", times[k]);
        }
    }

    #[test]
    fn coarse_discretization_warns_and_escalates() {
        let g = WeightedDigraph::new(
            2,
            vec![crate::graph::Edge::new(0, 1, 1.0, 5.0), crate::graph::Edge::new(1, 0, 1.0, 5.0)],
        )
        .unwrap();
        let s0 = DVector::from_vec(vec![1.0, 0.0]);
        let e = sample_paths(
            &g,
            Protocol::Conservative,
            &s0,
            1.0,
            &[0.0, 1.0],
            2,
            0,
            SimulationScheme::Discretized {
                substeps_per_unit: 10,
            },
        )
        .unwrap();
        assert_eq!(e.warnings.len(), 1);
        assert!(e.require_no_warnings().is_err());
    }

    #[test]
    fn rejects_bad_grid() {
        let g = presets::path_with_back_weight(3, 1.0).unwrap();
        let s0 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            sample_paths(
                &g,
                Protocol::Conservative,
                &s0,
                -1.0,
                &[0.0],
                1,
                0,
                SimulationScheme::ExactEvent
            ),
            Err(Error::BadHorizon(_))
        ));
        assert!(sample_paths(
            &g,
            Protocol::Conservative,
            &s0,
            1.0,
            &[0.0, 2.0],
            1,
            0,
            SimulationScheme::ExactEvent
        )
        .is_err());
    }
}
