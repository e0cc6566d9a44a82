//! Adaptive structure control as a Markov decision process.
//!
//! States are the network's agents; actions are candidate rate matrices.
//! The walker follows the evolving grand matrix `Q_g`: after every jump the
//! quality of the outgoing (state, action) pair is updated, a new action is
//! drawn epsilon-greedily, and the arrival state's column (P1) or row (P2)
//! of `Q_g` is replaced from the chosen action matrix. Whole columns of
//! column-generators (rows of row-generators) sum to zero on their own, so
//! `Q_g` stays a valid generator through every replacement.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Protocol;
use crate::spectral::{is_ctmc_generator, null_vectors};

/// Which reward enters the quality update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    /// `max_W' R(X_next, W')` — the update as specified.
    MaxOverActions,
    /// `R(X_next, W_active)` — reward of the action actually taken.
    ActiveAction,
}

/// Fully specified learning run.
#[derive(Debug, Clone)]
pub struct MdpConfig {
    pub protocol: Protocol,
    /// Candidate rate matrices; all must be valid generators.
    pub actions: Vec<DMatrix<f64>>,
    /// `rewards[(state, action)]`.
    pub rewards: DMatrix<f64>,
    /// Learning rate in (0, 1].
    pub mu: f64,
    /// Discount in (0, 1).
    pub gamma: f64,
    /// Exploitation probability in [0, 1].
    pub epsilon: f64,
    pub steps: u64,
    pub seed: u64,
    pub initial_state: usize,
    pub initial_grand: DMatrix<f64>,
    /// Warm-start quality table; zeros when absent.
    pub initial_quality: Option<DMatrix<f64>>,
    pub reward_mode: RewardMode,
    /// (state, action) pairs whose quality is recorded along the run.
    pub tracked: Vec<(usize, usize)>,
    /// Record tracked qualities and rewards every `history_stride` steps.
    pub history_stride: u64,
}

impl MdpConfig {
    /// State-independent defaults around a given action set: zero rewards,
    /// grand matrix from action 0.
    pub fn new(protocol: Protocol, actions: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = actions.first().map_or(0, DMatrix::nrows);
        let w = actions.len();
        let initial_grand = actions
            .first()
            .cloned()
            .ok_or_else(|| Error::BadConfig("action set is empty".into()))?;
        Ok(MdpConfig {
            protocol,
            actions,
            rewards: DMatrix::zeros(n, w),
            mu: 0.2,
            gamma: 0.995,
            epsilon: 0.4,
            steps: 10_000,
            seed: 0,
            initial_state: 0,
            initial_grand,
            initial_quality: None,
            reward_mode: RewardMode::MaxOverActions,
            tracked: Vec::new(),
            history_stride: 100,
        })
    }

    /// Reward `value` whenever the state lands on one of `states`,
    /// independent of the action.
    pub fn with_state_rewards(mut self, states: &[usize], value: f64) -> Self {
        for &s in states {
            for a in 0..self.rewards.ncols() {
                self.rewards[(s, a)] = value;
            }
        }
        self
    }

    fn state_count(&self) -> usize {
        self.actions.first().map_or(0, DMatrix::nrows)
    }

    fn validate(&self) -> Result<()> {
        let n = self.state_count();
        let w = self.actions.len();
        if w == 0 || n == 0 {
            return Err(Error::BadConfig("need at least one action and one state".into()));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::BadConfig(format!("mu {} not in (0,1]", self.mu)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::BadConfig(format!("gamma {} not in (0,1)", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::BadConfig(format!("epsilon {} not in [0,1]", self.epsilon)));
        }
        if self.initial_state >= n {
            return Err(Error::BadConfig(format!(
                "initial state {} out of range",
                self.initial_state
            )));
        }
        if self.rewards.nrows() != n || self.rewards.ncols() != w {
            return Err(Error::BadConfig("reward table shape mismatch".into()));
        }
        if self.history_stride == 0 {
            return Err(Error::BadConfig("history_stride must be >= 1".into()));
        }
        for (k, a) in self.actions.iter().enumerate() {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::BadConfig(format!("action {k} has wrong shape")));
            }
            let scale = a.amax().max(f64::MIN_POSITIVE);
            if !is_ctmc_generator(a, self.protocol, 1e-9 * scale).is_generator {
                return Err(Error::BadConfig(format!(
                    "action {k} is not a valid {} generator",
                    self.protocol
                )));
            }
        }
        let scale = self.initial_grand.amax().max(f64::MIN_POSITIVE);
        if self.initial_grand.nrows() != n
            || !is_ctmc_generator(&self.initial_grand, self.protocol, 1e-9 * scale).is_generator
        {
            return Err(Error::BadConfig("initial grand matrix is not a valid generator".into()));
        }
        for &(s, a) in &self.tracked {
            if s >= n || a >= w {
                return Err(Error::BadConfig(format!("tracked pair ({s},{a}) out of range")));
            }
        }
        if let Some(t) = &self.initial_quality {
            if t.nrows() != n || t.ncols() != w {
                return Err(Error::BadConfig("initial quality table shape mismatch".into()));
            }
        }
        Ok(())
    }
}

/// Output of one learning run.
#[derive(Debug, Clone)]
pub struct LearningResult {
    /// Quality table `V(state, action)`.
    pub quality: DMatrix<f64>,
    /// Final grand matrix.
    pub grand: DMatrix<f64>,
    /// Jump arrivals per state.
    pub visit_counts: Vec<u64>,
    /// Continuous time spent in each state (exponential holding times).
    pub time_in_state: Vec<f64>,
    /// `(step, instantaneous reward, cumulative reward)` samples.
    pub reward_trace: Vec<(u64, f64, f64)>,
    /// `(step, tracked quality values)` samples.
    pub quality_history: Vec<(u64, Vec<f64>)>,
    /// Stationary distribution of the final grand matrix.
    pub stationary: DVector<f64>,
    /// Largest quality value observed anywhere during the run.
    pub quality_max_seen: f64,
    pub seed: u64,
}

/// Epsilon-greedy draw: with probability `epsilon` the argmax (ties to the
/// lowest index), otherwise uniformly random.
pub fn epsilon_greedy<R: Rng>(row: &[f64], epsilon: f64, rng: &mut R) -> usize {
    debug_assert!(!row.is_empty());
    if rng.random::<f64>() < epsilon {
        let mut best = 0;
        for (k, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = k;
            }
        }
        best
    } else {
        rng.random_range(0..row.len())
    }
}

/// Stationary distribution `v0` of a generator: normalized nonnegative null
/// vector (right for P1, left for P2).
pub fn stationary_distribution(q: &DMatrix<f64>, protocol: Protocol) -> Result<DVector<f64>> {
    let n = q.nrows();
    // Reducibility shows up as a second near-zero singular value.
    let svd = q.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    let scale = sv.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    if n > 1 && sv[1] <= 1e-9 * scale {
        return Err(Error::Reducible);
    }

    let (right, left) = null_vectors(q)?;
    let mut v = match protocol {
        Protocol::Conservative => right,
        Protocol::NonConservative => left,
    };
    if v.iter().any(|&x| x < -1e-9) {
        return Err(Error::Reducible);
    }
    for x in v.iter_mut() {
        *x = x.max(0.0);
    }
    let sum = v.sum();
    if sum <= 0.0 {
        return Err(Error::Reducible);
    }
    Ok(v / sum)
}

/// Run tabular Q-learning over the action set.
pub fn run_qlearning(cfg: &MdpConfig) -> Result<LearningResult> {
    cfg.validate()?;
    let n = cfg.state_count();
    let w = cfg.actions.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut quality = cfg
        .initial_quality
        .clone()
        .unwrap_or_else(|| DMatrix::zeros(n, w));
    let mut grand = cfg.initial_grand.clone();
    let mut visit_counts = vec![0u64; n];
    let mut time_in_state = vec![0.0f64; n];
    let mut reward_trace = Vec::new();
    let mut quality_history = Vec::new();
    let mut cumulative_reward = 0.0;
    let mut quality_max_seen = 0.0f64;

    let mut state = cfg.initial_state;
    // The first action precedes any jump; draw it from the initial state's
    // (all-zero) quality row.
    let mut active = epsilon_greedy(quality.row(state).transpose().as_slice(), cfg.epsilon, &mut rng);

    let generator_check_stride = 10_000u64;
    let grand_scale = |g: &DMatrix<f64>| g.amax().max(f64::MIN_POSITIVE);

    for step in 0..cfg.steps {
        // Outgoing rate of the current state under the grand matrix.
        let rate = -grand[(state, state)];
        if rate <= 1e-300 {
            return Err(Error::AbsorbingState { state, rate });
        }
        let holding = -(1.0 - rng.random::<f64>()).ln() / rate;
        time_in_state[state] += holding;

        // Jump kernel: column reading for P1, row reading for P2.
        let pick = rng.random::<f64>() * rate;
        let mut acc = 0.0;
        let mut next = usize::MAX;
        for cand in 0..n {
            if cand == state {
                continue;
            }
            let r = match cfg.protocol {
                Protocol::Conservative => grand[(cand, state)],
                Protocol::NonConservative => grand[(state, cand)],
            };
            acc += r.max(0.0);
            if pick < acc {
                next = cand;
                break;
            }
        }
        if next == usize::MAX {
            // Rounding pushed the accumulated rate below the draw; take the
            // last positive candidate.
            next = (0..n)
                .rev()
                .find(|&cand| {
                    cand != state
                        && match cfg.protocol {
                            Protocol::Conservative => grand[(cand, state)],
                            Protocol::NonConservative => grand[(state, cand)],
                        } > 0.0
                })
                .ok_or(Error::AbsorbingState { state, rate })?;
        }
        visit_counts[next] += 1;

        // Quality update for the outgoing pair.
        let reward_term = match cfg.reward_mode {
            RewardMode::MaxOverActions => {
                (0..w).map(|a| cfg.rewards[(next, a)]).fold(f64::NEG_INFINITY, f64::max)
            }
            RewardMode::ActiveAction => cfg.rewards[(next, active)],
        };
        let best_next = (0..w)
            .map(|a| quality[(next, a)])
            .fold(f64::NEG_INFINITY, f64::max);
        let updated =
            (1.0 - cfg.mu) * quality[(state, active)] + cfg.mu * (reward_term + cfg.gamma * best_next);
        quality[(state, active)] = updated;
        quality_max_seen = quality_max_seen.max(updated);
        cumulative_reward += reward_term;

        // Choose the next action and swap its column/row into the grand
        // matrix at the arrival state.
        let chosen = epsilon_greedy(quality.row(next).transpose().as_slice(), cfg.epsilon, &mut rng);
        match cfg.protocol {
            Protocol::Conservative => {
                grand.set_column(next, &cfg.actions[chosen].column(next).into_owned());
            }
            Protocol::NonConservative => {
                grand.set_row(next, &cfg.actions[chosen].row(next).into_owned());
            }
        }

        if (step + 1) % generator_check_stride == 0 {
            let report = is_ctmc_generator(&grand, cfg.protocol, 1e-9 * grand_scale(&grand));
            assert!(
                report.is_generator,
                "grand matrix lost generator validity at step {step}"
            );
        }
        if step % cfg.history_stride == 0 {
            reward_trace.push((step, reward_term, cumulative_reward));
            if !cfg.tracked.is_empty() {
                quality_history.push((
                    step,
                    cfg.tracked.iter().map(|&(s, a)| quality[(s, a)]).collect(),
                ));
            }
        }

        state = next;
        active = chosen;
    }

    let stationary = stationary_distribution(&grand, cfg.protocol)?;
    Ok(LearningResult {
        quality,
        grand,
        visit_counts,
        time_in_state,
        reward_trace,
        quality_history,
        stationary,
        quality_max_seen,
        seed: cfg.seed,
    })
}

/// Independent trials with per-trial seeds (and optionally randomized
/// initial state and grand matrix), run in parallel, returned in trial
/// order.
pub fn run_qlearning_trials(
    base: &MdpConfig,
    n_trials: usize,
    randomize_init: bool,
) -> Result<Vec<LearningResult>> {
    base.validate()?;
    (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut cfg = base.clone();
            let mut seeder = ChaCha8Rng::seed_from_u64(base.seed);
            seeder.set_stream(trial as u64 + 1);
            cfg.seed = seeder.random::<u64>();
            if randomize_init {
                cfg.initial_state = seeder.random_range(0..base.state_count());
                let pick = seeder.random_range(0..base.actions.len());
                cfg.initial_grand = base.actions[pick].clone();
            }
            run_qlearning(&cfg)
        })
        .collect()
}
