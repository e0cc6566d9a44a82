//! The `learn` subcommand: JSON config in, learning artifacts out.

use anyhow::{bail, Context, Result};
use diffnet::graph::{GraphFile, Protocol};
use diffnet::mdp::{run_qlearning_trials, MdpConfig, RewardMode};
use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::json;
use std::io::Write;
use std::path::Path;

use crate::manifest::RunManifest;

/// On-disk learning configuration. States and nodes are 1-based.
#[derive(Debug, Deserialize)]
struct LearnFile {
    protocol: Protocol,
    actions: ActionSource,
    /// Per-state rewards (applied for every action).
    #[serde(default)]
    rewards: Vec<StateReward>,
    mu: f64,
    gamma: f64,
    epsilon: f64,
    steps: u64,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default)]
    seed: u64,
    /// "max" applies the max-over-actions reward term; "realized" credits
    /// the reward of the action actually active.
    #[serde(default = "default_reward_mode")]
    reward_mode: String,
    /// Tracked (state, action) pairs, 1-based.
    #[serde(default)]
    tracked: Vec<(usize, usize)>,
    #[serde(default = "default_stride")]
    history_stride: u64,
}

fn default_trials() -> usize {
    1
}
fn default_reward_mode() -> String {
    "max".into()
}
fn default_stride() -> u64 {
    100
}

#[derive(Debug, Deserialize)]
struct StateReward {
    state: usize,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ActionSource {
    /// Complete digraphs with uniform confidences, one per seed offset.
    RandomComplete { n: usize, count: usize, seed: u64 },
    /// Graph files converted under the learning protocol.
    Files(Vec<String>),
}

pub fn run(config_path: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let file: LearnFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", config_path.display()))?;

    let mut manifest_inputs = vec![config_path.to_path_buf()];
    let actions: Vec<DMatrix<f64>> = match &file.actions {
        ActionSource::RandomComplete { n, count, seed } => {
            crate::random_complete_actions(*n, *count, *seed, file.protocol)?
        }
        ActionSource::Files(paths) => paths
            .iter()
            .map(|p| {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {p}"))?;
                let gf: GraphFile = serde_json::from_str(&text)?;
                manifest_inputs.push(p.into());
                Ok(gf
                    .to_graph()?
                    .transition_rate_matrix(file.protocol)
                    .into_matrix())
            })
            .collect::<Result<_>>()?,
    };

    let mut cfg = MdpConfig::new(file.protocol, actions)?;
    cfg.mu = file.mu;
    cfg.gamma = file.gamma;
    cfg.epsilon = file.epsilon;
    cfg.steps = file.steps;
    cfg.seed = file.seed;
    cfg.history_stride = file.history_stride;
    cfg.reward_mode = match file.reward_mode.as_str() {
        "max" => RewardMode::MaxOverActions,
        "realized" => RewardMode::ActiveAction,
        other => bail!("unknown reward_mode {other:?} (want max or realized)"),
    };
    for r in &file.rewards {
        if r.state == 0 {
            bail!("reward states are 1-based");
        }
        cfg = cfg.with_state_rewards(&[r.state - 1], r.value);
    }
    for &(s, a) in &file.tracked {
        if s == 0 || a == 0 {
            bail!("tracked pairs are 1-based");
        }
        cfg.tracked.push((s - 1, a - 1));
    }

    let results = run_qlearning_trials(&cfg, file.trials, file.trials > 1)?;

    std::fs::create_dir_all(out_dir)?;
    let n = results[0].quality.nrows();
    let w = results[0].quality.ncols();

    // Final quality table of the first trial.
    let quality_path = out_dir.join("quality_final.csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&quality_path)?);
        write!(f, "state")?;
        for a in 1..=w {
            write!(f, ",action{a}")?;
        }
        writeln!(f)?;
        for s in 0..n {
            write!(f, "{}", s + 1)?;
            for a in 0..w {
                write!(f, ",{}", results[0].quality[(s, a)])?;
            }
            writeln!(f)?;
        }
    }

    // Tracked quality history of the first trial.
    let history_path = out_dir.join("quality_history.csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&history_path)?);
        write!(f, "step")?;
        for &(s, a) in &cfg.tracked {
            write!(f, ",state{}_action{}", s + 1, a + 1)?;
        }
        writeln!(f)?;
        for (step, values) in &results[0].quality_history {
            write!(f, "{step}")?;
            for v in values {
                write!(f, ",{v}")?;
            }
            writeln!(f)?;
        }
    }

    // Sampled reward trace of the first trial.
    let reward_path = out_dir.join("reward_trace.csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&reward_path)?);
        writeln!(f, "step,reward,cumulative")?;
        for (step, r, c) in &results[0].reward_trace {
            writeln!(f, "{step},{r},{c}")?;
        }
    }

    // Stationary distribution per trial plus the mean row.
    let v0_path = out_dir.join("v0.csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&v0_path)?);
        write!(f, "trial")?;
        for i in 1..=n {
            write!(f, ",node{i}")?;
        }
        writeln!(f)?;
        let mut mean = vec![0.0; n];
        for (k, r) in results.iter().enumerate() {
            write!(f, "{k}")?;
            for (i, m) in mean.iter_mut().enumerate() {
                *m += r.stationary[i] / results.len() as f64;
                write!(f, ",{}", r.stationary[i])?;
            }
            writeln!(f)?;
        }
        write!(f, "mean")?;
        for m in &mean {
            write!(f, ",{m}")?;
        }
        writeln!(f)?;
    }

    // Per-trial seeds for independent reproduction.
    let seeds_path = out_dir.join("seeds.json");
    let seeds: Vec<u64> = results.iter().map(|r| r.seed).collect();
    std::fs::write(&seeds_path, serde_json::to_string_pretty(&seeds)?)?;

    let mut manifest = RunManifest::new(
        "learn",
        json!({"config": config_path, "trials": file.trials, "steps": file.steps}),
    )
    .seed(file.seed);
    for p in &manifest_inputs {
        manifest = manifest.input(p)?;
    }
    manifest
        .output(&quality_path)
        .output(&history_path)
        .output(&reward_path)
        .output(&v0_path)
        .output(&seeds_path)
        .write_alongside(out_dir)?;
    Ok(())
}
