//! Offline replay ("matching") evaluation under uniform logging.
//!
//! Events are visited in log order. The policy picks an arm for each
//! event's context; only when the pick equals the logged arm is the logged
//! reward counted and fed back to the policy.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{quadratic_expand, BanditError, CohortThompson, Context, LinUcb, Policy};
use crate::binning::{bin_feature, BinConfig};
use crate::data::{summarize, BanditLog, Column};

pub const FLAG_NON_UNIFORM: &str = "non_uniform_logging";
pub const FLAG_NO_MATCHES: &str = "no_matches";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub policy: String,
    pub features: Vec<String>,
    pub matched_count: u64,
    pub matched_reward_sum: u64,
    pub average_reward: f64,
    /// Wall-clock seconds, including context preparation.
    pub duration_secs: f64,
    pub flags: Vec<String>,
}

impl ReplayResult {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &ReplayResult) -> bool {
        ReplayResult { duration_secs: 0.0, ..self.clone() } == ReplayResult { duration_secs: 0.0, ..other.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expansion {
    Linear,
    /// Appends the square of every continuous coordinate.
    Quadratic,
}

/// Precomputed per-event contexts for a feature subset.
///
/// Vectors hold standardized continuous features (optionally with their
/// squares), one-hot categorical bins, and a trailing intercept. Cohorts are
/// the mixed-radix combination of each feature's bin index.
#[derive(Debug, Clone)]
pub struct ContextEncoder {
    features: Vec<String>,
    dim: usize,
    vectors: Vec<f64>,
    cohorts: Vec<usize>,
    cohort_count: usize,
}

impl ContextEncoder {
    pub fn new(
        log: &BanditLog,
        features: &[String],
        bins: &BinConfig,
        expansion: Expansion,
    ) -> Result<Self, BanditError> {
        if features.is_empty() {
            return Err(BanditError::EmptyFeatureSubset);
        }
        let indices = features
            .iter()
            .map(|f| log.feature_index(f).ok_or_else(|| BanditError::UnknownFeature(f.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let n = log.len();

        let mut standardized: Vec<Vec<f64>> = Vec::new();
        let mut one_hot: Vec<(usize, Vec<u32>)> = Vec::new();
        let mut cohorts = vec![0usize; n];
        let mut cohort_count = 1usize;
        for &index in &indices {
            let assignment = bin_feature(log, index, bins)?;
            for (cohort, &b) in cohorts.iter_mut().zip(&assignment.bins) {
                *cohort = *cohort * assignment.bin_count + b as usize;
            }
            cohort_count *= assignment.bin_count;
            match log.column(index) {
                Column::Continuous(values) => standardized.push(standardize(values)),
                Column::Categorical { .. } => one_hot.push((assignment.bin_count, assignment.bins)),
            }
        }

        let continuous = match expansion {
            Expansion::Linear => standardized.len(),
            Expansion::Quadratic => 2 * standardized.len(),
        };
        let dim = continuous + one_hot.iter().map(|(width, _)| width).sum::<usize>() + 1;
        let mut vectors = vec![0.0; n * dim];
        let mut raw = vec![0.0; standardized.len()];
        for (row, out) in vectors.chunks_exact_mut(dim).enumerate() {
            for (slot, column) in raw.iter_mut().zip(&standardized) {
                *slot = column[row];
            }
            match expansion {
                Expansion::Linear => out[..continuous].copy_from_slice(&raw),
                Expansion::Quadratic => out[..continuous].copy_from_slice(&quadratic_expand(&raw)),
            }
            let mut offset = continuous;
            for (width, bins) in &one_hot {
                out[offset + bins[row] as usize] = 1.0;
                offset += width;
            }
            out[dim - 1] = 1.0;
        }
        Ok(ContextEncoder { features: features.to_vec(), dim, vectors, cohorts, cohort_count })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cohort_count(&self) -> usize {
        self.cohort_count
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn context(&self, row: usize) -> Context<'_> {
        Context { vector: &self.vectors[row * self.dim..(row + 1) * self.dim], cohort: self.cohorts[row] }
    }
}

/// Zero mean, unit population variance; a constant column maps to zeros.
fn standardize(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd > 0.0 {
        values.iter().map(|v| (v - mean) / sd).collect()
    } else {
        vec![0.0; values.len()]
    }
}

/// Always plays the same arm.
#[derive(Debug, Clone, Copy)]
pub struct FixedArm(pub usize);

impl Policy for FixedArm {
    fn select(&mut self, _: &Context<'_>) -> Result<usize, BanditError> {
        Ok(self.0)
    }

    fn update(&mut self, _: &Context<'_>, _: usize, _: u8) -> Result<(), BanditError> {
        Ok(())
    }
}

fn replay_loop<'c, P, F>(log: &BanditLog, policy: &mut P, context: F) -> Result<(u64, u64), BanditError>
where
    P: Policy + ?Sized,
    F: Fn(usize) -> Context<'c>,
{
    let mut matched = 0u64;
    let mut reward_sum = 0u64;
    for (row, (&logged, &reward)) in log.arms().iter().zip(log.rewards()).enumerate() {
        let ctx = context(row);
        let chosen = policy.select(&ctx)?;
        if chosen >= log.k() {
            return Err(BanditError::InvalidArm { arm: chosen, k: log.k() });
        }
        if chosen == logged {
            matched += 1;
            reward_sum += u64::from(reward);
            policy.update(&ctx, chosen, reward)?;
        }
    }
    Ok((matched, reward_sum))
}

fn uniformity_flags(log: &BanditLog) -> Vec<String> {
    let n = log.len() as f64;
    let share = 1.0 / log.k() as f64;
    let sd = (n * share * (1.0 - share)).sqrt();
    let skewed = log.arm_pulls().iter().any(|&pulls| (pulls as f64 - n * share).abs() > 4.0 * sd);
    if skewed {
        vec![FLAG_NON_UNIFORM.to_string()]
    } else {
        Vec::new()
    }
}

fn finish(
    log: &BanditLog,
    policy: &str,
    features: Vec<String>,
    (matched, reward_sum): (u64, u64),
    started: Instant,
) -> ReplayResult {
    let mut flags = uniformity_flags(log);
    if matched == 0 {
        flags.push(FLAG_NO_MATCHES.to_string());
    }
    ReplayResult {
        policy: policy.to_string(),
        features,
        matched_count: matched,
        matched_reward_sum: reward_sum,
        average_reward: if matched > 0 { reward_sum as f64 / matched as f64 } else { 0.0 },
        duration_secs: started.elapsed().as_secs_f64(),
        flags,
    }
}

/// Replays `log` against `policy` using contexts from `encoder`.
pub fn replay_evaluate<P: Policy + ?Sized>(
    log: &BanditLog,
    policy: &mut P,
    encoder: &ContextEncoder,
    name: &str,
) -> Result<ReplayResult, BanditError> {
    let started = Instant::now();
    let totals = replay_loop(log, policy, |row| encoder.context(row))?;
    Ok(finish(log, name, encoder.features().to_vec(), totals, started))
}

/// Replay reward of always playing the arm with the best overall rate.
pub fn global_winner_baseline(log: &BanditLog) -> ReplayResult {
    let started = Instant::now();
    let arm = summarize(log).best_arm().unwrap_or(0);
    let totals =
        replay_loop(log, &mut FixedArm(arm), |_| Context { vector: &[], cohort: 0 }).expect("fixed arm is in range");
    finish(log, &format!("global-winner(arm {arm})"), Vec::new(), totals, started)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "linucb")]
    LinUcb,
    #[serde(rename = "qlinucb")]
    QuadraticLinUcb,
    #[serde(rename = "cohort-ts")]
    CohortTs,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::LinUcb, PolicyKind::QuadraticLinUcb, PolicyKind::CohortTs];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::LinUcb => "linucb",
            PolicyKind::QuadraticLinUcb => "qlinucb",
            PolicyKind::CohortTs => "cohort-ts",
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown policy `{s}`, expected linucb, qlinucb or cohort-ts"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayConfig {
    pub policy: PolicyKind,
    pub features: Vec<String>,
    pub alpha_ucb: f64,
    pub seed: u64,
    pub bins: BinConfig,
}

impl ReplayConfig {
    pub fn new(policy: PolicyKind, features: Vec<String>) -> Self {
        ReplayConfig { policy, features, alpha_ucb: 1.0, seed: 0, bins: BinConfig::default() }
    }
}

/// Builds contexts and the policy from `config`, then replays. The reported
/// duration covers both.
pub fn run_replay(log: &BanditLog, config: &ReplayConfig) -> Result<ReplayResult, BanditError> {
    let started = Instant::now();
    let expansion = match config.policy {
        PolicyKind::QuadraticLinUcb => Expansion::Quadratic,
        _ => Expansion::Linear,
    };
    let encoder = ContextEncoder::new(log, &config.features, &config.bins, expansion)?;
    let totals = match config.policy {
        PolicyKind::LinUcb | PolicyKind::QuadraticLinUcb => {
            let mut policy = LinUcb::new(log.k(), encoder.dim(), config.alpha_ucb)?;
            replay_loop(log, &mut policy, |row| encoder.context(row))?
        }
        PolicyKind::CohortTs => {
            let mut policy = CohortThompson::new(encoder.cohort_count(), log.k(), config.seed)?;
            replay_loop(log, &mut policy, |row| encoder.context(row))?
        }
    };
    Ok(finish(log, config.policy.name(), config.features.clone(), totals, started))
}
