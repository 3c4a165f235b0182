//! Model-free feature importance for contextual bandits.
//!
//! Two scores are computed from a feature's [`CountsTable`]:
//!
//! * **HIE** (heterogeneous incremental effect): the sample-weighted gain of
//!   picking each bin's winning arm instead of the context-free winner.
//! * **HDD** (heterogeneous distribution divergence): the sample-weighted
//!   pairwise KL divergence among the arms' reward distributions inside each
//!   bin, minus the same divergence computed without context.
//!
//! Both are min-max normalized across the scored features and mixed into a
//! single ranking score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binning::{bin_feature, build_counts, BinConfig, BinningError, CountsTable};
use crate::data::BanditLog;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("no arm has any observations")]
    NoDefinedArm,
    #[error("global winner {arm} has no observations in bin {bin}")]
    UnobservedWinner { bin: usize, arm: usize },
    #[error("scoring needs at least 2 arms, got {0}")]
    TooFewArms(usize),
    #[error("feature sets differ: {0} vs {1} scores")]
    MismatchedFeatures(usize, usize),
    #[error("invalid combine config: {0}")]
    Config(String),
    #[error("feature `{feature}`: {source}")]
    Binning {
        feature: String,
        #[source]
        source: BinningError,
    },
}

/// Maximum-likelihood success probability of each arm; `None` for arms
/// without observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmProbabilities(pub Vec<Option<f64>>);

impl ArmProbabilities {
    pub fn from_counts(pulls: &[u64], successes: &[u64]) -> Self {
        ArmProbabilities(pulls.iter().zip(successes).map(|(&n, &s)| (n > 0).then(|| s as f64 / n as f64)).collect())
    }

    pub fn defined(values: &[f64]) -> Self {
        ArmProbabilities(values.iter().copied().map(Some).collect())
    }

    pub fn get(&self, arm: usize) -> Option<f64> {
        self.0.get(arm).copied().flatten()
    }
}

/// Which success rate of the global winner offsets each bin's winner in HIE.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HieOffset {
    /// The global winner's overall rate, constant across bins.
    #[default]
    Global,
    /// The global winner's rate inside the bin being summed.
    PerBin,
}

impl std::str::FromStr for HieOffset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(HieOffset::Global),
            "per_bin" | "per-bin" => Ok(HieOffset::PerBin),
            _ => Err(format!("unknown HIE offset `{s}`, expected global or per_bin")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombineConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Probability floor applied before taking logarithms in KL terms.
    pub kl_floor: f64,
    pub hie_offset: HieOffset,
}

impl Default for CombineConfig {
    fn default() -> Self {
        CombineConfig { alpha1: 0.5, alpha2: 0.5, kl_floor: 1e-6, hie_offset: HieOffset::Global }
    }
}

impl CombineConfig {
    pub fn validate(&self) -> Result<(), ScoreError> {
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0) || self.alpha1 + self.alpha2 <= 0.0 {
            return Err(ScoreError::Config("alpha1 and alpha2 must be non-negative with a positive sum".into()));
        }
        if !(self.kl_floor > 0.0 && self.kl_floor < 0.5) {
            return Err(ScoreError::Config("kl_floor must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

pub const FLAG_CONSTANT: &str = "constant_feature";
pub const FLAG_MERGED: &str = "merged_bins";
pub const FLAG_SINGLE_BIN: &str = "single_bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureReport {
    pub feature: String,
    pub hie: f64,
    pub hdd: f64,
    pub hie_norm: f64,
    pub hdd_norm: f64,
    pub combined: f64,
    pub bins_used: usize,
    pub merges: usize,
    pub flags: Vec<String>,
}

/// Arg max over arms with observations, ties to the lowest arm id.
pub fn winning_arm(probabilities: &ArmProbabilities) -> Result<usize, ScoreError> {
    let mut best: Option<(usize, f64)> = None;
    for (arm, p) in probabilities.0.iter().enumerate() {
        if let Some(p) = *p {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((arm, p));
            }
        }
    }
    best.map(|(arm, _)| arm).ok_or(ScoreError::NoDefinedArm)
}

pub fn hie_score(counts: &CountsTable, offset: HieOffset) -> Result<f64, ScoreError> {
    let global = ArmProbabilities::from_counts(&counts.arm_pulls(), &counts.arm_successes());
    let global_winner = winning_arm(&global)?;
    if counts.bin_count() == 1 {
        return Ok(0.0);
    }
    let global_rate = global.get(global_winner).expect("winner has observations");
    let n = counts.total() as f64;
    let mut score = 0.0;
    for bin in 0..counts.bin_count() {
        let n_b = counts.bin_total(bin);
        if n_b == 0 {
            continue;
        }
        let probs = ArmProbabilities::from_counts(counts.bin_pulls(bin), counts.bin_successes(bin));
        let winner_rate = probs.get(winning_arm(&probs)?).expect("winner has observations");
        let baseline = match offset {
            HieOffset::Global => global_rate,
            HieOffset::PerBin => {
                probs.get(global_winner).ok_or(ScoreError::UnobservedWinner { bin, arm: global_winner })?
            }
        };
        score += n_b as f64 / n * (winner_rate - baseline);
    }
    Ok(score)
}

/// KL divergence in nats between Bernoulli(p) and Bernoulli(q), with both
/// probabilities clamped to `[floor, 1 - floor]`.
pub fn pairwise_kl(p: f64, q: f64, floor: f64) -> f64 {
    let p = p.clamp(floor, 1.0 - floor);
    let q = q.clamp(floor, 1.0 - floor);
    p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln()
}

/// Pull-weighted double sum of pairwise KL divergences among arms.
pub fn generalized_divergence(probabilities: &ArmProbabilities, pulls: &[u64], total: u64, floor: f64) -> f64 {
    debug_assert_eq!(pulls.iter().sum::<u64>(), total);
    if total == 0 {
        return 0.0;
    }
    let total_sq = (total as f64) * (total as f64);
    let mut sum = 0.0;
    for (i, &n_i) in pulls.iter().enumerate() {
        let Some(p_i) = probabilities.get(i) else { continue };
        for (j, &n_j) in pulls.iter().enumerate() {
            if i == j {
                continue;
            }
            let Some(p_j) = probabilities.get(j) else { continue };
            sum += (n_i as f64) * (n_j as f64) / total_sq * pairwise_kl(p_i, p_j, floor);
        }
    }
    sum
}

pub fn hdd_score(counts: &CountsTable, floor: f64) -> Result<f64, ScoreError> {
    let arm_pulls = counts.arm_pulls();
    let n = counts.total();
    if n == 0 {
        return Err(ScoreError::NoDefinedArm);
    }
    if counts.bin_count() == 1 {
        return Ok(0.0);
    }
    let global = ArmProbabilities::from_counts(&arm_pulls, &counts.arm_successes());
    let global_divergence = generalized_divergence(&global, &arm_pulls, n, floor);
    let mut contextual = 0.0;
    for bin in 0..counts.bin_count() {
        let n_b = counts.bin_total(bin);
        let probs = ArmProbabilities::from_counts(counts.bin_pulls(bin), counts.bin_successes(bin));
        contextual += n_b as f64 / n as f64 * generalized_divergence(&probs, counts.bin_pulls(bin), n_b, floor);
    }
    Ok(contextual - global_divergence)
}

/// Min-max rescaling to [0, 1]; a degenerate range maps everything to 0.
pub fn min_max_normalize(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if range.is_nan() || range <= 0.0 {
        return vec![0.0; scores.len()];
    }
    scores.iter().map(|&s| (s - min) / range).collect()
}

pub fn combined_score(hie_norm: &[f64], hdd_norm: &[f64], config: &CombineConfig) -> Result<Vec<f64>, ScoreError> {
    if hie_norm.len() != hdd_norm.len() {
        return Err(ScoreError::MismatchedFeatures(hie_norm.len(), hdd_norm.len()));
    }
    Ok(hie_norm.iter().zip(hdd_norm).map(|(&h, &d)| config.alpha1 * h + config.alpha2 * d).collect())
}

/// Raw per-feature scores before cross-feature normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScore {
    pub feature: String,
    pub hie: f64,
    pub hdd: f64,
    pub bins_used: usize,
    pub merges: usize,
    pub flags: Vec<String>,
}

pub fn score_feature(
    log: &BanditLog,
    index: usize,
    bins: &BinConfig,
    combine: &CombineConfig,
) -> Result<RawScore, ScoreError> {
    let feature = log.descriptors()[index].name.clone();
    let wrap = |source| ScoreError::Binning { feature: feature.clone(), source };
    let assignment = bin_feature(log, index, bins).map_err(wrap)?;
    let counts = build_counts(log, &assignment, bins).map_err(wrap)?;
    let hie = hie_score(&counts, combine.hie_offset)?;
    let hdd = hdd_score(&counts, combine.kl_floor)?;
    let mut flags = Vec::new();
    if assignment.constant {
        flags.push(FLAG_CONSTANT.to_string());
    }
    if counts.merges() > 0 {
        flags.push(FLAG_MERGED.to_string());
    }
    if counts.bin_count() == 1 {
        flags.push(FLAG_SINGLE_BIN.to_string());
    }
    Ok(RawScore { feature, hie, hdd, bins_used: counts.bin_count(), merges: counts.merges(), flags })
}

/// Normalizes raw scores across the given features, combines them, and
/// sorts by combined score descending (ties by feature name).
pub fn rank_features(raw: Vec<RawScore>, combine: &CombineConfig) -> Result<Vec<FeatureReport>, ScoreError> {
    let hie: Vec<f64> = raw.iter().map(|r| r.hie).collect();
    let hdd: Vec<f64> = raw.iter().map(|r| r.hdd).collect();
    let hie_norm = min_max_normalize(&hie);
    let hdd_norm = min_max_normalize(&hdd);
    let combined = combined_score(&hie_norm, &hdd_norm, combine)?;
    let mut reports: Vec<FeatureReport> = raw
        .into_iter()
        .enumerate()
        .map(|(i, r)| FeatureReport {
            feature: r.feature,
            hie: r.hie,
            hdd: r.hdd,
            hie_norm: hie_norm[i],
            hdd_norm: hdd_norm[i],
            combined: combined[i],
            bins_used: r.bins_used,
            merges: r.merges,
            flags: r.flags,
        })
        .collect();
    reports.sort_by(|a, b| b.combined.total_cmp(&a.combined).then_with(|| a.feature.cmp(&b.feature)));
    Ok(reports)
}

pub fn score_all_features(
    log: &BanditLog,
    bins: &BinConfig,
    combine: &CombineConfig,
) -> Result<Vec<FeatureReport>, ScoreError> {
    check_inputs(log, bins, combine)?;
    let raw =
        (0..log.descriptors().len()).map(|i| score_feature(log, i, bins, combine)).collect::<Result<Vec<_>, _>>()?;
    rank_features(raw, combine)
}

/// Same result as [`score_all_features`], scoring features on the rayon pool.
pub fn score_all_features_parallel(
    log: &BanditLog,
    bins: &BinConfig,
    combine: &CombineConfig,
) -> Result<Vec<FeatureReport>, ScoreError> {
    check_inputs(log, bins, combine)?;
    let raw = (0..log.descriptors().len())
        .into_par_iter()
        .map(|i| score_feature(log, i, bins, combine))
        .collect::<Result<Vec<_>, _>>()?;
    rank_features(raw, combine)
}

fn check_inputs(log: &BanditLog, bins: &BinConfig, combine: &CombineConfig) -> Result<(), ScoreError> {
    if log.k() < 2 {
        return Err(ScoreError::TooFewArms(log.k()));
    }
    bins.validate().map_err(|source| ScoreError::Binning { feature: String::new(), source })?;
    combine.validate()
}
