//! Synthetic logged-bandit data with known feature classes.
//!
//! Every feature is drawn from Uniform(0, 1) and the logged arm is uniform
//! over `k`, as in a randomized experiment. The success probability of arm
//! `a` at context `x` is
//!
//! ```text
//! p(a, x) = clip(base + corr(x) + effect · mean_j g_a(x_j), 0.01, 0.99)
//! corr(x) = (effect / d_corr) · Σ_c 2 (x_c − 0.5)
//! ```
//!
//! where `j` runs over the HTE features and `c` over the correlational ones.
//! For HTE feature `j`, `[0, 1]` is split into `k` equal segments and arm
//! `(segment + j) mod k` is favored: `g_a = 1` for it and `−1/(k−1)` for the
//! others. Correlational features shift every arm equally. Irrelevant
//! features never enter `p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{BanditLog, Column};

const P_MIN: f64 = 0.01;
const P_MAX: f64 = 0.99;

#[derive(Debug, Error, PartialEq)]
#[error("invalid generator config: {0}")]
pub struct SynthError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub k: usize,
    pub d_hte: usize,
    pub d_corr: usize,
    pub d_irrel: usize,
    pub effect: f64,
    pub base: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { n: 50_000, k: 3, d_hte: 5, d_corr: 2, d_irrel: 3, effect: 0.24, base: 0.5, seed: 0 }
    }
}

impl GeneratorConfig {
    pub fn features(&self) -> usize {
        self.d_hte + self.d_corr + self.d_irrel
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n == 0 {
            return Err(SynthError("n must be positive".into()));
        }
        if self.k < 2 {
            return Err(SynthError(format!("k must be at least 2, got {}", self.k)));
        }
        if !(0.0..=0.5).contains(&self.effect) {
            return Err(SynthError(format!("effect must lie in [0, 0.5], got {}", self.effect)));
        }
        if !(self.base > 0.0 && self.base < 1.0) {
            return Err(SynthError(format!("base must lie in (0, 1), got {}", self.base)));
        }
        let hte = if self.d_hte > 0 { self.effect } else { 0.0 };
        let corr = if self.d_corr > 0 { self.effect } else { 0.0 };
        let swing = hte + corr;
        if self.base - swing <= 0.0 || self.base + swing >= 1.0 {
            return Err(SynthError(format!("base {} ± {swing} leaves (0, 1); lower effect or move base", self.base)));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureClass {
    Hte,
    Correlational,
    Irrelevant,
}

impl std::fmt::Display for FeatureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FeatureClass::Hte => "hte",
            FeatureClass::Correlational => "correlational",
            FeatureClass::Irrelevant => "irrelevant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTruth {
    pub feature: String,
    pub class: FeatureClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub features: Vec<FeatureTruth>,
    /// Noiseless best arm of every event.
    pub best_arm: Vec<usize>,
}

impl GroundTruth {
    pub fn class_of(&self, feature: &str) -> Option<FeatureClass> {
        self.features.iter().find(|f| f.feature == feature).map(|f| f.class)
    }
}

/// Feature names and classes in column order: HTE, correlational, irrelevant.
pub fn feature_layout(config: &GeneratorConfig) -> Vec<FeatureTruth> {
    let d = config.features();
    let width = (d.max(2) - 1).to_string().len();
    let classes = std::iter::repeat_n(FeatureClass::Hte, config.d_hte)
        .chain(std::iter::repeat_n(FeatureClass::Correlational, config.d_corr))
        .chain(std::iter::repeat_n(FeatureClass::Irrelevant, config.d_irrel));
    classes.enumerate().map(|(i, class)| FeatureTruth { feature: format!("x{i:0width$}"), class }).collect()
}

fn segment(x: f64, k: usize) -> usize {
    ((x * k as f64) as usize).min(k - 1)
}

/// Noiseless success probability of every arm at context `features`.
pub fn arm_probabilities(config: &GeneratorConfig, features: &[f64]) -> Vec<f64> {
    let k = config.k;
    let corr = if config.d_corr > 0 {
        let span = &features[config.d_hte..config.d_hte + config.d_corr];
        config.effect / config.d_corr as f64 * span.iter().map(|x| 2.0 * (x - 0.5)).sum::<f64>()
    } else {
        0.0
    };
    let mut hte = vec![0.0; k];
    if config.d_hte > 0 {
        let off = -1.0 / (k - 1) as f64;
        for (j, &x) in features[..config.d_hte].iter().enumerate() {
            let favored = (segment(x, k) + j) % k;
            for (arm, g) in hte.iter_mut().enumerate() {
                *g += if arm == favored { 1.0 } else { off };
            }
        }
        for g in &mut hte {
            *g *= config.effect / config.d_hte as f64;
        }
    }
    hte.into_iter().map(|h| (config.base + corr + h).clamp(P_MIN, P_MAX)).collect()
}

/// Arg max of the noiseless success probability, ties to the lowest arm.
pub fn true_best_arm(config: &GeneratorConfig, features: &[f64]) -> usize {
    let probs = arm_probabilities(config, features);
    let mut best = 0;
    for (arm, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = arm;
        }
    }
    best
}

pub fn generate(config: &GeneratorConfig) -> Result<(BanditLog, GroundTruth), SynthError> {
    config.validate()?;
    let d = config.features();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut columns = vec![Vec::with_capacity(config.n); d];
    let mut arms = Vec::with_capacity(config.n);
    let mut rewards = Vec::with_capacity(config.n);
    let mut best_arm = Vec::with_capacity(config.n);
    let mut x = vec![0.0; d];
    for _ in 0..config.n {
        for v in x.iter_mut() {
            *v = rng.random::<f64>();
        }
        let arm = rng.random_range(0..config.k);
        let probs = arm_probabilities(config, &x);
        let reward = u8::from(rng.random::<f64>() < probs[arm]);
        for (column, &v) in columns.iter_mut().zip(&x) {
            column.push(v);
        }
        arms.push(arm);
        rewards.push(reward);
        best_arm.push(true_best_arm(config, &x));
    }
    let layout = feature_layout(config);
    let names = layout.iter().map(|f| f.feature.clone()).collect();
    let log = BanditLog::new(config.k, names, arms, rewards, columns.into_iter().map(Column::Continuous).collect())
        .map_err(|e| SynthError(e.to_string()))?;
    Ok((log, GroundTruth { features: layout, best_arm }))
}
