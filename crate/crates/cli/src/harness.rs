//! Synthetic benchmark: generate, score, replay, and time.
//!
//! Each trial generates a log, scores every feature with the model-free
//! scores, then replays every requested policy once per feature. Scoring
//! and replay durations are measured on the calling thread.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use anyhow::{Context as _, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use cmab_select::bandits::{global_winner_baseline, run_replay, PolicyKind, ReplayConfig};
use cmab_select::synth::{generate, FeatureClass, GeneratorConfig};
use cmab_select::{score_all_features, BinConfig, CombineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Generator settings; `seed` is the base seed that trial seeds derive from.
    pub generator: GeneratorConfig,
    pub trials: usize,
    pub policies: Vec<PolicyKind>,
    pub bins: BinConfig,
    pub combine: CombineConfig,
    pub alpha_ucb: f64,
    /// Worker threads for trials. Timings are only comparable with 1.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            generator: GeneratorConfig::default(),
            trials: 10,
            policies: PolicyKind::ALL.to_vec(),
            bins: BinConfig::default(),
            combine: CombineConfig::default(),
            alpha_ucb: 1.0,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub feature: String,
    pub class: FeatureClass,
    pub hie: f64,
    pub hdd: f64,
    pub hie_norm: f64,
    pub hdd_norm: f64,
    pub combined: f64,
    /// 1-based position in the combined ranking.
    pub rank: usize,
    /// Replay average reward per policy.
    pub rewards: BTreeMap<PolicyKind, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    /// Replay reward of always playing the context-free winner.
    pub baseline_reward: f64,
    /// Rows in ranking order.
    pub rows: Vec<FeatureRow>,
}

impl TrialReport {
    pub fn row(&self, feature: &str) -> Option<&FeatureRow> {
        self.rows.iter().find(|r| r.feature == feature)
    }

    pub fn top(&self) -> &FeatureRow {
        &self.rows[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: FeatureClass,
    pub mean_hie: f64,
    pub mean_hdd: f64,
    pub mean_combined: f64,
    pub mean_reward: BTreeMap<PolicyKind, f64>,
}

/// Wall-clock comparison of model-free scoring against replay-based
/// importance, summed over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub sample_size: usize,
    pub feature_count: usize,
    pub trials: usize,
    pub scoring_secs: f64,
    /// Total replay seconds per policy across every feature.
    pub policy_secs: BTreeMap<PolicyKind, f64>,
    /// Policy seconds divided by scoring seconds.
    pub speedup: BTreeMap<PolicyKind, f64>,
    /// True when trials ran on more than one thread.
    pub concurrent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub trials: Vec<TrialReport>,
    pub classes: Vec<ClassSummary>,
    pub timing: TimingTable,
}

impl BenchReport {
    /// Everything except wall-clock measurements, which vary run to run.
    pub fn deterministic_json(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("report serializes");
        value.as_object_mut().expect("object").remove("timing");
        value
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<String> =
            ["trial", "feature", "class", "hie", "hdd", "combined", "rank"].map(String::from).to_vec();
        header.extend(self.config.policies.iter().map(|p| format!("reward_{p}")));
        out.write_record(&header)?;
        for trial in &self.trials {
            for row in &trial.rows {
                let mut record = vec![
                    trial.trial.to_string(),
                    row.feature.clone(),
                    row.class.to_string(),
                    row.hie.to_string(),
                    row.hdd.to_string(),
                    row.combined.to_string(),
                    row.rank.to_string(),
                ];
                record.extend(self.config.policies.iter().map(|p| row.rewards[p].to_string()));
                out.write_record(&record)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of trial `trial`, independent of execution order.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    splitmix64(base ^ splitmix64(trial as u64))
}

struct TrialOutcome {
    report: TrialReport,
    scoring_secs: f64,
    policy_secs: BTreeMap<PolicyKind, f64>,
}

fn run_trial(config: &BenchConfig, trial: usize) -> Result<TrialOutcome> {
    let seed = trial_seed(config.generator.seed, trial);
    let (log, truth) = generate(&config.generator.with_seed(seed))?;

    let started = Instant::now();
    let reports = score_all_features(&log, &config.bins, &config.combine)?;
    let scoring_secs = started.elapsed().as_secs_f64();

    let mut rewards: BTreeMap<String, BTreeMap<PolicyKind, f64>> = BTreeMap::new();
    let mut policy_secs = BTreeMap::new();
    for &policy in &config.policies {
        let mut total = 0.0;
        for (index, descriptor) in log.descriptors().iter().enumerate() {
            let replay = ReplayConfig {
                policy,
                features: vec![descriptor.name.clone()],
                alpha_ucb: config.alpha_ucb,
                seed: splitmix64(seed ^ ((index as u64 + 1) << 32)),
                bins: config.bins,
            };
            let result =
                run_replay(&log, &replay).with_context(|| format!("replaying {policy} on `{}`", descriptor.name))?;
            total += result.duration_secs;
            rewards.entry(descriptor.name.clone()).or_default().insert(policy, result.average_reward);
        }
        policy_secs.insert(policy, total);
    }

    let rows = reports
        .into_iter()
        .enumerate()
        .map(|(i, r)| FeatureRow {
            class: truth.class_of(&r.feature).expect("generated feature has a class"),
            rewards: rewards.remove(&r.feature).unwrap_or_default(),
            feature: r.feature,
            hie: r.hie,
            hdd: r.hdd,
            hie_norm: r.hie_norm,
            hdd_norm: r.hdd_norm,
            combined: r.combined,
            rank: i + 1,
        })
        .collect();
    let report = TrialReport { trial, seed, baseline_reward: global_winner_baseline(&log).average_reward, rows };
    Ok(TrialOutcome { report, scoring_secs, policy_secs })
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn summarize_classes(config: &BenchConfig, trials: &[TrialReport]) -> Vec<ClassSummary> {
    [FeatureClass::Hte, FeatureClass::Correlational, FeatureClass::Irrelevant]
        .into_iter()
        .filter_map(|class| {
            let rows: Vec<&FeatureRow> = trials.iter().flat_map(|t| &t.rows).filter(|r| r.class == class).collect();
            if rows.is_empty() {
                return None;
            }
            let mean_reward = config.policies.iter().map(|p| (*p, mean(rows.iter().map(|r| r.rewards[p])))).collect();
            Some(ClassSummary {
                class,
                mean_hie: mean(rows.iter().map(|r| r.hie)),
                mean_hdd: mean(rows.iter().map(|r| r.hdd)),
                mean_combined: mean(rows.iter().map(|r| r.combined)),
                mean_reward,
            })
        })
        .collect()
}

pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.generator.validate()?;
    config.bins.validate()?;
    config.combine.validate()?;
    anyhow::ensure!(config.trials >= 1, "trials must be at least 1");
    anyhow::ensure!(config.jobs >= 1, "jobs must be at least 1");

    let outcomes: Vec<TrialOutcome> = if config.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build()?;
        pool.install(|| (0..config.trials).into_par_iter().map(|t| run_trial(config, t)).collect::<Result<_>>())?
    } else {
        (0..config.trials).map(|t| run_trial(config, t)).collect::<Result<_>>()?
    };

    let scoring_secs: f64 = outcomes.iter().map(|o| o.scoring_secs).sum();
    let policy_secs: BTreeMap<PolicyKind, f64> =
        config.policies.iter().map(|p| (*p, outcomes.iter().map(|o| o.policy_secs[p]).sum())).collect();
    let speedup = policy_secs.iter().map(|(p, secs)| (*p, secs / scoring_secs.max(f64::MIN_POSITIVE))).collect();
    let timing = TimingTable {
        sample_size: config.generator.n,
        feature_count: config.generator.features(),
        trials: config.trials,
        scoring_secs,
        policy_secs,
        speedup,
        concurrent: config.jobs > 1,
    };
    let trials: Vec<TrialReport> = outcomes.into_iter().map(|o| o.report).collect();
    Ok(BenchReport { classes: summarize_classes(config, &trials), config: config.clone(), trials, timing })
}
