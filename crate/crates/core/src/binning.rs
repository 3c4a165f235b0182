//! Discretization of feature columns and the per-(bin, arm) counts table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{BanditLog, Column, FeatureKind};

/// Label of the bin that collects rare categories.
pub const OTHER_TOKEN: &str = "__other__";

#[derive(Debug, Error, PartialEq)]
pub enum BinningError {
    #[error("cannot bin an empty feature column")]
    Empty,
    #[error("value at index {0} is not finite")]
    NonFinite(usize),
    #[error("invalid bin config: {0}")]
    Config(String),
    #[error("assignment covers {assigned} events but the log has {events}")]
    LengthMismatch { assigned: usize, events: usize },
    #[error("cell (bin {bin}, arm {arm}) has {successes} successes out of {pulls} pulls")]
    Cell { bin: usize, arm: usize, successes: u64, pulls: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinConfig {
    /// Requested number of quantile bins for continuous features.
    pub bins: usize,
    /// Cap on the number of categorical bins, `__other__` included.
    pub max_categories: usize,
    /// Minimum pulls every arm needs in every bin.
    pub min_arm_samples: u64,
}

impl Default for BinConfig {
    fn default() -> Self {
        BinConfig { bins: 5, max_categories: 20, min_arm_samples: 10 }
    }
}

impl BinConfig {
    pub fn validate(&self) -> Result<(), BinningError> {
        if self.bins < 2 {
            return Err(BinningError::Config(format!("bins must be at least 2, got {}", self.bins)));
        }
        if self.max_categories < 1 {
            return Err(BinningError::Config("max_categories must be positive".into()));
        }
        if self.min_arm_samples < 1 {
            return Err(BinningError::Config("min_arm_samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BinEdges {
    /// Sorted cut points; bin `b` is `(cuts[b-1], cuts[b]]`.
    Continuous { cuts: Vec<f64> },
    /// Token to bin index, plus one label per bin.
    Categorical { category_map: BTreeMap<String, usize>, labels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinAssignment {
    pub feature: String,
    pub bin_count: usize,
    pub edges: BinEdges,
    /// Bin index of every event.
    pub bins: Vec<u32>,
    /// True when every raw value is the same.
    pub constant: bool,
}

impl BinAssignment {
    pub fn kind(&self) -> FeatureKind {
        match self.edges {
            BinEdges::Continuous { .. } => FeatureKind::Continuous,
            BinEdges::Categorical { .. } => FeatureKind::Categorical,
        }
    }

    pub fn with_feature(mut self, name: impl Into<String>) -> Self {
        self.feature = name.into();
        self
    }

    fn other_bin(&self) -> Option<usize> {
        match &self.edges {
            BinEdges::Categorical { labels, .. } => labels.iter().position(|l| l == OTHER_TOKEN),
            BinEdges::Continuous { .. } => None,
        }
    }
}

/// Equal-frequency binning.
///
/// Cut `j` is the order statistic at rank `ceil(j·n/m) - 1`. Duplicate cuts
/// collapse, and a cut equal to the maximum is dropped so that no bin is
/// empty. Intervals are right-closed.
pub fn bin_continuous(values: &[f64], config: &BinConfig) -> Result<BinAssignment, BinningError> {
    config.validate()?;
    if values.is_empty() {
        return Err(BinningError::Empty);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(BinningError::NonFinite(i));
    }
    let n = values.len();
    let m = config.bins;
    let max = values.iter().copied().max_by(f64::total_cmp).expect("non-empty");

    // Ranks are non-decreasing, so each selection only searches the part of
    // the buffer at or above the previous rank.
    let mut scratch = values.to_vec();
    let mut base = 0;
    let mut cuts: Vec<f64> = Vec::with_capacity(m - 1);
    for j in 1..m {
        let rank = (j * n).div_ceil(m).max(1) - 1;
        let (_, &mut cut, _) = scratch[base..].select_nth_unstable_by(rank - base, f64::total_cmp);
        base = rank;
        if cut < max && cuts.last().is_none_or(|&last| cut > last) {
            cuts.push(cut);
        }
    }

    let bins = values.iter().map(|&v| cuts.partition_point(|&c| c < v) as u32).collect();
    Ok(BinAssignment {
        feature: String::new(),
        bin_count: cuts.len() + 1,
        edges: BinEdges::Continuous { cuts },
        bins,
        constant: values.iter().all(|&v| v == values[0]),
    })
}

/// One bin per distinct token in descending frequency (ties by token). When
/// there are more than `max_categories` tokens, all but the most frequent
/// `max_categories - 1` share the `__other__` bin.
pub fn bin_categorical<S: AsRef<str>>(values: &[S], config: &BinConfig) -> Result<BinAssignment, BinningError> {
    match Column::categorical(values) {
        Column::Categorical { levels, codes } => bin_codes(&levels, &codes, config),
        Column::Continuous(_) => unreachable!(),
    }
}

fn bin_codes(levels: &[String], codes: &[u32], config: &BinConfig) -> Result<BinAssignment, BinningError> {
    config.validate()?;
    if codes.is_empty() {
        return Err(BinningError::Empty);
    }
    let mut freq = vec![0usize; levels.len()];
    for &c in codes {
        freq[c as usize] += 1;
    }
    let mut order: Vec<usize> = (0..levels.len()).filter(|&l| freq[l] > 0).collect();
    order.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then_with(|| levels[a].cmp(&levels[b])));

    let distinct = order.len();
    let kept = if distinct > config.max_categories { config.max_categories - 1 } else { distinct };
    let mut level_bin = vec![0u32; levels.len()];
    let mut labels = Vec::with_capacity(kept + 1);
    let mut category_map = BTreeMap::new();
    for (rank, &level) in order.iter().enumerate() {
        let bin = if rank < kept {
            labels.push(levels[level].clone());
            rank
        } else {
            if labels.len() == kept {
                labels.push(OTHER_TOKEN.to_string());
            }
            kept
        };
        level_bin[level] = bin as u32;
        category_map.insert(levels[level].clone(), bin);
    }
    let bins = codes.iter().map(|&c| level_bin[c as usize]).collect();
    Ok(BinAssignment {
        feature: String::new(),
        bin_count: labels.len(),
        edges: BinEdges::Categorical { category_map, labels },
        bins,
        constant: distinct <= 1,
    })
}

/// Bins feature `index` of `log` according to its kind.
pub fn bin_feature(log: &BanditLog, index: usize, config: &BinConfig) -> Result<BinAssignment, BinningError> {
    let assignment = match log.column(index) {
        Column::Continuous(values) => bin_continuous(values, config)?,
        Column::Categorical { levels, codes } => bin_codes(levels, codes, config)?,
    };
    Ok(assignment.with_feature(log.descriptors()[index].name.clone()))
}

/// How low-support bins are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairStrategy {
    /// Merge with the adjacent bin holding fewer events (left on ties).
    Adjacent,
    /// Merge into the `__other__` bin, creating it from the smallest
    /// remaining bin when absent.
    Other { other_bin: Option<usize> },
}

/// Pull and success counts per (bin, arm) cell for one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsTable {
    k: usize,
    pulls: Vec<Vec<u64>>,
    successes: Vec<Vec<u64>>,
    /// Original bin index to repaired bin index.
    bin_map: Vec<usize>,
    merges: usize,
}

impl CountsTable {
    /// Builds a table from explicit cells indexed `[bin][arm]`.
    pub fn from_cells(pulls: Vec<Vec<u64>>, successes: Vec<Vec<u64>>) -> Result<Self, BinningError> {
        let k = pulls.first().map_or(0, Vec::len);
        if pulls.len() != successes.len() {
            return Err(BinningError::Config("pulls and successes differ in bin count".into()));
        }
        for (bin, (p_row, s_row)) in pulls.iter().zip(&successes).enumerate() {
            if p_row.len() != k || s_row.len() != k {
                return Err(BinningError::Config(format!("bin {bin} does not have {k} arms")));
            }
            for (arm, (&p, &s)) in p_row.iter().zip(s_row).enumerate() {
                if s > p {
                    return Err(BinningError::Cell { bin, arm, successes: s, pulls: p });
                }
            }
        }
        let bin_map = (0..pulls.len()).collect();
        Ok(CountsTable { k, pulls, successes, bin_map, merges: 0 })
    }

    /// Direct tally of events into cells, without repair.
    pub fn tally(arms: &[usize], rewards: &[u8], bins: &[u32], bin_count: usize, k: usize) -> Self {
        let mut pulls = vec![vec![0u64; k]; bin_count];
        let mut successes = vec![vec![0u64; k]; bin_count];
        for ((&arm, &reward), &bin) in arms.iter().zip(rewards).zip(bins) {
            pulls[bin as usize][arm] += 1;
            successes[bin as usize][arm] += u64::from(reward);
        }
        let bin_map = (0..bin_count).collect();
        CountsTable { k, pulls, successes, bin_map, merges: 0 }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bin_count(&self) -> usize {
        self.pulls.len()
    }

    pub fn merges(&self) -> usize {
        self.merges
    }

    pub fn bin_map(&self) -> &[usize] {
        &self.bin_map
    }

    pub fn pulls(&self, bin: usize, arm: usize) -> u64 {
        self.pulls[bin][arm]
    }

    pub fn successes(&self, bin: usize, arm: usize) -> u64 {
        self.successes[bin][arm]
    }

    pub fn bin_pulls(&self, bin: usize) -> &[u64] {
        &self.pulls[bin]
    }

    pub fn bin_successes(&self, bin: usize) -> &[u64] {
        &self.successes[bin]
    }

    /// N_b.
    pub fn bin_total(&self, bin: usize) -> u64 {
        self.pulls[bin].iter().sum()
    }

    /// N.
    pub fn total(&self) -> u64 {
        self.pulls.iter().flatten().sum()
    }

    /// N_i.
    pub fn arm_pulls(&self) -> Vec<u64> {
        column_sums(&self.pulls, self.k)
    }

    /// s_i.
    pub fn arm_successes(&self) -> Vec<u64> {
        column_sums(&self.successes, self.k)
    }

    fn merge(&mut self, keep: usize, absorb: usize) {
        debug_assert_ne!(keep, absorb);
        for arm in 0..self.k {
            self.pulls[keep][arm] += self.pulls[absorb][arm];
            self.successes[keep][arm] += self.successes[absorb][arm];
        }
        self.pulls.remove(absorb);
        self.successes.remove(absorb);
        for target in &mut self.bin_map {
            if *target == absorb {
                *target = keep;
            }
            if *target > absorb {
                *target -= 1;
            }
        }
        self.merges += 1;
    }

    fn first_failing(&self, min_arm_samples: u64) -> Option<usize> {
        self.pulls.iter().position(|row| row.iter().any(|&p| p < min_arm_samples))
    }

    /// Merges bins until every arm has at least `min_arm_samples` pulls in
    /// every bin, or one bin remains. Bins are visited lowest index first.
    pub fn repair(&mut self, strategy: RepairStrategy, min_arm_samples: u64) {
        let mut other = match strategy {
            RepairStrategy::Other { other_bin } => other_bin,
            RepairStrategy::Adjacent => None,
        };
        while self.bin_count() > 1 {
            let Some(bin) = self.first_failing(min_arm_samples) else { break };
            match strategy {
                RepairStrategy::Adjacent => {
                    let last = self.bin_count() - 1;
                    let neighbor = if bin == 0 {
                        1
                    } else if bin == last || self.bin_total(bin - 1) <= self.bin_total(bin + 1) {
                        bin - 1
                    } else {
                        bin + 1
                    };
                    self.merge(bin.min(neighbor), bin.max(neighbor));
                }
                RepairStrategy::Other { .. } => match other {
                    Some(o) if o != bin => {
                        self.merge(o, bin);
                        if bin < o {
                            other = Some(o - 1);
                        }
                    }
                    _ => {
                        let partner = (0..self.bin_count())
                            .filter(|&b| b != bin)
                            .min_by_key(|&b| (self.bin_total(b), b))
                            .expect("at least two bins");
                        let (keep, absorb) = (bin.min(partner), bin.max(partner));
                        self.merge(keep, absorb);
                        other = Some(keep);
                    }
                },
            }
        }
    }
}

fn column_sums(rows: &[Vec<u64>], k: usize) -> Vec<u64> {
    let mut sums = vec![0u64; k];
    for row in rows {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums
}

/// Tallies `log` into the bins of `assignment`, then merges bins lacking
/// `min_arm_samples` pulls for some arm.
pub fn build_counts(
    log: &BanditLog,
    assignment: &BinAssignment,
    config: &BinConfig,
) -> Result<CountsTable, BinningError> {
    if assignment.bins.len() != log.len() {
        return Err(BinningError::LengthMismatch { assigned: assignment.bins.len(), events: log.len() });
    }
    let mut counts = CountsTable::tally(log.arms(), log.rewards(), &assignment.bins, assignment.bin_count, log.k());
    let strategy = match assignment.kind() {
        FeatureKind::Continuous => RepairStrategy::Adjacent,
        FeatureKind::Categorical => RepairStrategy::Other { other_bin: assignment.other_bin() },
    };
    counts.repair(strategy, config.min_arm_samples);
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BanditLog;

    /// Smallest sample value whose empirical CDF reaches j/m.
    fn brute_quantile(values: &[f64], j: usize, m: usize) -> f64 {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        for &v in &sorted {
            let at_or_below = values.iter().filter(|&&x| x <= v).count();
            if at_or_below * m >= j * values.len() {
                return v;
            }
        }
        unreachable!()
    }

    fn config(bins: usize) -> BinConfig {
        BinConfig { bins, ..BinConfig::default() }
    }

    #[test]
    fn median_split() {
        let values: Vec<f64> = (1..=8).map(f64::from).collect();
        let a = bin_continuous(&values, &config(2)).unwrap();
        assert_eq!(a.bins, vec![0, 0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(a.bin_count, 2);
    }

    #[test]
    fn constant_values_make_one_bin() {
        let a = bin_continuous(&[3.0; 7], &config(10)).unwrap();
        assert_eq!(a.bin_count, 1);
        assert!(a.bins.iter().all(|&b| b == 0));
        assert!(a.constant);
    }

    #[test]
    fn duplicate_cuts_collapse() {
        let values = [1.0, 1.0, 1.0, 1.0, 2.0, 3.0];
        let a = bin_continuous(&values, &config(3)).unwrap();
        let BinEdges::Continuous { cuts } = &a.edges else { panic!() };
        let mut expected: Vec<f64> = (1..3).map(|j| brute_quantile(&values, j, 3)).collect();
        expected.dedup();
        expected.retain(|&c| c < 3.0);
        assert_eq!(cuts, &expected);
        assert_eq!(a.bin_count, 2);
        assert_eq!(a.bins, vec![0, 0, 0, 0, 1, 1]);
    }

    #[test]
    fn continuous_errors() {
        assert_eq!(bin_continuous(&[], &config(2)), Err(BinningError::Empty));
        assert_eq!(bin_continuous(&[1.0, f64::NAN], &config(2)), Err(BinningError::NonFinite(1)));
        assert!(matches!(bin_continuous(&[1.0], &config(1)), Err(BinningError::Config(_))));
    }

    #[test]
    fn categories_by_frequency() {
        let tokens = ["B", "A", "A", "B", "A", "B", "A", "A"];
        let a = bin_categorical(&tokens, &config(2)).unwrap();
        let BinEdges::Categorical { category_map, .. } = &a.edges else { panic!() };
        assert_eq!(category_map["A"], 0);
        assert_eq!(category_map["B"], 1);
        assert_eq!(a.bin_count, 2);
    }

    #[test]
    fn category_cap() {
        // token t{i} occurs 30 - i times, so the order is t00..t24
        let mut tokens = Vec::new();
        for i in 0..25 {
            for _ in 0..(30 - i) {
                tokens.push(format!("t{i:02}"));
            }
        }
        let a = bin_categorical(&tokens, &BinConfig::default()).unwrap();
        assert_eq!(a.bin_count, 20);
        let BinEdges::Categorical { category_map, labels } = &a.edges else { panic!() };
        assert_eq!(labels[19], OTHER_TOKEN);
        let shared: Vec<_> = category_map.iter().filter(|(_, &b)| b == 19).map(|(t, _)| t.as_str()).collect();
        assert_eq!(shared, vec!["t19", "t20", "t21", "t22", "t23", "t24"]);
    }

    #[test]
    fn single_category() {
        let a = bin_categorical(&["x", "x"], &BinConfig::default()).unwrap();
        assert_eq!(a.bin_count, 1);
        assert_eq!(bin_categorical::<&str>(&[], &BinConfig::default()), Err(BinningError::Empty));
    }

    fn log_from(arms: Vec<usize>, rewards: Vec<u8>, x: Vec<f64>) -> BanditLog {
        BanditLog::new(2, vec!["x".into()], arms, rewards, vec![Column::Continuous(x)]).unwrap()
    }

    #[test]
    fn direct_tally() {
        // bin 0: x < 0.5, bin 1: x >= 0.5; 10 pulls per cell
        let mut arms = Vec::new();
        let mut rewards = Vec::new();
        let mut x = Vec::new();
        for (bin, arm, wins) in [(0, 0, 8), (0, 1, 2), (1, 0, 2), (1, 1, 8)] {
            for i in 0..10 {
                arms.push(arm);
                rewards.push(u8::from(i < wins));
                x.push(bin as f64 + 0.01 * i as f64);
            }
        }
        let log = log_from(arms, rewards, x);
        let a = bin_feature(&log, 0, &config(2)).unwrap();
        let counts = build_counts(&log, &a, &BinConfig { bins: 2, ..BinConfig::default() }).unwrap();
        assert_eq!(counts.total(), 40);
        assert_eq!((counts.bin_total(0), counts.bin_total(1)), (20, 20));
        assert_eq!(counts.bin_successes(0), &[8, 2]);
        assert_eq!(counts.bin_successes(1), &[2, 8]);
        assert_eq!(counts.merges(), 0);
    }

    #[test]
    fn low_support_bin_is_merged() {
        let mut counts = CountsTable::from_cells(
            vec![vec![10, 10], vec![12, 3], vec![10, 20]],
            vec![vec![1, 1], vec![1, 1], vec![1, 1]],
        )
        .unwrap();
        counts.repair(RepairStrategy::Adjacent, 10);
        assert_eq!(counts.bin_count(), 2);
        assert_eq!(counts.merges(), 1);
        // neighbors hold 20 and 30 events, so the left one absorbs bin 1
        assert_eq!(counts.bin_pulls(0), &[22, 13]);
        assert_eq!(counts.bin_map(), &[0, 0, 1]);
    }

    #[test]
    fn categorical_repair_uses_other() {
        let mut counts =
            CountsTable::from_cells(vec![vec![50, 50], vec![2, 30], vec![40, 40], vec![10, 10]], vec![vec![0; 2]; 4])
                .unwrap();
        counts.repair(RepairStrategy::Other { other_bin: Some(3) }, 10);
        assert_eq!(counts.bin_count(), 3);
        assert_eq!(counts.bin_map(), &[0, 2, 1, 2]);
        assert_eq!(counts.bin_pulls(2), &[12, 40]);

        // without an existing __other__ bin the failing bin pairs with the smallest bin
        let mut counts =
            CountsTable::from_cells(vec![vec![50, 50], vec![2, 30], vec![40, 40]], vec![vec![0; 2]; 3]).unwrap();
        counts.repair(RepairStrategy::Other { other_bin: None }, 10);
        assert_eq!(counts.bin_map(), &[0, 1, 1]);
        assert_eq!(counts.merges(), 1);
    }

    #[test]
    fn repair_stops_at_one_bin() {
        let mut counts =
            CountsTable::from_cells(vec![vec![1, 0], vec![2, 0], vec![3, 0]], vec![vec![0; 2]; 3]).unwrap();
        counts.repair(RepairStrategy::Adjacent, 1);
        assert_eq!(counts.bin_count(), 1);
        assert_eq!(counts.merges(), 2);
        assert_eq!(counts.bin_pulls(0), &[6, 0]);
    }

    #[test]
    fn rejects_impossible_cells() {
        assert!(matches!(
            CountsTable::from_cells(vec![vec![1, 2]], vec![vec![2, 0]]),
            Err(BinningError::Cell { bin: 0, arm: 0, .. })
        ));
    }

    #[test]
    fn length_mismatch() {
        let log = log_from(vec![0, 1], vec![1, 0], vec![0.0, 1.0]);
        let a = bin_continuous(&[0.0], &config(2)).unwrap();
        assert!(matches!(build_counts(&log, &a, &config(2)), Err(BinningError::LengthMismatch { .. })));
    }
}
