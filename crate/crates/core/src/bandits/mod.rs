//! Reference bandit policies and offline replay evaluation.

mod linucb;
mod replay;
mod thompson;

use thiserror::Error;

use crate::binning::BinningError;

pub use linucb::{quadratic_expand, LinUcb};
pub use replay::{
    global_winner_baseline, replay_evaluate, run_replay, ContextEncoder, Expansion, FixedArm, PolicyKind, ReplayConfig,
    ReplayResult, FLAG_NON_UNIFORM, FLAG_NO_MATCHES,
};
pub use thompson::CohortThompson;

#[derive(Debug, Error, PartialEq)]
pub enum BanditError {
    #[error("context has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("arm {arm} out of range for {k} arms")]
    InvalidArm { arm: usize, k: usize },
    #[error("cohort {cohort} out of range for {cohorts} cohorts")]
    InvalidCohort { cohort: usize, cohorts: usize },
    #[error("design matrix of arm {0} is not positive definite")]
    NotPositiveDefinite(usize),
    #[error("{0}")]
    Parameter(String),
    #[error("feature subset is empty")]
    EmptyFeatureSubset,
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error(transparent)]
    Binning(#[from] BinningError),
}

/// Context of one event as seen by a policy.
#[derive(Debug, Clone, Copy)]
pub struct Context<'a> {
    /// Dense vector for linear policies.
    pub vector: &'a [f64],
    /// Cohort index for cohort-based policies.
    pub cohort: usize,
}

/// A policy that can be replayed against a log.
pub trait Policy {
    fn select(&mut self, context: &Context<'_>) -> Result<usize, BanditError>;
    fn update(&mut self, context: &Context<'_>, arm: usize, reward: u8) -> Result<(), BanditError>;
}
