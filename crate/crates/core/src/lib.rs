//! Model-free causal feature selection for contextual multi-armed bandits.
//!
//! Features are ranked by how much they change which arm wins ([HIE]) and
//! how much they spread the arms' reward distributions apart ([HDD]), both
//! computed from per-(bin, arm) counts. The crate also ships a synthetic
//! benchmark generator with known feature classes, reference bandit
//! policies, and an offline replay evaluator to check that high-scoring
//! features do yield higher bandit reward.
//!
//! [HIE]: scoring::hie_score
//! [HDD]: scoring::hdd_score

pub mod bandits;
pub mod binning;
pub mod data;
pub mod report;
pub mod scoring;
pub mod synth;

pub use binning::{BinAssignment, BinConfig, CountsTable};
pub use data::{BanditLog, CsvSchema, FeatureDescriptor, FeatureKind, FeatureValue, LoggedEvent};
pub use scoring::{score_all_features, CombineConfig, FeatureReport, HieOffset};
pub use synth::{FeatureClass, GeneratorConfig, GroundTruth};
