//! Reward engineering, GRPO math, expert-response parsing, best-of-N
//! verification, dataset construction and evaluation metrics for
//! vision-language models that grade traditional Chinese paintings.
//!
//! Model inference is always delegated to external endpoints through
//! [`gateway`]; every pipeline also runs against the deterministic mocks
//! shipped there.

pub mod bon;
pub mod cli;
pub mod dataset;
pub mod gateway;
pub mod grpo;
pub mod metrics;
pub mod model;
pub mod parser;
pub mod prompts;
pub mod reward;
pub mod similarity;
pub mod theme;

pub use model::{
    validate_record, BoundingBox, ExpertResponse, GrpoConfig, PaintingRecord, Provenance, RewardWeights, RoiRegion,
    Score, TierEvaluation,
};
pub use theme::{MajorTheme, Theme};
