//! Benchmark construction: label scaling, synthetic label ingestion, class
//! balancing, multi-round chain-of-thought construction, reviewer verdicts,
//! scroll-type classification and the JSONL manifest format.
//!
//! Manifest files start with a header line
//! `{"schema_version":"1","split":"train","count":N}` followed by one
//! record per line with the fields `id, image_ref, width, height,
//! provenance, raw_valuation, theme_major, theme_sub, scroll_type, gt_score,
//! gt_cot, validated`.

mod cot;
mod labels;
mod manifest;
mod scroll;

use thiserror::Error;

use crate::gateway::GatewayError;

pub use cot::{attach_cot, build_cot, build_cots, generate_t2i_prompts, parse_prompt_list, CotFlag, CotOutcome};
pub use labels::{apply_expert_reviews, balance_records, ingest_synthetic_labels, scale_auction_labels, ExpertReview};
pub use manifest::{
    emit_manifest, load_manifest, manifest_from_str, manifest_to_string, Manifest, Split, SCHEMA_VERSION,
};
pub use scroll::{classify_scroll_type, ScrollType};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("EmptyInput")]
    EmptyInput,
    #[error("NonPositiveValuation: {id} has valuation {value}")]
    NonPositiveValuation { id: String, value: f64 },
    #[error("LabelOutOfRange: {id} has label {label}, expected 0..=3")]
    LabelOutOfRange { id: String, label: i64 },
    #[error("NonPositiveDimensions: {width}x{height}")]
    NonPositiveDimensions { width: u32, height: u32 },
    #[error("ConstructorUnavailable: {id}: {source}")]
    ConstructorUnavailable { id: String, source: GatewayError },
    #[error("IoFailure: {0}")]
    IoFailure(String),
    #[error("SchemaVersionMismatch: found {found:?}, expected {expected:?}")]
    SchemaVersionMismatch { found: String, expected: String },
    #[error("ValidationFailure: line {line} ({id}): {}", violations.join("; "))]
    ValidationFailure { line: usize, id: String, violations: Vec<String> },
}

/// Balances a manifest's score classes; see [`balance_records`].
pub fn balance_manifest(manifest: Manifest, tolerance: f64, seed: u64) -> Manifest {
    Manifest { records: balance_records(manifest.records, tolerance, seed), ..manifest }
}
