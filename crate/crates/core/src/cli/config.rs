//! Layered configuration: command-line flags override environment
//! variables (both resolved by clap), which override the TOML config file,
//! which overrides built-in defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::gateway::RetryPolicy;
use crate::model::{GrpoConfig, RewardWeights};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointSection {
    pub url: Option<String>,
    pub key: Option<String>,
    pub model: Option<String>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimilaritySection {
    pub url: Option<String>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    pub w_acc: Option<f64>,
    pub w_bert: Option<f64>,
    pub w_miou: Option<f64>,
    pub w_format: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoSection {
    pub group_size: Option<usize>,
    pub clip_epsilon: Option<f64>,
    pub std_floor: Option<f64>,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrySection {
    pub max_attempts: Option<u32>,
    pub base_delay_ms: Option<u64>,
    pub factor: Option<f64>,
}

/// Contents of the optional TOML config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub parallelism: Option<usize>,
    pub max_inflight: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    pub similarity: SimilaritySection,
    pub reward: WeightsSection,
    pub grpo: GrpoSection,
    pub retry: RetrySection,
    pub evaluator: EndpointSection,
    pub constructor: EndpointSection,
    pub t2i: EndpointSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Weights with each component taken from `overrides` first, then the
    /// file, then the defaults.
    pub fn weights(&self, overrides: [Option<f64>; 4]) -> Result<RewardWeights, String> {
        let d = RewardWeights::default();
        let f = &self.reward;
        RewardWeights::new(
            overrides[0].or(f.w_acc).unwrap_or(d.w_acc),
            overrides[1].or(f.w_bert).unwrap_or(d.w_bert),
            overrides[2].or(f.w_miou).unwrap_or(d.w_miou),
            overrides[3].or(f.w_format).unwrap_or(d.w_format),
        )
        .map_err(|e| e.to_string())
    }

    pub fn retry_policy(&self) -> Result<RetryPolicy, String> {
        let d = RetryPolicy::default();
        let r = &self.retry;
        let policy = RetryPolicy {
            max_attempts: r.max_attempts.unwrap_or(d.max_attempts),
            base_delay: r.base_delay_ms.map(Duration::from_millis).unwrap_or(d.base_delay),
            factor: r.factor.unwrap_or(d.factor),
        };
        if policy.max_attempts == 0 || !(policy.factor.is_finite() && policy.factor >= 1.0) {
            return Err("retry: max_attempts must be >= 1 and factor >= 1".into());
        }
        Ok(policy)
    }

    pub fn grpo(&self, std_floor: Option<f64>, clip_epsilon: Option<f64>) -> Result<GrpoConfig, String> {
        let d = GrpoConfig::default();
        let g = &self.grpo;
        GrpoConfig {
            group_size: g.group_size.unwrap_or(d.group_size),
            clip_epsilon: clip_epsilon.or(g.clip_epsilon).unwrap_or(d.clip_epsilon),
            std_floor: std_floor.or(g.std_floor).unwrap_or(d.std_floor),
            max_ratio: g.max_ratio.unwrap_or(d.max_ratio),
        }
        .validated()
        .map_err(|e| e.to_string())
    }
}
