//! Group-relative advantages and the clipped surrogate objective.
//!
//! For a group of `G` rollouts with rewards `r_i`, the advantage is
//! `(r_i - mean) / max(std, floor)` using the population standard deviation.
//! The per-sample term is `min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)`
//! with `rho = exp(logp_new - logp_old)` over whole sequences, and the
//! objective is its group mean. There is no KL penalty.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ExpertResponse, GrpoConfig, RewardWeights};
use crate::reward::{final_reward, RewardBreakdown};
use crate::similarity::Similarity;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GrpoError {
    #[error("GroupTooSmall: need at least 2 samples, got {0}")]
    GroupTooSmall(usize),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("length mismatch: {0} advantages vs {1} ratios")]
    LengthMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn check_finite(values: &[f64], what: &str) -> Result<(), GrpoError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(GrpoError::NonFinite(format!("{what}[{i}] = {}", values[i]))),
        None => Ok(()),
    }
}

/// Standardizes rewards within the group. With zero spread and `std_floor = 0`
/// every advantage is 0.
pub fn group_advantages(rewards: &[f64], std_floor: f64) -> Result<Vec<f64>, GrpoError> {
    if rewards.len() < 2 {
        return Err(GrpoError::GroupTooSmall(rewards.len()));
    }
    check_finite(rewards, "rewards")?;
    if !(std_floor >= 0.0 && std_floor.is_finite()) {
        return Err(GrpoError::InvalidParameter(format!("std_floor must be >= 0, got {std_floor}")));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt().max(std_floor);
    if denom == 0.0 {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// Sequence-level importance ratio, capped at `max_ratio`.
pub fn importance_ratio(logp_new: f64, logp_old: f64, max_ratio: f64) -> f64 {
    let rho = (logp_new - logp_old).exp();
    if rho > max_ratio || rho.is_nan() {
        log::warn!("importance ratio {rho} capped at {max_ratio}");
        return max_ratio;
    }
    rho
}

/// Per-sample clipped terms `min(rho * A, clip(rho) * A)`.
pub fn surrogate_terms(advantages: &[f64], ratios: &[f64], clip_epsilon: f64) -> Result<Vec<f64>, GrpoError> {
    if advantages.len() != ratios.len() {
        return Err(GrpoError::LengthMismatch(advantages.len(), ratios.len()));
    }
    check_finite(advantages, "advantages")?;
    check_finite(ratios, "ratios")?;
    if !(clip_epsilon > 0.0 && clip_epsilon < 1.0) {
        return Err(GrpoError::InvalidParameter(format!("clip_epsilon must be in (0, 1), got {clip_epsilon}")));
    }
    Ok(advantages
        .iter()
        .zip(ratios)
        .map(|(&a, &rho)| (rho * a).min(rho.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon) * a))
        .collect())
}

/// Group mean of the clipped terms.
pub fn clipped_surrogate(advantages: &[f64], ratios: &[f64], clip_epsilon: f64) -> Result<f64, GrpoError> {
    let terms = surrogate_terms(advantages, ratios, clip_epsilon)?;
    if terms.is_empty() {
        return Err(GrpoError::GroupTooSmall(0));
    }
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// One rollout: generated text with its sequence log-probabilities under the
/// current and the sampling policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSample {
    pub text: String,
    pub logp_new: f64,
    pub logp_old: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupScore {
    pub rewards: Vec<RewardBreakdown>,
    pub advantages: Vec<f64>,
    pub ratios: Vec<f64>,
    pub terms: Vec<f64>,
    pub objective: f64,
}

/// Rewards every rollout against the reference, then computes advantages and
/// the objective. Rewards are computed on `parallelism` threads; the output
/// is identical for any thread count.
#[allow(clippy::too_many_arguments)]
pub fn score_group(
    samples: &[GroupSample],
    gt: &ExpertResponse,
    width: u32,
    height: u32,
    weights: RewardWeights,
    config: &GrpoConfig,
    sim: &dyn Similarity,
    parallelism: usize,
) -> Result<GroupScore, GrpoError> {
    if samples.len() < 2 {
        return Err(GrpoError::GroupTooSmall(samples.len()));
    }
    if samples.len() != config.group_size {
        log::warn!("group has {} samples, configured group size is {}", samples.len(), config.group_size);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| GrpoError::InvalidParameter(e.to_string()))?;
    let rewards: Vec<RewardBreakdown> =
        pool.install(|| samples.par_iter().map(|s| final_reward(&s.text, gt, width, height, weights, sim)).collect());
    let totals: Vec<f64> = rewards.iter().map(|r| r.total).collect();
    let advantages = group_advantages(&totals, config.std_floor)?;
    let ratios: Vec<f64> = samples.iter().map(|s| importance_ratio(s.logp_new, s.logp_old, config.max_ratio)).collect();
    let terms = surrogate_terms(&advantages, &ratios, config.clip_epsilon)?;
    let objective = terms.iter().sum::<f64>() / terms.len() as f64;
    Ok(GroupScore { rewards, advantages, ratios, terms, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sample_worked_case() {
        let a = group_advantages(&[0.0, 1.0], 1e-8).unwrap();
        assert!((a[0] + 1.0).abs() < 1e-9 && (a[1] - 1.0).abs() < 1e-9);
        // -1 * 1 and min(2 * 1, 1.2 * 1) = 1.2 -> mean 0.1
        let j = clipped_surrogate(&a, &[1.0, 2.0], 0.2).unwrap();
        assert!((j - 0.1).abs() < 1e-6);
    }

    #[test]
    fn degenerate_groups() {
        assert_eq!(group_advantages(&[3.0], 1e-8), Err(GrpoError::GroupTooSmall(1)));
        assert_eq!(group_advantages(&[2.0, 2.0, 2.0], 0.0).unwrap(), [0.0, 0.0, 0.0]);
        assert!(group_advantages(&[1.0, f64::NAN], 0.0).is_err());
    }

    #[test]
    fn ratio_cap() {
        assert!((importance_ratio(0.0, 0.0, 1e4) - 1.0).abs() < 1e-15);
        assert_eq!(importance_ratio(100.0, 0.0, 1e4), 1e4);
    }
}
