//! Reward terms for reinforcement fine-tuning of an expert-CoT evaluator.
//!
//! * accuracy: `1 - |pred - gt| / 5`, 0 when the prediction has no score
//! * part similarity: mean over the six parts, a missing part scores 0
//! * RoI: greedy argmax matching of predicted to reference boxes, then the
//!   mean of `IoU + description similarity` over predicted regions (range `[0, 2]`)
//! * format: 1 when every part parsed, else 0
//!
//! The total is the weighted sum; with default weights a perfect response
//! scores `10 + 2 + 2 * 2 + 1 = 17`.

use serde::Serialize;

use crate::model::{BoundingBox, ExpertResponse, RewardWeights, RoiRegion, Score, NUM_PARTS};
use crate::parser::{parse_expert_response, ParseReport};
use crate::similarity::Similarity;

pub fn accuracy_reward(pred: Option<Score>, gt: Score) -> f64 {
    match pred {
        // (5 - d) / 5 rather than 1 - d / 5: one rounding, so 0.2 is exactly 0.2
        Some(p) => (5 - p.value().abs_diff(gt.value())) as f64 / 5.0,
        None => 0.0,
    }
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.x_max().min(b.x_max()) - a.x_min().max(b.x_min())).max(0.0);
    let h = (a.y_max().min(b.y_max()) - a.y_min().max(b.y_min())).max(0.0);
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// For each predicted box, the reference box with the highest IoU and that
/// IoU. Several predictions may share one reference; ties go to the lowest
/// reference index. `None` only when `gt` is empty.
pub fn match_boxes(pred: &[BoundingBox], gt: &[BoundingBox]) -> Vec<Option<(usize, f64)>> {
    pred.iter()
        .map(|p| {
            gt.iter().enumerate().fold(None, |best: Option<(usize, f64)>, (j, g)| {
                let v = iou(p, g);
                match best {
                    Some((_, b)) if b >= v => best,
                    _ => Some((j, v)),
                }
            })
        })
        .collect()
}

/// Part-wise similarity reward in `[0, 1]`.
pub fn bert_reward(pred: &ExpertResponse, gt: &ExpertResponse, sim: &dyn Similarity) -> f64 {
    let pairs: Vec<(String, String)> = pred.parts().into_iter().zip(gt.parts()).collect();
    let live: Vec<(String, String)> = pairs.iter().filter(|(p, _)| !p.trim().is_empty()).cloned().collect();
    let scores = sim.batch_similarity(&live);
    scores.iter().fold(0.0, |acc, s| acc + s) / NUM_PARTS as f64
}

/// How one predicted region was scored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoiMatch {
    pub pred_index: usize,
    pub gt_index: usize,
    pub iou: f64,
    pub description_similarity: f64,
}

/// RoI reward in `[0, 2]` plus the per-region matching. No predicted
/// regions, or no reference regions, scores 0.
pub fn miou_reward(pred: &[RoiRegion], gt: &[RoiRegion], sim: &dyn Similarity) -> (f64, Vec<RoiMatch>) {
    if pred.is_empty() || gt.is_empty() {
        return (0.0, Vec::new());
    }
    let pred_boxes: Vec<BoundingBox> = pred.iter().map(|r| r.bbox).collect();
    let gt_boxes: Vec<BoundingBox> = gt.iter().map(|r| r.bbox).collect();
    let assignment: Vec<(usize, f64)> = match_boxes(&pred_boxes, &gt_boxes).into_iter().flatten().collect();
    let pairs: Vec<(String, String)> = assignment
        .iter()
        .enumerate()
        .map(|(i, &(j, _))| (pred[i].description.clone(), gt[j].description.clone()))
        .collect();
    let sims = sim.batch_similarity(&pairs);
    let matches: Vec<RoiMatch> = assignment
        .into_iter()
        .zip(sims)
        .enumerate()
        .map(|(i, ((j, v), s))| RoiMatch { pred_index: i, gt_index: j, iou: v, description_similarity: s })
        .collect();
    let total: f64 = matches.iter().map(|m| m.iou + m.description_similarity).sum();
    (total / pred.len() as f64, matches)
}

pub fn format_reward(report: &ParseReport) -> f64 {
    if report.is_complete() {
        1.0
    } else {
        0.0
    }
}

/// Every reward term for one response, with the weighted total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub r_acc: f64,
    pub r_bert: f64,
    pub r_miou: f64,
    pub r_format: f64,
    pub total: f64,
    pub weights: RewardWeights,
    pub roi_matches: Vec<RoiMatch>,
    pub parse_warnings: Vec<String>,
    pub parse_errors: Vec<String>,
    pub similarity_backend: String,
}

/// Scores an already-parsed response against the reference. `gt` must carry a score.
pub fn reward_from_report(
    report: &ParseReport,
    gt: &ExpertResponse,
    weights: RewardWeights,
    sim: &dyn Similarity,
) -> RewardBreakdown {
    let gt_score = gt.final_score.unwrap_or(Score::MIN);
    let (r_acc, r_bert, (r_miou, roi_matches)) = match &report.response {
        Some(pred) => (
            accuracy_reward(pred.final_score, gt_score),
            bert_reward(pred, gt, sim),
            miou_reward(pred.rois(), gt.rois(), sim),
        ),
        None => (0.0, 0.0, (0.0, Vec::new())),
    };
    let r_format = format_reward(report);
    let total = weights.w_acc * r_acc + weights.w_bert * r_bert + weights.w_miou * r_miou + weights.w_format * r_format;
    RewardBreakdown {
        r_acc,
        r_bert,
        r_miou,
        r_format,
        total,
        weights,
        roi_matches,
        parse_warnings: report.warnings.clone(),
        parse_errors: report.errors.clone(),
        similarity_backend: sim.stamp(),
    }
}

/// Parses `text` and scores it against the reference response.
pub fn final_reward(
    text: &str,
    gt: &ExpertResponse,
    width: u32,
    height: u32,
    weights: RewardWeights,
    sim: &dyn Similarity,
) -> RewardBreakdown {
    reward_from_report(&parse_expert_response(text, width, height), gt, weights, sim)
}
