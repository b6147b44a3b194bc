//! Evaluation metrics: score regression and classification, theme accuracy,
//! RoI detection quality, and ranking correlations.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ExpertResponse, RoiRegion, Score};
use crate::reward::{bert_reward, iou, match_boxes};
use crate::similarity::Similarity;
use crate::theme::MajorTheme;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("LengthMismatch: {0} predictions vs {1} references")]
    LengthMismatch(usize, usize),
    #[error("EmptyInput")]
    EmptyInput,
    #[error("NotAPermutation: {0}")]
    NotAPermutation(String),
    #[error("SizeMismatch: rankings of size {0} and {1}")]
    SizeMismatch(usize, usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
}

fn check_lengths(a: usize, b: usize) -> Result<(), MetricsError> {
    if a != b {
        return Err(MetricsError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreMetrics {
    pub n: usize,
    pub mae: f64,
    pub rmse: f64,
    pub accuracy: f64,
}

pub fn score_metrics(preds: &[Score], gts: &[Score]) -> Result<ScoreMetrics, MetricsError> {
    check_lengths(preds.len(), gts.len())?;
    let n = preds.len() as f64;
    let (mut abs, mut sq, mut hits) = (0.0, 0.0, 0usize);
    for (p, g) in preds.iter().zip(gts) {
        let d = p.value() as f64 - g.value() as f64;
        abs += d.abs();
        sq += d * d;
        hits += usize::from(p == g);
    }
    Ok(ScoreMetrics { n: preds.len(), mae: abs / n, rmse: (sq / n).sqrt(), accuracy: hits as f64 / n })
}

/// Fraction of matching major themes. A missing prediction counts as wrong.
pub fn theme_accuracy(preds: &[Option<MajorTheme>], gts: &[MajorTheme]) -> Result<f64, MetricsError> {
    check_lengths(preds.len(), gts.len())?;
    let hits = preds.iter().zip(gts).filter(|(p, g)| **p == Some(**g)).count();
    Ok(hits as f64 / preds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionMetrics {
    /// Mean IoU over every matched (prediction, reference) pair in the set.
    pub miou: f64,
    /// Mean description similarity over the same pairs.
    pub roi_similarity: f64,
    pub avg_pred_count: f64,
    pub avg_gt_count: f64,
    pub n_pairs: usize,
}

/// Pools matched pairs over all images. Images with no reference regions
/// contribute no pairs; with no pairs at all both means are 0.
pub fn detection_metrics(
    pred_sets: &[Vec<RoiRegion>],
    gt_sets: &[Vec<RoiRegion>],
    sim: &dyn Similarity,
) -> Result<DetectionMetrics, MetricsError> {
    if pred_sets.len() != gt_sets.len() {
        return Err(MetricsError::LengthMismatch(pred_sets.len(), gt_sets.len()));
    }
    let mut ious = Vec::new();
    let mut pairs = Vec::new();
    for (preds, gts) in pred_sets.iter().zip(gt_sets) {
        let pb: Vec<_> = preds.iter().map(|r| r.bbox).collect();
        let gb: Vec<_> = gts.iter().map(|r| r.bbox).collect();
        for (i, m) in match_boxes(&pb, &gb).into_iter().enumerate() {
            if let Some((j, _)) = m {
                ious.push(iou(&pb[i], &gb[j]));
                pairs.push((preds[i].description.clone(), gts[j].description.clone()));
            }
        }
    }
    let sims = sim.batch_similarity(&pairs);
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let images = pred_sets.len().max(1) as f64;
    Ok(DetectionMetrics {
        miou: mean(&ious),
        roi_similarity: mean(&sims),
        avg_pred_count: pred_sets.iter().map(Vec::len).sum::<usize>() as f64 / images,
        avg_gt_count: gt_sets.iter().map(Vec::len).sum::<usize>() as f64 / images,
        n_pairs: ious.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauVariant {
    TauA,
    TauB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankCorrelationReport {
    pub n: usize,
    pub kendall_tau: f64,
    pub spearman_rho: f64,
    pub top1_accuracy: f64,
    pub pairwise_accuracy: f64,
    pub tau_variant: TauVariant,
}

fn check_permutation(rank: &[usize]) -> Result<(), MetricsError> {
    let mut seen = vec![false; rank.len()];
    for &r in rank {
        if r == 0 || r > rank.len() || seen[r - 1] {
            return Err(MetricsError::NotAPermutation(format!("{rank:?} is not a permutation of 1..={}", rank.len())));
        }
        seen[r - 1] = true;
    }
    Ok(())
}

/// Counts inversions by merge sort.
fn count_inversions(values: &mut [usize]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut values[..mid]) + count_inversions(&mut values[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if values[i] <= values[j] {
            merged.push(values[i]);
            i += 1;
        } else {
            merged.push(values[j]);
            inv += (mid - i) as u64;
            j += 1;
        }
    }
    merged.extend_from_slice(&values[i..mid]);
    merged.extend_from_slice(&values[j..n]);
    values.copy_from_slice(&merged);
    inv
}

/// Correlations between two tie-free rankings, where `rank_a[i]` is the
/// 1-based rank of item `i`. Kendall is tau-a, computed in O(n log n).
pub fn rank_correlations(rank_a: &[usize], rank_b: &[usize]) -> Result<RankCorrelationReport, MetricsError> {
    if rank_a.len() != rank_b.len() {
        return Err(MetricsError::SizeMismatch(rank_a.len(), rank_b.len()));
    }
    check_permutation(rank_a)?;
    check_permutation(rank_b)?;
    let n = rank_a.len();
    if n < 2 {
        return Err(MetricsError::EmptyInput);
    }
    // Order items by rank_a and count inversions of rank_b in that order.
    let mut b_in_a_order = vec![0; n];
    for (i, &ra) in rank_a.iter().enumerate() {
        b_in_a_order[ra - 1] = rank_b[i];
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let discordant = count_inversions(&mut b_in_a_order) as f64;
    let concordant = pairs - discordant;
    let d2: f64 = rank_a.iter().zip(rank_b).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
    let nf = n as f64;
    let top_a = rank_a.iter().position(|&r| r == 1);
    let top_b = rank_b.iter().position(|&r| r == 1);
    Ok(RankCorrelationReport {
        n,
        kendall_tau: (concordant - discordant) / pairs,
        spearman_rho: 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0)),
        top1_accuracy: if top_a == top_b { 1.0 } else { 0.0 },
        pairwise_accuracy: concordant / pairs,
        tau_variant: TauVariant::TauA,
    })
}

/// Average ranks (1-based, ascending value gets rank 1), ties share their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Correlations between two score vectors that may contain ties: Kendall
/// tau-b and Spearman on average ranks. Higher score means better; the top
/// item of each side is chosen by [`scores_to_ranking`].
pub fn rank_correlations_tied(scores_a: &[f64], scores_b: &[f64]) -> Result<RankCorrelationReport, MetricsError> {
    if scores_a.len() != scores_b.len() {
        return Err(MetricsError::SizeMismatch(scores_a.len(), scores_b.len()));
    }
    if let Some(i) = scores_a.iter().chain(scores_b).position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(i % scores_a.len().max(1)));
    }
    let n = scores_a.len();
    if n < 2 {
        return Err(MetricsError::EmptyInput);
    }
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let da = scores_a[i] - scores_a[j];
            let db = scores_b[i] - scores_b[j];
            if da == 0.0 {
                ties_a += 1;
            }
            if db == 0.0 {
                ties_b += 1;
            }
            let s = da * db;
            if s > 0.0 {
                concordant += 1;
            } else if s < 0.0 {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let denom = ((pairs - ties_a as f64) * (pairs - ties_b as f64)).sqrt();
    let tau = if denom == 0.0 { 0.0 } else { (concordant as f64 - discordant as f64) / denom };
    let top = |s: &[f64]| scores_to_ranking(s).ok().and_then(|r| r.iter().position(|&x| x == 1));
    Ok(RankCorrelationReport {
        n,
        kendall_tau: tau,
        spearman_rho: pearson(&average_ranks(scores_a), &average_ranks(scores_b)),
        top1_accuracy: if top(scores_a) == top(scores_b) { 1.0 } else { 0.0 },
        pairwise_accuracy: concordant as f64 / pairs,
        tau_variant: TauVariant::TauB,
    })
}

/// Converts scores to 1-based ranks (highest score gets rank 1). Equal scores
/// are ranked by ascending index.
pub fn scores_to_ranking(scores: &[f64]) -> Result<Vec<usize>, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if let Some(i) = scores.iter().position(|v| v.is_nan()) {
        return Err(MetricsError::NonFinite(i));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    let mut ranks = vec![0; scores.len()];
    for (pos, &item) in order.iter().enumerate() {
        ranks[item] = pos + 1;
    }
    Ok(ranks)
}

/// Everything the evaluate command reports. Absent values serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub n: usize,
    /// Predictions without a readable score, excluded from mae/rmse/accuracy.
    pub n_unparsed: usize,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub accuracy: Option<f64>,
    pub bertscore_parts: Option<f64>,
    pub bertscore_full: Option<f64>,
    pub miou: Option<f64>,
    pub roi_bertscore: Option<f64>,
    pub theme_acc: Option<f64>,
    pub kendall_tau: Option<f64>,
    pub spearman_rho: Option<f64>,
    pub top1_acc: Option<f64>,
    pub similarity_backend: String,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One `key=value` line per field; absent values print as `NA`.
    pub fn to_kv(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = String::new();
        for (k, v) in value.as_object().expect("report is an object") {
            let text = match v {
                serde_json::Value::Null => "NA".to_string(),
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => match n.as_f64() {
                    Some(f) if n.is_f64() => format!("{f:.6}"),
                    _ => n.to_string(),
                },
                other => other.to_string(),
            };
            let _ = writeln!(out, "{k}={text}");
        }
        out
    }
}

/// Full evaluation of predicted responses against references. `full_texts`
/// pairs the raw predicted text with the reference's rendered text for the
/// whole-document similarity. Kendall/Spearman compare predicted and
/// reference scores over the scored items (tau-b, since scores repeat).
pub fn evaluate_responses(
    preds: &[Option<ExpertResponse>],
    gts: &[ExpertResponse],
    full_texts: &[(String, String)],
    sim: &dyn Similarity,
) -> Result<MetricReport, MetricsError> {
    check_lengths(preds.len(), gts.len())?;
    if full_texts.len() != preds.len() {
        return Err(MetricsError::LengthMismatch(full_texts.len(), preds.len()));
    }
    let n = preds.len();
    let mut scored_p = Vec::new();
    let mut scored_g = Vec::new();
    for (p, g) in preds.iter().zip(gts) {
        if let (Some(ps), Some(gs)) = (p.as_ref().and_then(|r| r.final_score), g.final_score) {
            scored_p.push(ps);
            scored_g.push(gs);
        }
    }
    let sm = score_metrics(&scored_p, &scored_g).ok();

    let empty = ExpertResponse::default();
    let parts: f64 = preds.iter().zip(gts).map(|(p, g)| bert_reward(p.as_ref().unwrap_or(&empty), g, sim)).sum();
    let full = sim.batch_similarity(full_texts).iter().sum::<f64>() / n as f64;

    let pred_rois: Vec<Vec<RoiRegion>> =
        preds.iter().map(|p| p.as_ref().map(|r| r.rois().to_vec()).unwrap_or_default()).collect();
    let gt_rois: Vec<Vec<RoiRegion>> = gts.iter().map(|g| g.rois().to_vec()).collect();
    let det = detection_metrics(&pred_rois, &gt_rois, sim)?;

    let themed: Vec<(Option<MajorTheme>, MajorTheme)> = preds
        .iter()
        .zip(gts)
        .filter_map(|(p, g)| {
            Some((p.as_ref().and_then(|r| r.theme.as_ref()).map(|t| t.major()), g.theme.as_ref()?.major()))
        })
        .collect();
    let theme_acc = if themed.is_empty() {
        None
    } else {
        let (tp, tg): (Vec<_>, Vec<_>) = themed.into_iter().unzip();
        theme_accuracy(&tp, &tg).ok()
    };

    let as_f = |v: &[Score]| v.iter().map(|s| s.value() as f64).collect::<Vec<_>>();
    let rank = rank_correlations_tied(&as_f(&scored_p), &as_f(&scored_g)).ok();

    Ok(MetricReport {
        n,
        n_unparsed: n - scored_p.len(),
        mae: sm.map(|m| m.mae),
        rmse: sm.map(|m| m.rmse),
        accuracy: sm.map(|m| m.accuracy),
        bertscore_parts: Some(parts / n as f64),
        bertscore_full: Some(full),
        miou: (det.n_pairs > 0).then_some(det.miou),
        roi_bertscore: (det.n_pairs > 0).then_some(det.roi_similarity),
        theme_acc,
        kendall_tau: rank.map(|r| r.kendall_tau),
        spearman_rho: rank.map(|r| r.spearman_rho),
        top1_acc: None,
        similarity_backend: sim.stamp(),
    })
}
