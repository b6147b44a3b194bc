use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DatasetError;
use crate::model::{PaintingRecord, Score};

/// Tier for the item whose doubled average 0-based position is `pos2` among
/// `n` items. Percentile `p = pos2 / 2n`; `p < 0.1` gives 5, `p < 0.6` gives
/// 4, anything else 3. Integer arithmetic keeps the boundaries exact.
fn tier(pos2: usize, n: usize) -> u8 {
    if 10 * pos2 < 2 * n {
        5
    } else if 5 * pos2 < 6 * n {
        4
    } else {
        3
    }
}

/// Assigns 3/4/5 to authentic works by valuation rank. Results are in input
/// order. Equal valuations share the tier of their average rank.
pub fn scale_auction_labels(valuations: &[(String, f64)]) -> Result<Vec<(String, Score)>, DatasetError> {
    if valuations.is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    if let Some((id, v)) = valuations.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
        return Err(DatasetError::NonPositiveValuation { id: id.clone(), value: *v });
    }
    let n = valuations.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| valuations[j].1.total_cmp(&valuations[i].1));
    let mut scores = vec![Score::MIN; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && valuations[order[end]].1 == valuations[order[start]].1 {
            end += 1;
        }
        // positions start..end, average (start + end - 1) / 2
        let t = tier(start + end - 1, n);
        for &k in &order[start..end] {
            scores[k] = Score::new(t as i64).expect("tiers are valid scores");
        }
        start = end;
    }
    Ok(valuations.iter().map(|(id, _)| id.clone()).zip(scores).collect())
}

/// Passes synthetic quality labels (0..=3) through, dropping ids in `rejected`.
pub fn ingest_synthetic_labels(
    assignments: &[(String, i64)],
    rejected: &HashSet<String>,
) -> Result<Vec<(String, Score)>, DatasetError> {
    let mut out = Vec::with_capacity(assignments.len());
    for (id, label) in assignments {
        if !(0..=3).contains(label) {
            return Err(DatasetError::LabelOutOfRange { id: id.clone(), label: *label });
        }
        if !rejected.contains(id) {
            out.push((id.clone(), Score::new(*label).expect("checked range")));
        }
    }
    Ok(out)
}

/// One reviewer verdict on one record.
#[derive(Debug, Clone, PartialEq, Eq, serde::Deserialize)]
pub struct ExpertReview {
    pub id: String,
    pub approved: bool,
    #[serde(default)]
    pub reviewer: String,
}

/// Applies reviewer verdicts: a record with any rejection is removed; a
/// record whose reviews are all approvals becomes `validated`. Records
/// without reviews are left as they are. Returns the removed ids.
pub fn apply_expert_reviews(records: &mut Vec<PaintingRecord>, reviews: &[ExpertReview]) -> Vec<String> {
    let mut verdicts: HashMap<&str, bool> = HashMap::new();
    for r in reviews {
        let entry = verdicts.entry(r.id.as_str()).or_insert(true);
        *entry &= r.approved;
    }
    let mut removed = Vec::new();
    records.retain_mut(|rec| match verdicts.get(rec.id.as_str()) {
        Some(false) => {
            removed.push(rec.id.clone());
            false
        }
        Some(true) => {
            rec.validated = true;
            true
        }
        None => true,
    });
    removed
}

/// Downsamples over-represented score classes so that the largest class has
/// at most `floor(tolerance * smallest)` members. Kept records stay in their
/// original order; sampling is seeded. Tolerances below 1 act as 1; an
/// infinite tolerance returns the input unchanged.
pub fn balance_records(records: Vec<PaintingRecord>, tolerance: f64, seed: u64) -> Vec<PaintingRecord> {
    if tolerance.is_infinite() || tolerance.is_nan() || records.is_empty() {
        return records;
    }
    let tolerance = tolerance.max(1.0);
    let mut classes: BTreeMap<Option<u8>, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        classes.entry(r.gt.final_score.map(Score::value)).or_default().push(i);
    }
    let min = classes.values().map(Vec::len).min().unwrap_or(0);
    let cap = (tolerance * min as f64).floor() as usize;
    let mut keep = vec![false; records.len()];
    for (class, members) in &classes {
        if members.len() <= cap {
            members.iter().for_each(|&i| keep[i] = true);
        } else {
            let class_seed = seed ^ (class.map_or(0xFF, u64::from) << 56);
            let mut rng = ChaCha8Rng::seed_from_u64(class_seed);
            for k in sample(&mut rng, members.len(), cap) {
                keep[members[k]] = true;
            }
        }
    }
    records.into_iter().zip(keep).filter_map(|(r, k)| k.then_some(r)).collect()
}
