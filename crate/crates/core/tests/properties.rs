//! Property-based invariants over the public API.

mod common;

use std::collections::HashMap;

use common::{gold_response, oracle_advantages, oracle_iou, oracle_kendall, rng};
use inkeval::dataset::{
    apply_expert_reviews, balance_records, classify_scroll_type, manifest_from_str, manifest_to_string,
    scale_auction_labels, ExpertReview, Manifest, ScrollType, Split,
};
use inkeval::grpo::{clipped_surrogate, group_advantages};
use inkeval::metrics::{rank_correlations, rank_correlations_tied, scores_to_ranking};
use inkeval::model::{BoundingBox, ExpertResponse, PaintingRecord, Provenance, Score};
use inkeval::parser::{parse_expert_response, render_response, segment_sections, MarkerLanguage};
use inkeval::reward::{accuracy_reward, iou};
use proptest::prelude::*;
use proptest::sample::SizeRange;

fn unit_box() -> impl Strategy<Value = BoundingBox> {
    (0.0..0.95f64, 0.0..0.95f64, 0.01..1.0f64, 0.01..1.0f64).prop_map(|(x0, y0, fw, fh)| {
        let x1 = (x0 + fw * (1.0 - x0)).max(x0 + 1e-3).min(1.0);
        let y1 = (y0 + fh * (1.0 - y0)).max(y0 + 1e-3).min(1.0);
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    })
}

fn permutation(len: impl Into<SizeRange>) -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(any::<u32>(), len).prop_map(|keys| {
        let mut idx: Vec<usize> = (0..keys.len()).collect();
        idx.sort_by_key(|&i| (keys[i], i));
        let mut rank = vec![0; keys.len()];
        for (pos, &i) in idx.iter().enumerate() {
            rank[i] = pos + 1;
        }
        rank
    })
}

fn record(i: usize, score: u8, seed: u64) -> PaintingRecord {
    let synthetic = score < 3;
    let mut r = rng(seed);
    let mut gt = gold_response(&mut r, (seed % 4) as usize, score);
    let (w, h) = (400 + (seed % 3000) as u32, 400 + (seed / 7 % 3000) as u32);
    gt.raw_text = render_response(&gt, w, h, MarkerLanguage::Chinese);
    PaintingRecord {
        id: format!("r{i:04}"),
        image_ref: format!("img/{i}.jpg"),
        width: w,
        height: h,
        provenance: if synthetic { Provenance::Synthetic } else { Provenance::Authentic },
        raw_valuation: (!synthetic).then_some(1.0 + seed as f64),
        gt,
        validated: seed.is_multiple_of(2),
    }
}

fn score_only(i: usize, score: u8) -> PaintingRecord {
    PaintingRecord {
        gt: ExpertResponse { final_score: Some(Score::new(score as i64).unwrap()), ..Default::default() },
        ..record(i, score, i as u64)
    }
}

proptest! {
    #[test]
    fn accuracy_is_bounded_and_symmetric(p in 0..=5i64, g in 0..=5i64) {
        let (sp, sg) = (Score::new(p).unwrap(), Score::new(g).unwrap());
        let a = accuracy_reward(Some(sp), sg);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert_eq!(a, accuracy_reward(Some(sg), sp));
        prop_assert_eq!(a == 1.0, p == g);
        prop_assert_eq!(accuracy_reward(None, sg), 0.0);
    }

    #[test]
    fn iou_properties(a in unit_box(), b in unit_box()) {
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((v - oracle_iou(a.coords(), b.coords())).abs() < 1e-12);
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn advantages_are_affine_invariant(
        rewards in proptest::collection::vec(-20.0..20.0f64, 2..16),
        scale in 0.1..10.0f64,
        shift in -50.0..50.0f64,
    ) {
        let base = group_advantages(&rewards, 0.0).unwrap();
        let moved: Vec<f64> = rewards.iter().map(|r| r * scale + shift).collect();
        let after = group_advantages(&moved, 0.0).unwrap();
        let spread = rewards.iter().cloned().fold(f64::MIN, f64::max) - rewards.iter().cloned().fold(f64::MAX, f64::min);
        prop_assume!(spread > 1e-6);
        for (x, y) in base.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        let oracle = oracle_advantages(&rewards, 0.0);
        for (x, y) in base.iter().zip(&oracle) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert!(base.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn surrogate_never_exceeds_unclipped(
        pairs in proptest::collection::vec((-3.0..3.0f64, 0.01..5.0f64), 1..20),
        eps in 0.0..0.9f64,
    ) {
        let (adv, ratios): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let clipped = clipped_surrogate(&adv, &ratios, eps).unwrap();
        let plain = adv.iter().zip(&ratios).map(|(a, r)| a * r).sum::<f64>() / adv.len() as f64;
        prop_assert!(clipped <= plain + 1e-12);
        let ones = vec![1.0; adv.len()];
        let at_one = clipped_surrogate(&adv, &ones, eps).unwrap();
        prop_assert!((at_one - adv.iter().sum::<f64>() / adv.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn tau_properties(a in permutation(2..40usize), seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = common::random_permutation(&mut r, a.len());
        let ab = rank_correlations(&a, &b).unwrap();
        let ba = rank_correlations(&b, &a).unwrap();
        prop_assert!((ab.kendall_tau - ba.kendall_tau).abs() < 1e-12);
        prop_assert!((ab.spearman_rho - ba.spearman_rho).abs() < 1e-12);
        prop_assert!((ab.kendall_tau - oracle_kendall(&a, &b)).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab.kendall_tau));
        prop_assert_eq!(rank_correlations(&a, &a).unwrap().kendall_tau, 1.0);

        // Without ties tau-b reduces to tau-a. Rank 1 is best, so negate.
        let fa: Vec<f64> = a.iter().map(|&x| -(x as f64)).collect();
        let fb: Vec<f64> = b.iter().map(|&x| -(x as f64)).collect();
        let tied = rank_correlations_tied(&fa, &fb).unwrap();
        prop_assert!((tied.kendall_tau - ab.kendall_tau).abs() < 1e-12);
        prop_assert!((tied.spearman_rho - ab.spearman_rho).abs() < 1e-9);
        prop_assert_eq!(tied.top1_accuracy, ab.top1_accuracy);
    }

    #[test]
    fn scores_to_ranking_is_a_permutation(scores in proptest::collection::vec(prop_oneof![-5.0..5.0f64, Just(1.0)], 1..50)) {
        let ranks = scores_to_ranking(&scores).unwrap();
        let mut sorted = ranks.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (1..=scores.len()).collect::<Vec<_>>());
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] > scores[j] {
                    prop_assert!(ranks[i] < ranks[j]);
                }
            }
        }
    }

    #[test]
    fn tiers_are_monotone_in_valuation(vals in proptest::collection::vec(prop_oneof![1.0..1e7f64, Just(500.0)], 1..80)) {
        let input: Vec<(String, f64)> = vals.iter().enumerate().map(|(i, v)| (i.to_string(), *v)).collect();
        let tiers = scale_auction_labels(&input).unwrap();
        prop_assert_eq!(tiers.len(), vals.len());
        for i in 0..vals.len() {
            prop_assert_eq!(&tiers[i].0, &input[i].0);
            prop_assert!((3..=5).contains(&tiers[i].1.value()));
            for j in 0..vals.len() {
                if vals[i] > vals[j] {
                    prop_assert!(tiers[i].1 >= tiers[j].1);
                }
                if vals[i] == vals[j] {
                    prop_assert_eq!(tiers[i].1, tiers[j].1);
                }
            }
        }
        prop_assert_eq!(tiers.iter().map(|t| t.1.value()).collect::<Vec<_>>(), common::oracle_tiers(&vals));
    }

    #[test]
    fn balance_caps_classes(scores in proptest::collection::vec(0..=5u8, 1..120), tol in 0.5..3.0f64, seed in any::<u64>()) {
        let records: Vec<PaintingRecord> = scores.iter().enumerate().map(|(i, &s)| score_only(i, s)).collect();
        let kept = balance_records(records.clone(), tol, seed);
        prop_assert_eq!(&kept, &balance_records(records.clone(), tol, seed));
        let count = |rs: &[PaintingRecord]| {
            let mut m: HashMap<u8, usize> = HashMap::new();
            for r in rs {
                *m.entry(r.gt.final_score.unwrap().value()).or_default() += 1;
            }
            m
        };
        let before = count(&records);
        let after = count(&kept);
        let min = *before.values().min().unwrap();
        let cap = (tol.max(1.0) * min as f64).floor() as usize;
        for (class, n) in &before {
            prop_assert_eq!(after[class], (*n).min(cap));
        }
        // Kept records are an order-preserving subsequence.
        let ids: Vec<&str> = kept.iter().map(|r| r.id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        prop_assert_eq!(ids, sorted);
    }

    #[test]
    fn reviews_remove_or_validate(verdicts in proptest::collection::vec(proptest::option::of(proptest::collection::vec(any::<bool>(), 1..3)), 1..30)) {
        let mut records: Vec<PaintingRecord> = (0..verdicts.len()).map(|i| score_only(i, 4)).collect();
        for r in &mut records {
            r.validated = false;
        }
        let reviews: Vec<ExpertReview> = verdicts
            .iter()
            .enumerate()
            .flat_map(|(i, v)| v.iter().flatten().map(move |&ok| ExpertReview { id: format!("r{i:04}"), approved: ok, reviewer: String::new() }))
            .collect();
        let removed = apply_expert_reviews(&mut records, &reviews);
        for (i, v) in verdicts.iter().enumerate() {
            let id = format!("r{i:04}");
            let kept = records.iter().find(|r| r.id == id);
            match v {
                None => prop_assert!(!kept.unwrap().validated),
                Some(vs) if vs.iter().all(|&ok| ok) => prop_assert!(kept.unwrap().validated),
                Some(_) => prop_assert!(kept.is_none() && removed.contains(&id)),
            }
        }
    }

    #[test]
    fn scroll_type_transposes(w in 1..100_000u32, h in 1..100_000u32) {
        let a = classify_scroll_type(w, h).unwrap();
        let b = classify_scroll_type(h, w).unwrap();
        let expected = match a {
            ScrollType::HangingScroll => ScrollType::Handscroll,
            ScrollType::Handscroll => ScrollType::HangingScroll,
            ScrollType::SquareFormat => ScrollType::SquareFormat,
        };
        prop_assert_eq!(b, expected);
    }

    #[test]
    fn parsing_arbitrary_text_never_panics(text in "\\PC{0,300}", w in 1..5000u32, h in 1..5000u32) {
        let report = parse_expert_response(&text, w, h);
        prop_assert_eq!(report.complete, report.missing_parts.is_empty() && report.errors.is_empty() && report.response.as_ref().is_some_and(ExpertResponse::is_complete));
        prop_assert_eq!(segment_sections(&text).reassemble(), text);
    }

    #[test]
    fn marker_heavy_text_is_segmented_losslessly(
        parts in proptest::collection::vec(
            prop_oneof![
                Just("最终分数:".to_string()), Just("Final rating：".to_string()), Just("题材:".to_string()),
                Just("笔墨分析:".to_string()), Just("感兴趣区域:\n{".to_string()), Just("\n".to_string()),
                Just("Caption:".to_string()), "\\PC{0,12}",
            ],
            0..20,
        ),
    ) {
        let text: String = parts.concat();
        prop_assert_eq!(segment_sections(&text).reassemble(), text.clone());
        let _ = parse_expert_response(&text, 100, 100);
    }

    #[test]
    fn render_parse_round_trip(seed in any::<u64>(), n_rois in 0..6usize, score in 0..=5u8, english in any::<bool>(), w in 50..5000u32, h in 50..5000u32) {
        let mut gold = gold_response(&mut rng(seed), n_rois, score);
        let lang = if english { MarkerLanguage::English } else { MarkerLanguage::Chinese };
        let text = render_response(&gold, w, h, lang);
        let report = parse_expert_response(&text, w, h);
        prop_assert!(report.complete, "{:?}", report.missing_parts);
        gold.raw_text = text;
        prop_assert_eq!(report.response.unwrap(), gold);
    }

    #[test]
    fn manifest_round_trip(scores in proptest::collection::vec(0..=5u8, 0..12), seed in any::<u64>(), test_split in any::<bool>()) {
        let records: Vec<PaintingRecord> = scores.iter().enumerate().map(|(i, &s)| record(i, s, seed.wrapping_add(i as u64))).collect();
        let split = if test_split { Split::Test } else { Split::Train };
        let manifest = Manifest::new(split, records);
        let text = manifest_to_string(&manifest).unwrap();
        prop_assert_eq!(manifest_from_str(&text).unwrap(), manifest);
    }
}
