//! Chain-of-thought construction and label handling against scripted constructors.

use std::sync::{Arc, Mutex};

use inkeval::dataset::{attach_cot, build_cot, build_cots, CotFlag, DatasetError};
use inkeval::gateway::mock::{ExpertMock, MockChatClient};
use inkeval::gateway::{ChatRequest, GatewayError, Role};
use inkeval::model::{ExpertResponse, PaintingRecord, Provenance, Score};
use inkeval::prompts::{ROUND1_ZH, ROUND5_RETRY_ZH};
use inkeval::theme::{MajorTheme, Theme};

fn record(id: &str, score: u8) -> PaintingRecord {
    PaintingRecord {
        id: id.into(),
        image_ref: format!("images/{id}.jpg"),
        width: 800,
        height: 1600,
        provenance: if score >= 3 { Provenance::Authentic } else { Provenance::Synthetic },
        raw_valuation: (score >= 3).then_some(12_000.0),
        gt: ExpertResponse {
            final_score: Some(Score::new(score as i64).unwrap()),
            theme: Some(Theme::new(MajorTheme::FlowersBirds)),
            ..Default::default()
        },
        validated: true,
    }
}

/// Replies that answer every round, with the final round scripted.
fn rounds(finals: Vec<&'static str>, log: Arc<Mutex<Vec<ChatRequest>>>) -> MockChatClient {
    let finals = Mutex::new(finals.into_iter());
    MockChatClient::new(move |req| {
        log.lock().unwrap().push(req.clone());
        Ok(match req.user_turns() {
            1 => "画面描述: 折枝海棠，一只小鸟立于枝头。".into(),
            2 => r#"{"width": 800, "height": 1600, "num_regions": 1, "regions_of_interest": [{"label": "小鸟", "description": "点睛之笔", "bounding_box": {"x_min": 200, "y_min": 300, "x_max": 500, "y_max": 700}}]}"#.into(),
            3 => "题材: 这是一幅花鸟画".into(),
            4 => "题材评价: 构图疏密得当。\n笔墨分析: 勾勒细劲。\n气韵分析: 生意盎然。\n意境分析: 清新雅致。".into(),
            _ => finals.lock().unwrap().next().unwrap_or("最终分数: 0").into(),
        })
    })
}

#[test]
fn dialogue_shape_and_clean_outcome() {
    let log = Arc::new(Mutex::new(Vec::new()));
    let client = rounds(vec!["最终分数: 4"], Arc::clone(&log));
    let out = build_cot(&record("a1", 4), &client, "constructor-x").unwrap();
    assert!(out.flags.is_empty() && !out.retried_final_round);
    assert_eq!(out.response.final_score, Some(Score::new(4).unwrap()));
    assert_eq!(out.response.rois()[0].bbox.coords(), [0.25, 0.1875, 0.625, 0.4375]);
    assert!(out.transcript.contains("感兴趣区域:\n{"));

    let log = log.lock().unwrap();
    assert_eq!(log.len(), 5);
    let first = &log[0];
    assert_eq!(first.model_id, "constructor-x");
    assert_eq!(first.messages[0].role, Role::System);
    assert!(first.messages[0].text.contains('4') && first.messages[0].text.contains("花鸟"));
    assert_eq!(first.image_ref(), Some("images/a1.jpg"));
    assert!(first.last_user_text().unwrap().starts_with(&ROUND1_ZH[..12]));
    // Each round carries the full history.
    assert_eq!(log[4].messages.len(), 1 + 4 * 2 + 1);
}

#[test]
fn disagreement_is_retried_once_then_flagged() {
    let log = Arc::new(Mutex::new(Vec::new()));
    let fixed = rounds(vec!["最终分数: 3", "最终分数: 5"], Arc::clone(&log));
    let out = build_cot(&record("a2", 5), &fixed, "m").unwrap();
    assert!(out.retried_final_round && out.flags.is_empty());
    assert_eq!(log.lock().unwrap().last().unwrap().last_user_text(), Some(ROUND5_RETRY_ZH));

    let stubborn = rounds(vec!["最终分数: 3", "最终分数: 3"], Arc::new(Mutex::new(Vec::new())));
    let out = build_cot(&record("a3", 5), &stubborn, "m").unwrap();
    let expected = Score::new(5).unwrap();
    assert_eq!(out.flags, vec![CotFlag::ScoreInconsistent { expected, got: Some(Score::new(3).unwrap()) }]);

    let mut rec = record("a3", 5);
    attach_cot(&mut rec, &out);
    assert!(!rec.validated);
    assert_eq!(rec.gt.final_score, Some(expected));
    assert_eq!(rec.gt.theme, Some(Theme::new(MajorTheme::FlowersBirds)));
    assert!(rec.gt.caption.contains("海棠"));
}

#[test]
fn constructor_failures_and_missing_labels() {
    let down = MockChatClient::new(|_| Err(GatewayError::Transient("connection reset".into())));
    let err = build_cot(&record("b1", 2), &down, "m").unwrap_err();
    assert!(matches!(err, DatasetError::ConstructorUnavailable { ref id, .. } if id == "b1"), "{err:?}");

    let mut unlabeled = record("b2", 2);
    unlabeled.gt.final_score = None;
    assert!(matches!(build_cot(&unlabeled, &ExpertMock::new(), "m"), Err(DatasetError::ValidationFailure { .. })));
}

#[test]
fn batch_results_are_sorted_and_deterministic() {
    let records: Vec<PaintingRecord> = (0..12).rev().map(|i| record(&format!("c{i:02}"), (i % 6) as u8)).collect();
    let mock = ExpertMock::new();
    let a = build_cots(&records, &mock, "m", 1);
    let b = build_cots(&records, &mock, "m", 6);
    let ids: Vec<&str> = a.iter().map(|(id, _)| id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort_unstable();
    assert_eq!(ids, sorted);
    for ((ia, ra), (ib, rb)) in a.iter().zip(&b) {
        assert_eq!(ia, ib);
        assert_eq!(ra.as_ref().unwrap(), rb.as_ref().unwrap());
        assert!(ra.as_ref().unwrap().flags.is_empty());
    }
}
