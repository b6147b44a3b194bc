use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::Serialize;

use super::DatasetError;
use crate::gateway::{ChatClient, ChatMessage, ChatRequest, GatewayError};
use crate::model::{ExpertResponse, PaintingRecord, Provenance, Score};
use crate::parser::{parse_expert_response, segment_sections};
use crate::prompts::{preconditioning_message, round_prompt, ROUND5_RETRY_ZH, T2I_PROMPT_REQUEST_ZH};

/// Why a constructed chain-of-thought needs a human look.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum CotFlag {
    ScoreInconsistent { expected: Score, got: Option<Score> },
    Incomplete { missing: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CotOutcome {
    pub id: String,
    pub response: ExpertResponse,
    /// The assembled transcript that was parsed.
    pub transcript: String,
    pub retried_final_round: bool,
    pub flags: Vec<CotFlag>,
}

impl CotOutcome {
    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

fn roi_wrapped(reply: &str) -> String {
    let has_marker = segment_sections(reply).sections.iter().any(|s| s.name == "rois" && !s.marker.is_empty());
    if has_marker {
        reply.to_string()
    } else {
        format!("感兴趣区域:\n{reply}")
    }
}

fn assemble(replies: &[String]) -> String {
    let mut parts: Vec<String> = replies.iter().map(|r| r.trim().to_string()).collect();
    if let Some(r) = parts.get_mut(1) {
        *r = roi_wrapped(r);
    }
    parts.join("\n")
}

/// Runs the five-round construction dialogue for one record. The known score,
/// provenance and (when set) theme are disclosed in a system message. If the
/// parsed score disagrees with the label, the final round is asked again
/// once; a persisting disagreement, or any missing part, is flagged.
pub fn build_cot(
    record: &PaintingRecord,
    constructor: &dyn ChatClient,
    model_id: &str,
) -> Result<CotOutcome, DatasetError> {
    let expected = record.gt.final_score.ok_or_else(|| DatasetError::ValidationFailure {
        line: 0,
        id: record.id.clone(),
        violations: vec!["gt.final_score: missing".into()],
    })?;
    let hint = record.gt.theme.as_ref().map(|t| t.statement());
    let mut messages = vec![ChatMessage::system(preconditioning_message(
        expected.value(),
        record.provenance == Provenance::Authentic,
        hint.as_deref(),
    ))];
    let unavailable = |e: GatewayError| DatasetError::ConstructorUnavailable { id: record.id.clone(), source: e };
    let mut replies = Vec::with_capacity(5);
    for round in 0..5 {
        let text = round_prompt(round, record.width, record.height);
        messages.push(if round == 0 {
            ChatMessage::user_with_image(text, record.image_ref.clone())
        } else {
            ChatMessage::user(text)
        });
        let reply = constructor.chat(&ChatRequest::new(model_id, messages.clone())).map_err(unavailable)?;
        messages.push(ChatMessage::assistant(reply.clone()));
        replies.push(reply);
    }

    let mut transcript = assemble(&replies);
    let mut report = parse_expert_response(&transcript, record.width, record.height);
    let parsed_score = |r: &crate::parser::ParseReport| r.response.as_ref().and_then(|x| x.final_score);
    let mut retried = false;
    if parsed_score(&report) != Some(expected) {
        retried = true;
        log::info!("{}: final score disagrees with the label, asking the final round again", record.id);
        messages.push(ChatMessage::user(ROUND5_RETRY_ZH));
        let reply = constructor.chat(&ChatRequest::new(model_id, messages)).map_err(unavailable)?;
        replies[4] = reply;
        transcript = assemble(&replies);
        report = parse_expert_response(&transcript, record.width, record.height);
    }

    let mut flags = Vec::new();
    let got = parsed_score(&report);
    if got != Some(expected) {
        flags.push(CotFlag::ScoreInconsistent { expected, got });
    }
    if !report.complete {
        flags.push(CotFlag::Incomplete { missing: report.missing_parts.clone() });
    }
    let response = report.response.unwrap_or_default();
    Ok(CotOutcome { id: record.id.clone(), response, transcript, retried_final_round: retried, flags })
}

/// Builds chains for many records concurrently; results come back sorted by id.
pub fn build_cots(
    records: &[PaintingRecord],
    constructor: &dyn ChatClient,
    model_id: &str,
    parallelism: usize,
) -> Vec<(String, Result<CotOutcome, DatasetError>)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build().expect("thread pool");
    let mut out: Vec<_> =
        pool.install(|| records.par_iter().map(|r| (r.id.clone(), build_cot(r, constructor, model_id))).collect());
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Stores a constructed chain as the record's reference response. The label
/// stays authoritative: the score and theme of the record are kept.
pub fn attach_cot(record: &mut PaintingRecord, outcome: &CotOutcome) {
    let mut gt = outcome.response.clone();
    gt.final_score = record.gt.final_score;
    if record.gt.theme.is_some() {
        gt.theme = record.gt.theme.clone();
    }
    if outcome.is_flagged() {
        record.validated = false;
    }
    record.gt = gt;
}

static PROMPT_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[Prompt\s*(\d+)\]\s*[:：]").unwrap());

/// Extracts the bodies of `[PromptN]:` entries in order of appearance.
/// Empty and placeholder (`<promptN>`) bodies are skipped.
pub fn parse_prompt_list(text: &str) -> Vec<String> {
    let marks: Vec<_> = PROMPT_MARKER.find_iter(text).collect();
    marks
        .iter()
        .enumerate()
        .filter_map(|(i, m)| {
            let end = marks.get(i + 1).map_or(text.len(), |n| n.start());
            let body = text[m.end()..end].trim();
            let placeholder = body.starts_with('<') && body.ends_with('>');
            (!body.is_empty() && !placeholder).then(|| body.to_string())
        })
        .collect()
}

/// Asks the prompt-writer model for text-to-image prompts.
pub fn generate_t2i_prompts(client: &dyn ChatClient, model_id: &str, seed: u64) -> Result<Vec<String>, GatewayError> {
    let mut request = ChatRequest::new(model_id, vec![ChatMessage::user(T2I_PROMPT_REQUEST_ZH)]);
    request.seed = Some(seed);
    request.temperature = 1.0;
    let reply = client.chat(&request)?;
    let prompts = parse_prompt_list(&reply);
    if prompts.is_empty() {
        return Err(GatewayError::ResponseEmpty);
    }
    Ok(prompts)
}
