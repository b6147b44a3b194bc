//! Best-of-N selection: sample N images for one prompt, score each with the
//! evaluator model, keep the highest-scoring one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Aspect, ChatClient, ChatMessage, ChatRequest, GatewayError, GenerationRequest, ImageClient};
use crate::model::{ExpertResponse, Score};
use crate::parser::parse_expert_response;
use crate::prompts::{EXPERT_COT_FORMAT_ZH, EXPERT_COT_PROMPT_ZH, EXPERT_COT_TEMPLATE_ID, SCORE_REPROMPT_ZH};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("ScoreUnparseable: no readable score after one re-prompt")]
    ScoreUnparseable,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BonError {
    #[error("n must be >= 1")]
    InvalidN,
    /// Carries the full run so the caller can still persist it.
    #[error("NoValidCandidates: none of the {} candidates could be scored", .0.n)]
    NoValidCandidates(Box<BonRunRecord>),
}

/// Pixel dimensions assumed for a generated image of the given aspect.
pub fn aspect_dims(aspect: Aspect) -> (u32, u32) {
    match aspect {
        Aspect::Hanging => (1024, 1536),
        Aspect::Handscroll => (1536, 1024),
        Aspect::Square | Aspect::Free => (1024, 1024),
    }
}

pub fn evaluation_prompt() -> String {
    format!("{EXPERT_COT_PROMPT_ZH}{EXPERT_COT_FORMAT_ZH}")
}

/// Asks the evaluator to grade one image. When the reply has no readable
/// score, re-prompts once for the score alone; the two replies are parsed
/// together so the retry's score wins.
pub fn score_candidate(
    image_ref: &str,
    dims: (u32, u32),
    evaluator: &dyn ChatClient,
    model_id: &str,
) -> Result<(ExpertResponse, Score), ScoreError> {
    let first_turn = ChatMessage::user_with_image(evaluation_prompt(), image_ref);
    let first = evaluator.chat(&ChatRequest::new(model_id, vec![first_turn.clone()]))?;
    let report = parse_expert_response(&first, dims.0, dims.1);
    if let Some(resp) = report.response {
        if let Some(score) = resp.final_score {
            return Ok((resp, score));
        }
    }
    log::info!("no score in evaluator reply for {image_ref}; re-prompting once");
    let retry_req = ChatRequest::new(
        model_id,
        vec![first_turn, ChatMessage::assistant(first.clone()), ChatMessage::user(SCORE_REPROMPT_ZH)],
    );
    let second = evaluator.chat(&retry_req)?;
    let combined = format!("{first}\n{second}");
    let report = parse_expert_response(&combined, dims.0, dims.1);
    match report.response {
        Some(resp) => match resp.final_score {
            Some(score) => Ok((resp, score)),
            None => Err(ScoreError::ScoreUnparseable),
        },
        None => Err(ScoreError::ScoreUnparseable),
    }
}

/// Index of the highest score; ties go to the lowest index.
pub fn select_best(scored: &[(usize, Score)]) -> Option<usize> {
    scored
        .iter()
        .copied()
        .reduce(|best, c| if c.1 > best.1 || (c.1 == best.1 && c.0 < best.0) { c } else { best })
        .map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub seed: u64,
    pub image_ref: Option<String>,
    pub response: Option<ExpertResponse>,
    pub score: Option<Score>,
    pub failure_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub evaluator_model: String,
    pub t2i_model: String,
    pub prompt_template: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonRunRecord {
    pub prompt: String,
    pub n: usize,
    pub aspect: Aspect,
    pub base_seed: u64,
    pub candidates: Vec<Candidate>,
    pub winner_index: Option<usize>,
    pub config_snapshot: ConfigSnapshot,
}

impl BonRunRecord {
    pub fn winner(&self) -> Option<&Candidate> {
        self.winner_index.map(|i| &self.candidates[i])
    }

    /// One JSON line, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(self).expect("record serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BonConfig {
    pub n: usize,
    pub base_seed: u64,
    pub aspect: Aspect,
    pub evaluator_model: String,
    pub t2i_model: String,
    pub parallelism: usize,
}

impl Default for BonConfig {
    fn default() -> Self {
        BonConfig {
            n: 8,
            base_seed: 0,
            aspect: Aspect::Free,
            evaluator_model: "evaluator".into(),
            t2i_model: "t2i".into(),
            parallelism: 8,
        }
    }
}

fn run_candidate(
    prompt: &str,
    index: usize,
    config: &BonConfig,
    t2i: &dyn ImageClient,
    evaluator: &dyn ChatClient,
) -> Candidate {
    let seed = config.base_seed.wrapping_add(index as u64);
    let mut cand = Candidate { index, seed, image_ref: None, response: None, score: None, failure_note: None };
    let request = GenerationRequest {
        prompt: prompt.to_string(),
        aspect: config.aspect,
        model_id: config.t2i_model.clone(),
        seed: Some(seed),
    };
    let image = match t2i.generate_image(&request) {
        Ok(r) => r,
        Err(e) => {
            cand.failure_note = Some(format!("generation failed: {e}"));
            return cand;
        }
    };
    cand.image_ref = Some(image.clone());
    match score_candidate(&image, aspect_dims(config.aspect), evaluator, &config.evaluator_model) {
        Ok((resp, score)) => {
            cand.response = Some(resp);
            cand.score = Some(score);
        }
        Err(e) => cand.failure_note = Some(e.to_string()),
    }
    cand
}

/// Generates `config.n` candidates with seeds `base_seed + i`, scores them
/// concurrently and picks the winner. The record lists candidates in index
/// order whatever the completion order.
pub fn run_bon(
    prompt: &str,
    config: &BonConfig,
    t2i: &dyn ImageClient,
    evaluator: &dyn ChatClient,
) -> Result<BonRunRecord, BonError> {
    if config.n == 0 {
        return Err(BonError::InvalidN);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.parallelism.max(1)).build().expect("thread pool");
    let candidates: Vec<Candidate> = pool
        .install(|| (0..config.n).into_par_iter().map(|i| run_candidate(prompt, i, config, t2i, evaluator)).collect());
    let scored: Vec<(usize, Score)> = candidates.iter().filter_map(|c| c.score.map(|s| (c.index, s))).collect();
    let record = BonRunRecord {
        prompt: prompt.to_string(),
        n: config.n,
        aspect: config.aspect,
        base_seed: config.base_seed,
        winner_index: select_best(&scored),
        candidates,
        config_snapshot: ConfigSnapshot {
            evaluator_model: config.evaluator_model.clone(),
            t2i_model: config.t2i_model.clone(),
            prompt_template: EXPERT_COT_TEMPLATE_ID.to_string(),
        },
    };
    if record.winner_index.is_none() {
        return Err(BonError::NoValidCandidates(Box::new(record)));
    }
    Ok(record)
}
