//! Text similarity used by the part-wise reward, the RoI description reward
//! and the BERTScore-style metrics.
//!
//! The builtin backend is unigram token F1: CJK characters are single
//! tokens, other alphanumeric runs are lowercased words. A remote backend
//! posts batches to a similarity service and falls back to the builtin
//! scorer whenever the service is unreachable or answers with an error.

use std::borrow::Cow;
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::gateway::InflightLimiter;
use crate::parser::strip_leading_marker;

pub trait Similarity: Send + Sync {
    /// Score in `[0, 1]`.
    fn similarity(&self, candidate: &str, reference: &str) -> f64;

    fn batch_similarity(&self, pairs: &[(String, String)]) -> Vec<f64> {
        pairs.iter().map(|(c, r)| self.similarity(c, r)).collect()
    }

    /// Names the backend that produced the scores, for report stamping.
    fn stamp(&self) -> String;
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F
        | 0x3040..=0x30FF | 0xAC00..=0xD7AF)
}

/// Unicode-aware unigram tokenization.
pub fn tokenize(text: &str) -> Vec<String> {
    token_slices(text).into_iter().map(Cow::into_owned).collect()
}

/// Tokens borrowed from `text` where possible; only words with uppercase
/// letters are copied.
fn token_slices(text: &str) -> Vec<Cow<'_, str>> {
    fn word(text: &str) -> Cow<'_, str> {
        if text.chars().any(char::is_uppercase) {
            Cow::Owned(text.to_lowercase())
        } else {
            Cow::Borrowed(text)
        }
    }
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        let cjk = is_cjk(c);
        if let Some(s) = start {
            if cjk || !c.is_alphanumeric() {
                tokens.push(word(&text[s..i]));
                start = None;
            }
        }
        if cjk {
            tokens.push(Cow::Borrowed(&text[i..i + c.len_utf8()]));
        } else if c.is_alphanumeric() && start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(word(&text[s..]));
    }
    tokens
}

static WHITESPACE_RUN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

/// Drops a leading section marker and collapses whitespace runs.
pub fn normalize_text(text: &str) -> String {
    let body = strip_leading_marker(text.trim_start());
    WHITESPACE_RUN.replace_all(body.trim(), " ").into_owned()
}

/// Multiset token F1 between two texts. Empty input on either side scores 0.
pub fn token_f1(candidate: &str, reference: &str) -> f64 {
    // Whitespace never forms tokens, so only the marker needs stripping.
    let cand = token_slices(strip_leading_marker(candidate.trim_start()));
    let refr = token_slices(strip_leading_marker(reference.trim_start()));
    if cand.is_empty() || refr.is_empty() {
        if !candidate.trim().is_empty() || !reference.trim().is_empty() {
            log::debug!("similarity: empty text after tokenization, scoring 0");
        }
        return 0.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::with_capacity(refr.len());
    for t in &refr {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in &cand {
        if let Some(n) = counts.get_mut(t.as_ref()) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / cand.len() as f64;
    let recall = overlap as f64 / refr.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    BuiltinTokenF1,
    RemoteService,
}

pub const BUILTIN_STAMP: &str = "builtin-token-f1";

/// Configured similarity backend.
pub struct SimilarityScorer {
    backend: Backend,
    endpoint: Option<String>,
    timeout: Duration,
    agent: Option<ureq::Agent>,
    limiter: InflightLimiter,
    fallbacks: AtomicUsize,
    remote_ok: AtomicUsize,
}

#[derive(Serialize)]
struct WirePair<'a> {
    candidate: &'a str,
    reference: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    pairs: Vec<WirePair<'a>>,
}

#[derive(Deserialize)]
struct WireResponse {
    scores: Vec<f64>,
}

impl SimilarityScorer {
    pub fn builtin() -> Self {
        SimilarityScorer {
            backend: Backend::BuiltinTokenF1,
            endpoint: None,
            timeout: Duration::from_secs(30),
            agent: None,
            limiter: InflightLimiter::new(8),
            fallbacks: AtomicUsize::new(0),
            remote_ok: AtomicUsize::new(0),
        }
    }

    /// `endpoint` is the service base URL; requests go to `{endpoint}/similarity`.
    pub fn remote(endpoint: impl Into<String>, timeout: Duration, max_inflight: usize) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        SimilarityScorer {
            backend: Backend::RemoteService,
            endpoint: Some(endpoint.into().trim_end_matches('/').to_string()),
            timeout,
            agent: Some(agent),
            limiter: InflightLimiter::new(max_inflight),
            fallbacks: AtomicUsize::new(0),
            remote_ok: AtomicUsize::new(0),
        }
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// How many batches fell back to the builtin scorer.
    pub fn fallback_count(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    fn remote_batch(&self, pairs: &[(String, String)]) -> Result<Vec<f64>, String> {
        let (Some(agent), Some(endpoint)) = (&self.agent, &self.endpoint) else {
            return Err("no endpoint configured".into());
        };
        let body = WireRequest { pairs: pairs.iter().map(|(c, r)| WirePair { candidate: c, reference: r }).collect() };
        let _permit = self.limiter.acquire();
        let mut resp = agent.post(&format!("{endpoint}/similarity")).send_json(&body).map_err(|e| e.to_string())?;
        if resp.status().as_u16() != 200 {
            return Err(format!("HTTP {}", resp.status()));
        }
        let parsed: WireResponse = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        if parsed.scores.len() != pairs.len() {
            return Err(format!("expected {} scores, got {}", pairs.len(), parsed.scores.len()));
        }
        Ok(parsed.scores.into_iter().map(|s| if s.is_finite() { s.clamp(0.0, 1.0) } else { 0.0 }).collect())
    }
}

impl Similarity for SimilarityScorer {
    fn similarity(&self, candidate: &str, reference: &str) -> f64 {
        self.batch_similarity(&[(candidate.to_string(), reference.to_string())])[0]
    }

    fn batch_similarity(&self, pairs: &[(String, String)]) -> Vec<f64> {
        if pairs.is_empty() {
            return Vec::new();
        }
        if self.backend == Backend::RemoteService {
            // Empty texts never reach the service: they score 0 either way.
            let live: Vec<usize> =
                (0..pairs.len()).filter(|&i| !pairs[i].0.trim().is_empty() && !pairs[i].1.trim().is_empty()).collect();
            if live.is_empty() {
                return vec![0.0; pairs.len()];
            }
            let batch: Vec<(String, String)> =
                live.iter().map(|&i| (normalize_text(&pairs[i].0), normalize_text(&pairs[i].1))).collect();
            match self.remote_batch(&batch) {
                Ok(scores) => {
                    self.remote_ok.fetch_add(1, Ordering::Relaxed);
                    let mut out = vec![0.0; pairs.len()];
                    for (i, s) in live.into_iter().zip(scores) {
                        out[i] = s;
                    }
                    return out;
                }
                Err(e) => {
                    self.fallbacks.fetch_add(1, Ordering::Relaxed);
                    log::warn!("similarity service unavailable ({e}); downgrading to {BUILTIN_STAMP}");
                }
            }
        }
        pairs.iter().map(|(c, r)| token_f1(c, r)).collect()
    }

    fn stamp(&self) -> String {
        match (&self.backend, &self.endpoint) {
            (Backend::RemoteService, Some(endpoint)) => {
                let fallbacks = self.fallback_count();
                let ok = self.remote_ok.load(Ordering::Relaxed);
                match (ok, fallbacks) {
                    (_, 0) => format!("remote:{endpoint}"),
                    (0, _) => format!("{BUILTIN_STAMP} (fallback from remote:{endpoint})"),
                    (_, n) => format!("remote:{endpoint} ({n} batches fell back to {BUILTIN_STAMP})"),
                }
            }
            _ => BUILTIN_STAMP.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenization() {
        assert_eq!(tokenize("远山 近水"), ["远", "山", "近", "水"]);
        assert_eq!(tokenize("Brush-and-Ink, 2 strokes"), ["brush", "and", "ink", "2", "strokes"]);
        assert_eq!(tokenize("笔墨ok"), ["笔", "墨", "ok"]);
    }

    #[test]
    fn token_f1_examples() {
        let s = SimilarityScorer::builtin();
        assert_eq!(s.similarity("青绿山水", "青绿山水"), 1.0);
        assert_eq!(s.similarity("山水", "花鸟"), 0.0);
        // P = 4/6, R = 4/4, F1 = 2PR/(P+R) = 0.8
        assert!((s.similarity("远山 近水 孤舟", "远山 孤舟") - 0.8).abs() < 1e-12);
        assert_eq!(s.similarity("", "山水"), 0.0);
        assert_eq!(s.similarity("", ""), 0.0);
    }

    #[test]
    fn batch_matches_elementwise() {
        let s = SimilarityScorer::builtin();
        assert!(s.batch_similarity(&[]).is_empty());
        let pairs: Vec<(String, String)> =
            [("青绿山水", "青绿山水"), ("山水", "花鸟"), ("远山 近水 孤舟", "远山 孤舟")]
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
        let out = s.batch_similarity(&pairs);
        assert_eq!(out[0], 1.0);
        assert_eq!(out[1], 0.0);
        assert!((out[2] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn marker_is_not_semantics() {
        assert_eq!(token_f1("笔墨分析: 线条沉稳", "线条沉稳"), 1.0);
        assert_eq!(normalize_text("  a \n\n b  "), "a b");
    }

    #[test]
    fn unreachable_remote_falls_back() {
        let s = SimilarityScorer::remote("http://127.0.0.1:9", Duration::from_millis(300), 2);
        assert_eq!(s.similarity("青绿山水", "青绿山水"), 1.0);
        assert_eq!(s.fallback_count(), 1);
        assert!(s.stamp().starts_with(BUILTIN_STAMP));
    }
}
