//! Turns raw model output into an [`ExpertResponse`].
//!
//! A response is a sequence of marked sections. Chinese markers are primary,
//! English ones are accepted as a fallback, and either half-width or
//! full-width colons may follow a marker:
//!
//! | part        | markers                                                  |
//! |-------------|----------------------------------------------------------|
//! | caption     | `画面描述:` / `Description:` (or free text before the theme) |
//! | theme       | `题材:` / `Theme:`                                       |
//! | rois        | `感兴趣区域:` / `Regions of Interest:` + first valid JSON object |
//! | theme_eval  | `题材评价:` / `Theme Evaluation:`                        |
//! | tier_eval   | `笔墨分析:` `气韵分析:` `意境分析:` (and English equivalents) |
//! | score       | `最终分数:` / `Final rating:` (last occurrence wins)     |

mod roi;
mod score;
mod sections;

use serde::Serialize;
use thiserror::Error;

pub use roi::{json_object_spans, parse_roi_block, render_roi_json, RoiBlock};
pub use score::extract_final_score;
pub use sections::{segment_sections, strip_leading_marker, Section, Segmentation};

use crate::model::{ExpertResponse, TierEvaluation, PART_NAMES};
use crate::theme::detect_theme;
use sections::{scan_boundaries_with, segment_from, MarkerKind, MARKERS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("NoScoreFound: no score marker in text")]
    NoScoreFound,
    #[error("ScoreOutOfRange: {0} is outside 0..=5")]
    ScoreOutOfRange(i64),
    #[error("NonInteger: score token {0:?} is not an integer")]
    NonInteger(String),
    #[error("MalformedJson: block at byte {offset} ({block}) failed to parse: {reason}")]
    MalformedJson { offset: usize, block: String, reason: String },
    #[error("SchemaMismatch: block at byte {offset}: {reason}")]
    SchemaMismatch { offset: usize, reason: String },
    #[error("NoRoiBlock: no JSON object with regions_of_interest")]
    NoRoiBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParseReport {
    pub response: Option<ExpertResponse>,
    pub complete: bool,
    pub missing_parts: Vec<String>,
    pub warnings: Vec<String>,
    /// Hard failures (score or RoI block), formatted from [`ParseError`].
    pub errors: Vec<String>,
}

impl ParseReport {
    /// Whether the response carries every part in the expected format; this
    /// is exactly the predicate the format reward uses.
    pub fn is_complete(&self) -> bool {
        self.complete
    }
}

/// Parses a full expert response. Never fails; problems are recorded in the report.
pub fn parse_expert_response(text: &str, width: u32, height: u32) -> ParseReport {
    let mut warnings = Vec::new();
    let mut errors = Vec::new();

    if text.trim().is_empty() {
        return ParseReport {
            response: None,
            complete: false,
            missing_parts: PART_NAMES.iter().map(|s| s.to_string()).collect(),
            warnings,
            errors: vec![ParseError::NoScoreFound.to_string()],
        };
    }

    let roi_result = parse_roi_block(text, width, height);
    let boundaries = scan_boundaries_with(text, roi_result.as_ref().ok().map(|b| b.span.clone()));
    let segmentation = segment_from(text, &boundaries);
    warnings.extend(segmentation.warnings.iter().cloned());

    let body = |kind: MarkerKind| -> String {
        let mut parts = Vec::new();
        for (i, b) in boundaries.iter().enumerate() {
            if b.kind == kind {
                let end = boundaries.get(i + 1).map_or(text.len(), |n| n.start);
                let t = text[b.marker_end..end].trim();
                if !t.is_empty() {
                    parts.push(t);
                }
            }
        }
        parts.join("\n")
    };

    let mut caption = body(MarkerKind::Caption);
    if caption.is_empty() {
        if let Some(first) = segmentation.sections.first().filter(|s| s.name == "caption" && s.marker.is_empty()) {
            caption = first.text.trim().to_string();
        }
    }

    let theme_text = body(MarkerKind::Theme);
    let theme = if theme_text.is_empty() { None } else { detect_theme(&theme_text) };
    if !theme_text.is_empty() && theme.is_none() {
        warnings.push("theme section names no known theme".to_string());
    }

    let rois = match roi_result {
        Ok(block) => {
            warnings.extend(block.warnings);
            Some(block.regions)
        }
        Err(ParseError::NoRoiBlock) => None,
        Err(e) => {
            errors.push(format!("rois: {e}"));
            None
        }
    };

    let final_score = match extract_final_score(text) {
        Ok(s) => Some(s),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };

    let response = ExpertResponse {
        caption,
        theme_text,
        theme,
        rois,
        theme_eval: body(MarkerKind::ThemeEval),
        tier_eval: TierEvaluation {
            brush_ink: body(MarkerKind::BrushInk),
            spirit_resonance: body(MarkerKind::SpiritResonance),
            artistic_conception: body(MarkerKind::ArtisticConception),
        },
        final_score,
        raw_text: text.to_string(),
    };
    let missing: Vec<String> = response.missing_parts().into_iter().map(str::to_string).collect();
    ParseReport { complete: missing.is_empty(), response: Some(response), missing_parts: missing, warnings, errors }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarkerLanguage {
    #[default]
    Chinese,
    English,
}

fn marker(kind: MarkerKind, lang: MarkerLanguage) -> &'static str {
    let (_, zh, en) = MARKERS.iter().find(|(k, _, _)| *k == kind).expect("every kind has markers");
    match lang {
        MarkerLanguage::Chinese => zh,
        MarkerLanguage::English => en,
    }
}

/// Writes a response in the canonical marked format. Parts that are empty
/// are omitted. `parse_expert_response(render_response(r, ..), ..)` yields
/// `r` back for any response whose section texts are trimmed and marker-free.
pub fn render_response(response: &ExpertResponse, width: u32, height: u32, lang: MarkerLanguage) -> String {
    fn push_line(out: &mut String, kind: MarkerKind, lang: MarkerLanguage, value: &str) {
        if !value.trim().is_empty() {
            out.push_str(marker(kind, lang));
            out.push_str(": ");
            out.push_str(value);
            out.push('\n');
        }
    }

    let mut out = String::new();
    push_line(&mut out, MarkerKind::Caption, lang, &response.caption);
    let theme_text = if response.theme_text.trim().is_empty() {
        response.theme.as_ref().map(|t| t.statement()).unwrap_or_default()
    } else {
        response.theme_text.clone()
    };
    push_line(&mut out, MarkerKind::Theme, lang, &theme_text);
    if let Some(rois) = &response.rois {
        out.push_str(marker(MarkerKind::Rois, lang));
        out.push_str(":\n");
        out.push_str(&render_roi_json(rois, width, height));
        out.push('\n');
    }
    push_line(&mut out, MarkerKind::ThemeEval, lang, &response.theme_eval);
    push_line(&mut out, MarkerKind::BrushInk, lang, &response.tier_eval.brush_ink);
    push_line(&mut out, MarkerKind::SpiritResonance, lang, &response.tier_eval.spirit_resonance);
    push_line(&mut out, MarkerKind::ArtisticConception, lang, &response.tier_eval.artistic_conception);
    if let Some(score) = response.final_score {
        push_line(&mut out, MarkerKind::Score, lang, &score.to_string());
    }
    out
}
