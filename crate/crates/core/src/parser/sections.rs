use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::Serialize;

use super::roi::parse_roi_block;

/// Fine-grained marker kinds, in canonical document order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum MarkerKind {
    Caption,
    Theme,
    Rois,
    ThemeEval,
    BrushInk,
    SpiritResonance,
    ArtisticConception,
    Score,
}

impl MarkerKind {
    fn part_name(self) -> &'static str {
        match self {
            MarkerKind::Caption => "caption",
            MarkerKind::Theme => "theme",
            MarkerKind::Rois => "rois",
            MarkerKind::ThemeEval => "theme_eval",
            MarkerKind::BrushInk | MarkerKind::SpiritResonance | MarkerKind::ArtisticConception => "tier_eval",
            MarkerKind::Score => "score",
        }
    }

    fn is_tier(self) -> bool {
        matches!(self, MarkerKind::BrushInk | MarkerKind::SpiritResonance | MarkerKind::ArtisticConception)
    }

    /// Position of the coarse part in canonical order.
    fn part_rank(self) -> usize {
        match self {
            MarkerKind::Caption => 0,
            MarkerKind::Theme => 1,
            MarkerKind::Rois => 2,
            MarkerKind::ThemeEval => 3,
            MarkerKind::BrushInk | MarkerKind::SpiritResonance | MarkerKind::ArtisticConception => 4,
            MarkerKind::Score => 5,
        }
    }
}

/// Marker keywords, Chinese first then English.
pub(crate) const MARKERS: [(MarkerKind, &str, &str); 8] = [
    (MarkerKind::Caption, "画面描述", "Description"),
    (MarkerKind::Theme, "题材", "Theme"),
    (MarkerKind::Rois, "感兴趣区域", "Regions of Interest"),
    (MarkerKind::ThemeEval, "题材评价", "Theme Evaluation"),
    (MarkerKind::BrushInk, "笔墨分析", "Brush and Ink Analysis"),
    (MarkerKind::SpiritResonance, "气韵分析", "Spirit Resonance Analysis"),
    (MarkerKind::ArtisticConception, "意境分析", "Artistic Conception Analysis"),
    (MarkerKind::Score, "最终分数", "Final rating"),
];

static MARKER_RE: LazyLock<Regex> = LazyLock::new(|| {
    let alts: Vec<String> = MARKERS.iter().flat_map(|(_, zh, en)| [regex::escape(zh), regex::escape(en)]).collect();
    Regex::new(&format!(r"(?:{})[ \t]*[:：]", alts.join("|"))).unwrap()
});

static LEADING_MARKER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(&format!("^(?:{})", MARKER_RE.as_str())).unwrap());

/// Returns `text` without a section marker at its very start.
pub fn strip_leading_marker(text: &str) -> &str {
    match LEADING_MARKER_RE.find(text) {
        Some(m) => &text[m.end()..],
        None => text,
    }
}

fn kind_of(marker: &str) -> MarkerKind {
    let keyword = marker.trim_end_matches([':', '：', ' ', '\t']);
    MARKERS
        .iter()
        .find(|(_, zh, en)| *zh == keyword || *en == keyword)
        .map(|(k, _, _)| *k)
        .expect("regex only matches known markers")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Boundary {
    pub kind: MarkerKind,
    pub start: usize,
    pub marker_end: usize,
}

/// Finds every section boundary. Markers inside the RoI JSON block are
/// ignored; if the text has a JSON block but no RoI marker, the block start
/// becomes an implicit (empty-marker) RoI boundary.
pub(crate) fn scan_boundaries(text: &str) -> Vec<Boundary> {
    scan_boundaries_with(text, parse_roi_block(text, 1, 1).ok().map(|b| b.span))
}

/// [`scan_boundaries`] with the RoI block span already known. Block selection
/// does not depend on image size, so any parse of the block gives the span.
pub(crate) fn scan_boundaries_with(text: &str, json_span: Option<Range<usize>>) -> Vec<Boundary> {
    let inside_json = |pos: usize| json_span.as_ref().is_some_and(|s| s.contains(&pos));
    let mut out: Vec<Boundary> = MARKER_RE
        .find_iter(text)
        .filter(|m| !inside_json(m.start()))
        .map(|m| Boundary { kind: kind_of(m.as_str()), start: m.start(), marker_end: m.end() })
        .collect();
    if let Some(span) = json_span {
        let covered = out.iter().rfind(|b| b.start <= span.start).is_some_and(|b| b.kind == MarkerKind::Rois);
        if !covered {
            out.push(Boundary { kind: MarkerKind::Rois, start: span.start, marker_end: span.start });
            out.sort_by_key(|b| b.start);
        }
    }
    out
}

/// One coarse section of a response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Section {
    /// One of `preamble`, `caption`, `theme`, `rois`, `theme_eval`, `tier_eval`, `score`.
    pub name: String,
    /// The marker text exactly as it appeared (empty for implicit sections).
    pub marker: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Segmentation {
    pub sections: Vec<Section>,
    pub warnings: Vec<String>,
}

impl Segmentation {
    /// Concatenates markers and texts; always equals the segmented input.
    pub fn reassemble(&self) -> String {
        self.sections.iter().flat_map(|s| [s.marker.as_str(), s.text.as_str()]).collect()
    }

    pub fn missing_parts(&self) -> Vec<&'static str> {
        crate::model::PART_NAMES.into_iter().filter(|name| !self.sections.iter().any(|s| s.name == *name)).collect()
    }
}

/// Splits `text` into coarse sections in document order.
///
/// Leading text before the first marker is the caption when no explicit
/// caption marker exists and the first marker belongs to a later part;
/// otherwise it becomes a `preamble` section (with a warning unless it is
/// whitespace). The three tier markers form one `tier_eval` section while
/// they appear consecutively.
pub fn segment_sections(text: &str) -> Segmentation {
    segment_from(text, &scan_boundaries(text))
}

pub(crate) fn segment_from(text: &str, boundaries: &[Boundary]) -> Segmentation {
    let mut seg = Segmentation::default();

    let lead_end = boundaries.first().map_or(text.len(), |b| b.start);
    let lead = &text[..lead_end];
    if !lead.is_empty() {
        let has_caption_marker = boundaries.iter().any(|b| b.kind == MarkerKind::Caption);
        let first_is_later = boundaries.first().is_some_and(|b| b.kind != MarkerKind::Caption);
        let name = if !lead.trim().is_empty() && !has_caption_marker && first_is_later {
            "caption"
        } else {
            if !lead.trim().is_empty() {
                seg.warnings.push(format!("unmatched leading text ({} bytes) kept as preamble", lead.len()));
            }
            "preamble"
        };
        seg.sections.push(Section { name: name.into(), marker: String::new(), text: lead.to_string() });
    }

    let mut prev_kind: Option<MarkerKind> = None;
    let mut last_rank: Option<usize> =
        if seg.sections.first().is_some_and(|s| s.name == "caption") { Some(0) } else { None };
    for (i, b) in boundaries.iter().enumerate() {
        let end = boundaries.get(i + 1).map_or(text.len(), |n| n.start);
        let marker = &text[b.start..b.marker_end];
        let body = &text[b.marker_end..end];
        let continues_tier = b.kind.is_tier() && prev_kind.is_some_and(MarkerKind::is_tier);
        if continues_tier {
            let last = seg.sections.last_mut().expect("tier continuation follows a section");
            last.text.push_str(marker);
            last.text.push_str(body);
        } else {
            let name = b.kind.part_name();
            let rank = b.kind.part_rank();
            if seg.sections.iter().any(|s| s.name == name) {
                seg.warnings.push(format!("duplicate section {name:?}"));
            }
            if last_rank.is_some_and(|r| rank < r) {
                seg.warnings.push(format!("section {name:?} out of canonical order"));
            }
            last_rank = Some(rank);
            seg.sections.push(Section { name: name.into(), marker: marker.to_string(), text: body.to_string() });
        }
        prev_kind = Some(b.kind);
    }
    seg
}
