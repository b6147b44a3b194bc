//! Shared domain types. Everything here is plain data plus validation; no I/O.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::theme::{MajorTheme, Theme};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("score {0} is outside 0..=5")]
    ScoreOutOfRange(i64),
    #[error("{0}")]
    InvalidBox(String),
    #[error("unknown sub-category {0:?}")]
    UnknownSubCategory(String),
    #[error("sub-category {sub:?} belongs to {owner}, not {major}")]
    SubCategoryMismatch { sub: String, major: MajorTheme, owner: MajorTheme },
    #[error("RoiRegion: {0} must be non-empty")]
    EmptyRoiField(&'static str),
    #[error("invalid reward weights: {0}")]
    InvalidWeights(String),
    #[error("invalid GRPO config: {0}")]
    InvalidGrpoConfig(String),
}

/// Integer rating in `0..=5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct Score(u8);

impl Score {
    pub const MIN: Score = Score(0);
    pub const MAX: Score = Score(5);

    pub fn new(value: i64) -> Result<Self, ModelError> {
        if (0..=5).contains(&value) {
            Ok(Score(value as u8))
        } else {
            Err(ModelError::ScoreOutOfRange(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Score> {
        (0..=5).map(Score)
    }
}

impl TryFrom<i64> for Score {
    type Error = ModelError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Score::new(value)
    }
}

impl From<Score> for i64 {
    fn from(score: Score) -> i64 {
        score.0 as i64
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Normalized box, origin top-left, all coordinates in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RawBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

/// Overshoot past `[0, 1]` tolerated (and clamped) when normalizing model output.
pub const COORD_OVERSHOOT: f64 = 0.01;

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, ModelError> {
        let violations = box_violations(x_min, y_min, x_max, y_max);
        if let Some(first) = violations.into_iter().next() {
            return Err(ModelError::InvalidBox(first));
        }
        Ok(BoundingBox { x_min, y_min, x_max, y_max })
    }

    /// Builds a box from model-emitted coordinates. Values greater than
    /// `1 + COORD_OVERSHOOT` mark the box as pixel units, which are divided
    /// by `width`/`height`. Afterwards anything within the overshoot band is
    /// clamped into `[0, 1]`; anything further out is rejected.
    pub fn from_model_coords(coords: [f64; 4], width: u32, height: u32) -> Result<Self, ModelError> {
        let [mut x0, mut y0, mut x1, mut y1] = coords;
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidBox("BoundingBox: coordinates must be finite".into()));
        }
        if coords.iter().any(|&v| v > 1.0 + COORD_OVERSHOOT) {
            if width == 0 || height == 0 {
                return Err(ModelError::InvalidBox(
                    "BoundingBox: pixel coordinates need positive width and height".into(),
                ));
            }
            let (w, h) = (width as f64, height as f64);
            x0 /= w;
            x1 /= w;
            y0 /= h;
            y1 /= h;
        }
        let clamp = |v: f64| -> Result<f64, ModelError> {
            if (-COORD_OVERSHOOT..=1.0 + COORD_OVERSHOOT).contains(&v) {
                Ok(v.clamp(0.0, 1.0))
            } else {
                Err(ModelError::InvalidBox(format!("BoundingBox: coordinate {v} outside [0,1] beyond tolerance")))
            }
        };
        BoundingBox::new(clamp(x0)?, clamp(y0)?, clamp(x1)?, clamp(y1)?)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

/// Every broken box invariant, in a fixed order. Empty means valid.
pub fn box_violations(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Vec<String> {
    let mut out = Vec::new();
    for (name, v) in [("x_min", x_min), ("y_min", y_min), ("x_max", x_max), ("y_max", y_max)] {
        if !(0.0..=1.0).contains(&v) {
            out.push(format!("BoundingBox: {name} in [0,1] violated"));
        }
    }
    // NaN coordinates fail these checks too.
    if x_min.partial_cmp(&x_max) != Some(Ordering::Less) {
        out.push("BoundingBox: x_min < x_max violated".to_string());
    }
    if y_min.partial_cmp(&y_max) != Some(Ordering::Less) {
        out.push("BoundingBox: y_min < y_max violated".to_string());
    }
    if out.is_empty() && (x_max - x_min) * (y_max - y_min) <= 0.0 {
        out.push("BoundingBox: positive area violated".to_string());
    }
    out
}

impl TryFrom<RawBox> for BoundingBox {
    type Error = ModelError;

    fn try_from(raw: RawBox) -> Result<Self, Self::Error> {
        BoundingBox::new(raw.x_min, raw.y_min, raw.x_max, raw.y_max)
    }
}

impl From<BoundingBox> for RawBox {
    fn from(b: BoundingBox) -> Self {
        RawBox { x_min: b.x_min, y_min: b.y_min, x_max: b.x_max, y_max: b.y_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiRegion {
    pub label: String,
    pub description: String,
    #[serde(rename = "bounding_box")]
    pub bbox: BoundingBox,
}

impl RoiRegion {
    pub fn new(
        label: impl Into<String>,
        description: impl Into<String>,
        bbox: BoundingBox,
    ) -> Result<Self, ModelError> {
        let region = RoiRegion { label: label.into(), description: description.into(), bbox };
        if region.label.trim().is_empty() {
            return Err(ModelError::EmptyRoiField("label"));
        }
        if region.description.trim().is_empty() {
            return Err(ModelError::EmptyRoiField("description"));
        }
        Ok(region)
    }
}

/// The three-tier evaluation: brush & ink, spirit resonance, artistic conception.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierEvaluation {
    pub brush_ink: String,
    pub spirit_resonance: String,
    pub artistic_conception: String,
}

impl TierEvaluation {
    pub fn is_complete(&self) -> bool {
        !self.brush_ink.trim().is_empty()
            && !self.spirit_resonance.trim().is_empty()
            && !self.artistic_conception.trim().is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.brush_ink.trim().is_empty()
            && self.spirit_resonance.trim().is_empty()
            && self.artistic_conception.trim().is_empty()
    }
}

/// Number of textual parts compared by the similarity reward.
pub const NUM_PARTS: usize = 6;

/// Canonical part names, in order.
pub const PART_NAMES: [&str; NUM_PARTS] = ["caption", "theme", "rois", "theme_eval", "tier_eval", "score"];

/// A parsed expert chain-of-thought. Parts may be empty when the source text
/// lacked them; [`ExpertResponse::is_complete`] says whether all six are present.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpertResponse {
    pub caption: String,
    /// The theme section as written (e.g. `这是一幅山水画`).
    pub theme_text: String,
    pub theme: Option<Theme>,
    /// `None` when no RoI block was found; `Some(vec![])` for a valid block with no regions.
    pub rois: Option<Vec<RoiRegion>>,
    pub theme_eval: String,
    pub tier_eval: TierEvaluation,
    pub final_score: Option<Score>,
    #[serde(default)]
    pub raw_text: String,
}

impl ExpertResponse {
    pub fn rois(&self) -> &[RoiRegion] {
        self.rois.as_deref().unwrap_or(&[])
    }

    pub fn is_complete(&self) -> bool {
        self.missing_parts().is_empty()
    }

    pub fn missing_parts(&self) -> Vec<&'static str> {
        let mut missing = Vec::new();
        if self.caption.trim().is_empty() {
            missing.push("caption");
        }
        if self.theme.is_none() {
            missing.push("theme");
        }
        if self.rois.is_none() {
            missing.push("rois");
        }
        if self.theme_eval.trim().is_empty() {
            missing.push("theme_eval");
        }
        if !self.tier_eval.is_complete() {
            missing.push("tier_eval");
        }
        if self.final_score.is_none() {
            missing.push("score");
        }
        missing
    }

    /// The K = 6 texts compared part-by-part by the similarity reward, in
    /// [`PART_NAMES`] order. Missing parts are empty strings.
    pub fn parts(&self) -> [String; NUM_PARTS] {
        let theme = if self.theme_text.trim().is_empty() {
            self.theme.as_ref().map(Theme::statement).unwrap_or_default()
        } else {
            self.theme_text.trim().to_string()
        };
        let rois = self.rois().iter().map(|r| r.description.trim()).collect::<Vec<_>>().join("\n");
        let tier = [&self.tier_eval.brush_ink, &self.tier_eval.spirit_resonance, &self.tier_eval.artistic_conception]
            .iter()
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("\n");
        [
            self.caption.trim().to_string(),
            theme,
            rois,
            self.theme_eval.trim().to_string(),
            tier,
            self.final_score.map(|s| s.to_string()).unwrap_or_default(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Authentic,
    Synthetic,
}

impl Provenance {
    pub fn allowed_scores(self) -> std::ops::RangeInclusive<u8> {
        match self {
            Provenance::Authentic => 3..=5,
            Provenance::Synthetic => 0..=3,
        }
    }
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq)]
pub struct PaintingRecord {
    pub id: String,
    pub image_ref: String,
    pub width: u32,
    pub height: u32,
    pub provenance: Provenance,
    pub raw_valuation: Option<f64>,
    pub gt: ExpertResponse,
    pub validated: bool,
}

/// Lists every broken record invariant. Empty means the record is valid.
pub fn validate_record(record: &PaintingRecord) -> Vec<String> {
    let mut out = Vec::new();
    if record.id.trim().is_empty() {
        out.push("id: must be non-empty".to_string());
    }
    if record.width == 0 {
        out.push("width: must be > 0".to_string());
    }
    if record.height == 0 {
        out.push("height: must be > 0".to_string());
    }
    match record.gt.final_score {
        None => out.push("gt.final_score: missing".to_string()),
        Some(score) => {
            if !record.provenance.allowed_scores().contains(&score.value()) {
                out.push("provenance/score tier mismatch".to_string());
            }
        }
    }
    match (record.provenance, record.raw_valuation) {
        (Provenance::Synthetic, Some(_)) => {
            out.push("raw_valuation: only authentic records carry a valuation".to_string())
        }
        (_, Some(v)) if !(v.is_finite() && v > 0.0) => out.push("raw_valuation: must be positive".to_string()),
        _ => {}
    }
    if let Some(theme) = &record.gt.theme {
        if let Some(sub) = theme.sub() {
            if let Err(e) = Theme::with_sub(theme.major(), sub) {
                out.push(format!("gt.theme: {e}"));
            }
        }
    }
    for (i, roi) in record.gt.rois().iter().enumerate() {
        if roi.label.trim().is_empty() {
            out.push(format!("gt.rois[{i}].label: must be non-empty"));
        }
        if roi.description.trim().is_empty() {
            out.push(format!("gt.rois[{i}].description: must be non-empty"));
        }
        let b = roi.bbox;
        for v in box_violations(b.x_min, b.y_min, b.x_max, b.y_max) {
            out.push(format!("gt.rois[{i}]: {v}"));
        }
    }
    out
}

/// Weights of the four reward components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights", into = "RawWeights")]
pub struct RewardWeights {
    pub w_acc: f64,
    pub w_bert: f64,
    pub w_miou: f64,
    pub w_format: f64,
}

#[derive(Serialize, Deserialize)]
struct RawWeights {
    w_acc: f64,
    w_bert: f64,
    w_miou: f64,
    w_format: f64,
}

impl RewardWeights {
    pub fn new(w_acc: f64, w_bert: f64, w_miou: f64, w_format: f64) -> Result<Self, ModelError> {
        let all = [w_acc, w_bert, w_miou, w_format];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ModelError::InvalidWeights("weights must be finite and non-negative".into()));
        }
        if all.iter().all(|w| *w == 0.0) {
            return Err(ModelError::InvalidWeights("at least one weight must be positive".into()));
        }
        Ok(RewardWeights { w_acc, w_bert, w_miou, w_format })
    }

    pub fn scaled(self, c: f64) -> Result<Self, ModelError> {
        RewardWeights::new(self.w_acc * c, self.w_bert * c, self.w_miou * c, self.w_format * c)
    }
}

impl Default for RewardWeights {
    /// 10 / 2 / 2 / 1 for accuracy / similarity / mIoU / format.
    fn default() -> Self {
        RewardWeights { w_acc: 10.0, w_bert: 2.0, w_miou: 2.0, w_format: 1.0 }
    }
}

impl TryFrom<RawWeights> for RewardWeights {
    type Error = ModelError;
    fn try_from(r: RawWeights) -> Result<Self, Self::Error> {
        RewardWeights::new(r.w_acc, r.w_bert, r.w_miou, r.w_format)
    }
}

impl From<RewardWeights> for RawWeights {
    fn from(w: RewardWeights) -> Self {
        RawWeights { w_acc: w.w_acc, w_bert: w.w_bert, w_miou: w.w_miou, w_format: w.w_format }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrpo", into = "RawGrpo")]
pub struct GrpoConfig {
    pub group_size: usize,
    pub clip_epsilon: f64,
    pub std_floor: f64,
    /// Importance ratios above this are capped.
    pub max_ratio: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGrpo {
    group_size: usize,
    clip_epsilon: f64,
    std_floor: f64,
    #[serde(default = "default_max_ratio")]
    max_ratio: f64,
}

fn default_max_ratio() -> f64 {
    1e4
}

impl GrpoConfig {
    pub fn new(group_size: usize, clip_epsilon: f64, std_floor: f64) -> Result<Self, ModelError> {
        GrpoConfig { group_size, clip_epsilon, std_floor, max_ratio: default_max_ratio() }.validated()
    }

    pub fn validated(self) -> Result<Self, ModelError> {
        if self.group_size < 2 {
            return Err(ModelError::InvalidGrpoConfig(format!("group_size must be >= 2, got {}", self.group_size)));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(ModelError::InvalidGrpoConfig(format!(
                "clip_epsilon must be in (0,1), got {}",
                self.clip_epsilon
            )));
        }
        if !(self.std_floor >= 0.0 && self.std_floor.is_finite()) {
            return Err(ModelError::InvalidGrpoConfig("std_floor must be finite and >= 0".into()));
        }
        if self.max_ratio.is_nan() || self.max_ratio <= 0.0 {
            return Err(ModelError::InvalidGrpoConfig("max_ratio must be positive".into()));
        }
        Ok(self)
    }
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig { group_size: 8, clip_epsilon: 0.2, std_floor: 1e-8, max_ratio: default_max_ratio() }
    }
}

impl TryFrom<RawGrpo> for GrpoConfig {
    type Error = ModelError;
    fn try_from(r: RawGrpo) -> Result<Self, Self::Error> {
        GrpoConfig {
            group_size: r.group_size,
            clip_epsilon: r.clip_epsilon,
            std_floor: r.std_floor,
            max_ratio: r.max_ratio,
        }
        .validated()
    }
}

impl From<GrpoConfig> for RawGrpo {
    fn from(c: GrpoConfig) -> Self {
        RawGrpo {
            group_size: c.group_size,
            clip_epsilon: c.clip_epsilon,
            std_floor: c.std_floor,
            max_ratio: c.max_ratio,
        }
    }
}
