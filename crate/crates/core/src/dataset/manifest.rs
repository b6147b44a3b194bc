use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scroll::{classify_scroll_type, ScrollType};
use super::DatasetError;
use crate::model::{validate_record, ExpertResponse, PaintingRecord, Provenance, Score};
use crate::theme::{MajorTheme, Theme};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub schema_version: String,
    pub split: Split,
    pub records: Vec<PaintingRecord>,
}

impl Manifest {
    pub fn new(split: Split, records: Vec<PaintingRecord>) -> Self {
        Manifest { schema_version: SCHEMA_VERSION.to_string(), split, records }
    }

    /// Checks id uniqueness and every record invariant.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::ValidationFailure {
                    line: i + 2,
                    id: r.id.clone(),
                    violations: vec!["id: duplicate".into()],
                });
            }
            let violations = validate_record(r);
            if !violations.is_empty() {
                return Err(DatasetError::ValidationFailure { line: i + 2, id: r.id.clone(), violations });
            }
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&PaintingRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Sorts records by id (the canonical output order).
    pub fn sort_by_id(&mut self) {
        self.records.sort_by(|a, b| a.id.cmp(&b.id));
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: String,
    split: Split,
    count: usize,
}

/// One manifest line. Field order is the on-disk order.
#[derive(Serialize, Deserialize)]
struct Line {
    id: String,
    image_ref: String,
    width: u32,
    height: u32,
    provenance: Provenance,
    raw_valuation: Option<f64>,
    theme_major: Option<MajorTheme>,
    theme_sub: Option<String>,
    scroll_type: ScrollType,
    gt_score: Score,
    gt_cot: ExpertResponse,
    validated: bool,
}

fn to_line(r: &PaintingRecord) -> Result<Line, DatasetError> {
    let violations = validate_record(r);
    let (Some(gt_score), true) = (r.gt.final_score, violations.is_empty()) else {
        return Err(DatasetError::ValidationFailure { line: 0, id: r.id.clone(), violations });
    };
    Ok(Line {
        id: r.id.clone(),
        image_ref: r.image_ref.clone(),
        width: r.width,
        height: r.height,
        provenance: r.provenance,
        raw_valuation: r.raw_valuation,
        theme_major: r.gt.theme.as_ref().map(Theme::major),
        theme_sub: r.gt.theme.as_ref().and_then(|t| t.sub().map(str::to_string)),
        scroll_type: classify_scroll_type(r.width, r.height)?,
        gt_score,
        gt_cot: r.gt.clone(),
        validated: r.validated,
    })
}

fn from_line(line: Line, lineno: usize) -> Result<PaintingRecord, DatasetError> {
    let fail =
        |violations: Vec<String>| DatasetError::ValidationFailure { line: lineno, id: line.id.clone(), violations };
    let mut problems = Vec::new();
    if line.gt_cot.final_score.is_some_and(|s| s != line.gt_score) {
        problems.push("gt_cot.final_score disagrees with gt_score".to_string());
    }
    let theme = match (line.theme_major, &line.theme_sub) {
        (None, None) => None,
        (None, Some(_)) => {
            problems.push("theme_sub without theme_major".to_string());
            None
        }
        (Some(major), None) => Some(Theme::new(major)),
        (Some(major), Some(sub)) => match Theme::with_sub(major, sub) {
            Ok(t) => Some(t),
            Err(e) => {
                problems.push(format!("theme: {e}"));
                None
            }
        },
    };
    if line.gt_cot.theme.is_some() && line.gt_cot.theme != theme {
        problems.push("gt_cot.theme disagrees with theme_major/theme_sub".to_string());
    }
    match classify_scroll_type(line.width, line.height) {
        Ok(kind) if kind != line.scroll_type => {
            problems.push(format!("scroll_type {} disagrees with dimensions ({kind})", line.scroll_type))
        }
        Err(e) => problems.push(e.to_string()),
        Ok(_) => {}
    }
    if !problems.is_empty() {
        return Err(fail(problems));
    }
    let mut gt = line.gt_cot.clone();
    gt.final_score = Some(line.gt_score);
    gt.theme = theme;
    let record = PaintingRecord {
        id: line.id.clone(),
        image_ref: line.image_ref.clone(),
        width: line.width,
        height: line.height,
        provenance: line.provenance,
        raw_valuation: line.raw_valuation,
        gt,
        validated: line.validated,
    };
    let violations = validate_record(&record);
    if !violations.is_empty() {
        return Err(fail(violations));
    }
    Ok(record)
}

/// Serializes to JSON lines: a header line, then one record per line.
pub fn manifest_to_string(manifest: &Manifest) -> Result<String, DatasetError> {
    manifest.validate()?;
    let header = Header {
        schema_version: manifest.schema_version.clone(),
        split: manifest.split,
        count: manifest.records.len(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in &manifest.records {
        out.push_str(&serde_json::to_string(&to_line(r)?).expect("line serializes"));
        out.push('\n');
    }
    Ok(out)
}

pub fn manifest_from_str(text: &str) -> Result<Manifest, DatasetError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(DatasetError::EmptyInput)?;
    let header: Header = serde_json::from_str(first).map_err(|e| DatasetError::ValidationFailure {
        line: 1,
        id: String::new(),
        violations: vec![format!("header: {e}")],
    })?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(DatasetError::SchemaVersionMismatch {
            found: header.schema_version,
            expected: SCHEMA_VERSION.into(),
        });
    }
    let mut records = Vec::new();
    for (i, l) in lines {
        let line: Line = serde_json::from_str(l).map_err(|e| DatasetError::ValidationFailure {
            line: i + 1,
            id: String::new(),
            violations: vec![e.to_string()],
        })?;
        records.push(from_line(line, i + 1)?);
    }
    if records.len() != header.count {
        log::warn!("manifest header says {} records, found {}", header.count, records.len());
    }
    let manifest = Manifest { schema_version: header.schema_version, split: header.split, records };
    manifest.validate()?;
    Ok(manifest)
}

/// Writes the manifest atomically (temp file, then rename).
pub fn emit_manifest(manifest: &Manifest, path: &Path) -> Result<(), DatasetError> {
    let text = manifest_to_string(manifest)?;
    let io = |e: std::io::Error| DatasetError::IoFailure(format!("{}: {e}", path.display()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let tmp = path.with_extension("jsonl.tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_manifest(path: &Path) -> Result<Manifest, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::IoFailure(format!("{}: {e}", path.display())))?;
    manifest_from_str(&text)
}
