use std::ops::Range;

use serde_json::Value;

use super::ParseError;
use crate::model::{BoundingBox, RoiRegion};

/// Result of locating and reading an RoI JSON block.
#[derive(Debug, Clone, PartialEq)]
pub struct RoiBlock {
    pub regions: Vec<RoiRegion>,
    /// Byte range of the JSON object within the source text.
    pub span: Range<usize>,
    pub warnings: Vec<String>,
}

/// Byte spans of brace-balanced `{...}` candidates, outermost only, in
/// document order. Braces inside JSON string literals are ignored.
pub fn json_object_spans(text: &str) -> Vec<Range<usize>> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'{' {
            i += 1;
            continue;
        }
        let start = i;
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        let mut end = None;
        let mut j = i;
        while j < bytes.len() {
            let b = bytes[j];
            if in_str {
                if escaped {
                    escaped = false;
                } else if b == b'\\' {
                    escaped = true;
                } else if b == b'"' {
                    in_str = false;
                }
            } else {
                match b {
                    b'"' => in_str = true,
                    b'{' => depth += 1,
                    b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            end = Some(j + 1);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            j += 1;
        }
        match end {
            Some(e) => {
                spans.push(start..e);
                i = e;
            }
            // Unbalanced: report the remainder as one candidate and stop.
            None => {
                spans.push(start..bytes.len());
                break;
            }
        }
    }
    spans
}

fn snippet(text: &str) -> String {
    let s: String = text.chars().take(40).collect();
    if s.len() < text.len() {
        format!("{s}…")
    } else {
        s
    }
}

/// Reads the first schema-valid RoI JSON object in `text`.
///
/// Boxes in pixel units are normalized with `width`/`height`. Regions whose
/// geometry or text is invalid are skipped with a warning, and a declared
/// `num_regions` that disagrees with the list length adds a warning.
pub fn parse_roi_block(text: &str, width: u32, height: u32) -> Result<RoiBlock, ParseError> {
    let mut first_error: Option<ParseError> = None;
    for span in json_object_spans(text) {
        let candidate = &text[span.clone()];
        let value: Value = match serde_json::from_str(candidate) {
            Ok(v) => v,
            Err(e) => {
                first_error.get_or_insert(ParseError::MalformedJson {
                    offset: span.start,
                    block: snippet(candidate),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        match read_schema(&value, width, height) {
            Ok((regions, warnings)) => return Ok(RoiBlock { regions, span, warnings }),
            Err(reason) => {
                first_error.get_or_insert(ParseError::SchemaMismatch { offset: span.start, reason });
            }
        }
    }
    Err(first_error.unwrap_or(ParseError::NoRoiBlock))
}

fn read_schema(value: &Value, width: u32, height: u32) -> Result<(Vec<RoiRegion>, Vec<String>), String> {
    let obj = value.as_object().ok_or("not a JSON object")?;
    let list = obj
        .get("regions_of_interest")
        .ok_or("missing key \"regions_of_interest\"")?
        .as_array()
        .ok_or("\"regions_of_interest\" is not an array")?;

    // Geometry is validated per region; schema shape is all-or-nothing.
    let mut raw = Vec::with_capacity(list.len());
    for (i, item) in list.iter().enumerate() {
        let label = item.get("label").and_then(Value::as_str).ok_or(format!("region {i}: missing string \"label\""))?;
        let description = item
            .get("description")
            .and_then(Value::as_str)
            .ok_or(format!("region {i}: missing string \"description\""))?;
        let bbox = item.get("bounding_box").ok_or(format!("region {i}: missing \"bounding_box\""))?;
        let mut coords = [0.0; 4];
        // Also accepts the bare [x_min, y_min, x_max, y_max] array models often emit.
        match bbox.as_array() {
            Some(arr) if arr.len() == 4 => {
                for (slot, v) in coords.iter_mut().zip(arr) {
                    *slot = v.as_f64().ok_or(format!("region {i}: non-numeric \"bounding_box\" entry"))?;
                }
            }
            Some(_) => return Err(format!("region {i}: \"bounding_box\" array must have 4 numbers")),
            None => {
                for (slot, key) in coords.iter_mut().zip(["x_min", "y_min", "x_max", "y_max"]) {
                    *slot =
                        bbox.get(key).and_then(Value::as_f64).ok_or(format!("region {i}: missing number \"{key}\""))?;
                }
            }
        }
        raw.push((label, description, coords));
    }

    let mut warnings = Vec::new();
    if let Some(declared) = obj.get("num_regions") {
        if declared.as_u64() != Some(list.len() as u64) {
            warnings.push(format!("num_regions mismatch: declared {declared}, found {}", list.len()));
        }
    }
    let mut regions = Vec::with_capacity(raw.len());
    for (i, (label, description, coords)) in raw.into_iter().enumerate() {
        let region = BoundingBox::from_model_coords(coords, width, height)
            .and_then(|b| RoiRegion::new(label.trim(), description.trim(), b));
        match region {
            Ok(r) => regions.push(r),
            Err(e) => warnings.push(format!("region {i} rejected: {e}")),
        }
    }
    Ok((regions, warnings))
}

/// Serializes regions in the round-2 JSON shape.
pub fn render_roi_json(regions: &[RoiRegion], width: u32, height: u32) -> String {
    let regions_json: Vec<Value> = regions
        .iter()
        .map(|r| {
            serde_json::json!({
                "label": r.label,
                "description": r.description,
                "bounding_box": {
                    "x_min": r.bbox.x_min(),
                    "y_min": r.bbox.y_min(),
                    "x_max": r.bbox.x_max(),
                    "y_max": r.bbox.y_max(),
                }
            })
        })
        .collect();
    let doc = serde_json::json!({
        "height": height,
        "width": width,
        "num_regions": regions.len(),
        "regions_of_interest": regions_json,
    });
    serde_json::to_string_pretty(&doc).expect("serializing a JSON value cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
  "height": 1000,
  "width": 1000,
  "num_regions": 1,
  "regions_of_interest": [
    {"label": "主峰", "description": "画面的视觉中心", "bounding_box": {"x_min": 0.1, "y_min": 0.1, "x_max": 0.9, "y_max": 0.9}}
  ]
}"#;

    #[test]
    fn schema_echo() {
        let block = parse_roi_block(EXAMPLE, 1000, 1000).unwrap();
        assert_eq!(block.regions.len(), 1);
        assert_eq!(block.regions[0].label, "主峰");
        assert_eq!(block.regions[0].bbox.coords(), [0.1, 0.1, 0.9, 0.9]);
        assert!(block.warnings.is_empty());
    }

    #[test]
    fn num_regions_mismatch_warns() {
        let text = EXAMPLE.replace("\"num_regions\": 1", "\"num_regions\": 2");
        let block = parse_roi_block(&text, 1000, 1000).unwrap();
        assert_eq!(block.regions.len(), 1);
        assert!(block.warnings[0].starts_with("num_regions mismatch"));
    }

    #[test]
    fn pixel_coordinates_are_normalized() {
        let text = EXAMPLE
            .replace("0.1, \"y_min\": 0.1", "100, \"y_min\": 100")
            .replace("0.9, \"y_max\": 0.9", "900, \"y_max\": 900");
        let block = parse_roi_block(&text, 1000, 1000).unwrap();
        // oracle: 100/1000 and 900/1000
        assert_eq!(block.regions[0].bbox.coords(), [100.0 / 1000.0, 100.0 / 1000.0, 900.0 / 1000.0, 900.0 / 1000.0]);
    }

    #[test]
    fn array_boxes() {
        let text =
            r#"{"regions_of_interest": [{"label": "a", "description": "b", "bounding_box": [100, 0, 500, 250]}]}"#;
        let block = parse_roi_block(text, 1000, 500).unwrap();
        assert_eq!(block.regions[0].bbox.coords(), [0.1, 0.0, 0.5, 0.5]);
        let short = text.replace("[100, 0, 500, 250]", "[100, 0, 500]");
        assert!(matches!(parse_roi_block(&short, 1000, 500), Err(ParseError::SchemaMismatch { .. })));
    }

    #[test]
    fn first_schema_valid_block_wins() {
        let text = format!("前言 {{\"note\": 1}} 然后 {EXAMPLE} 以及 {}", EXAMPLE.replace("主峰", "次峰"));
        let block = parse_roi_block(&text, 1000, 1000).unwrap();
        assert_eq!(block.regions[0].label, "主峰");
        assert_eq!(&text[block.span.clone()], EXAMPLE);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_roi_block("没有区域", 10, 10), Err(ParseError::NoRoiBlock));
        assert!(matches!(
            parse_roi_block("{\"regions_of_interest\": [}", 10, 10),
            Err(ParseError::MalformedJson { .. })
        ));
        assert!(matches!(parse_roi_block("{\"height\": 3}", 10, 10), Err(ParseError::SchemaMismatch { .. })));
        let missing_box = r#"{"regions_of_interest": [{"label": "a", "description": "b"}]}"#;
        assert!(matches!(parse_roi_block(missing_box, 10, 10), Err(ParseError::SchemaMismatch { .. })));
    }

    #[test]
    fn braces_in_strings_and_bad_regions() {
        let text = r#"{"num_regions": 2, "regions_of_interest": [
            {"label": "a}", "description": "含{括号", "bounding_box": {"x_min": 0.0, "y_min": 0.0, "x_max": 0.5, "y_max": 0.5}},
            {"label": "b", "description": "反向", "bounding_box": {"x_min": 0.7, "y_min": 0.0, "x_max": 0.3, "y_max": 0.5}}]}"#;
        let block = parse_roi_block(text, 10, 10).unwrap();
        assert_eq!(block.regions.len(), 1);
        assert_eq!(block.regions[0].label, "a}");
        assert!(block.warnings[0].contains("x_min < x_max"));
    }

    #[test]
    fn render_then_parse() {
        let block = parse_roi_block(EXAMPLE, 1000, 1000).unwrap();
        let rendered = render_roi_json(&block.regions, 1000, 1000);
        assert_eq!(parse_roi_block(&rendered, 1000, 1000).unwrap().regions, block.regions);
    }
}
