use std::fmt;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// Mounting format inferred from the aspect ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScrollType {
    /// 立轴
    HangingScroll,
    /// 方幅
    SquareFormat,
    /// 横卷
    Handscroll,
}

impl ScrollType {
    pub fn chinese(self) -> &'static str {
        match self {
            ScrollType::HangingScroll => "立轴",
            ScrollType::SquareFormat => "方幅",
            ScrollType::Handscroll => "横卷",
        }
    }
}

impl fmt::Display for ScrollType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScrollType::HangingScroll => "HangingScroll",
            ScrollType::SquareFormat => "SquareFormat",
            ScrollType::Handscroll => "Handscroll",
        })
    }
}

/// `height / width >= 1.5` is a hanging scroll, `<= 2/3` a handscroll,
/// anything between a square format. Compared in integers.
pub fn classify_scroll_type(width: u32, height: u32) -> Result<ScrollType, DatasetError> {
    if width == 0 || height == 0 {
        return Err(DatasetError::NonPositiveDimensions { width, height });
    }
    let (w, h) = (u64::from(width), u64::from(height));
    Ok(if 2 * h >= 3 * w {
        ScrollType::HangingScroll
    } else if 3 * h <= 2 * w {
        ScrollType::Handscroll
    } else {
        ScrollType::SquareFormat
    })
}
