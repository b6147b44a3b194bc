//! Painting theme taxonomy: three major themes, each with a fixed list of
//! sub-categories. Canonical names are Chinese; English aliases are accepted
//! on input but never stored.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MajorTheme {
    Landscape,
    FlowersBirds,
    Figure,
}

impl MajorTheme {
    pub const ALL: [MajorTheme; 3] = [MajorTheme::Landscape, MajorTheme::FlowersBirds, MajorTheme::Figure];

    /// Canonical Chinese keyword (山水 / 花鸟 / 人物).
    pub fn keyword(self) -> &'static str {
        match self {
            MajorTheme::Landscape => "山水",
            MajorTheme::FlowersBirds => "花鸟",
            MajorTheme::Figure => "人物",
        }
    }

    pub fn english_aliases(self) -> &'static [&'static str] {
        match self {
            MajorTheme::Landscape => &["Landscape"],
            MajorTheme::FlowersBirds => {
                &["Flowers&Birds", "Flower&Bird", "Flowers & Birds", "Flower and Bird", "Flowers and Birds"]
            }
            MajorTheme::Figure => &["Figure"],
        }
    }

    /// Sub-categories as `(canonical, english alias)` pairs.
    pub fn sub_categories(self) -> &'static [(&'static str, &'static str)] {
        match self {
            MajorTheme::Landscape => {
                &[("青绿山水", "blue&green"), ("水墨山水", "ink&wash"), ("浅绛山水", "light ocher")]
            }
            MajorTheme::FlowersBirds => &[
                ("花卉", "flower"),
                ("禽鸟", "bird&fowl"),
                ("翎毛", "feather"),
                ("蔬果", "vegetables&fruits"),
                ("草虫", "insect&grass"),
                ("畜兽", "domestic animal"),
                ("鳞介", "scaled&shelled creatures"),
                ("鱼藻", "fish&aquatic plants"),
            ],
            MajorTheme::Figure => &[
                ("历史故事", "historical story"),
                ("宗教人物", "religious figure"),
                ("文人雅士", "literati and scholars"),
                ("仕女", "court lady"),
                ("市井风俗", "genre painting of urban life"),
                ("农耕商旅", "farming and commerce"),
                ("现实人物", "contemporary figures"),
            ],
        }
    }

    /// Parses a manifest-style name: the enum name, the Chinese keyword, or an alias.
    pub fn from_name(name: &str) -> Option<MajorTheme> {
        let trimmed = name.trim();
        MajorTheme::ALL.into_iter().find(|m| {
            trimmed == m.keyword()
                || trimmed == format!("{}画", m.keyword())
                || trimmed.eq_ignore_ascii_case(m.as_str())
                || m.english_aliases().iter().any(|a| trimmed.eq_ignore_ascii_case(a))
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MajorTheme::Landscape => "Landscape",
            MajorTheme::FlowersBirds => "FlowersBirds",
            MajorTheme::Figure => "Figure",
        }
    }
}

impl fmt::Display for MajorTheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Resolves a sub-category (canonical or English alias) to its canonical
/// Chinese form and the major theme it belongs to.
pub fn resolve_sub_category(name: &str) -> Option<(MajorTheme, &'static str)> {
    let trimmed = name.trim();
    for major in MajorTheme::ALL {
        for &(canonical, alias) in major.sub_categories() {
            if trimmed == canonical || trimmed.eq_ignore_ascii_case(alias) {
                return Some((major, canonical));
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTheme", into = "RawTheme")]
pub struct Theme {
    major: MajorTheme,
    sub: Option<String>,
}

impl Theme {
    pub fn new(major: MajorTheme) -> Self {
        Theme { major, sub: None }
    }

    /// Builds a theme with a sub-category. The sub-category may be given as
    /// its English alias; it is stored in canonical Chinese form and must
    /// belong to `major`.
    pub fn with_sub(major: MajorTheme, sub: &str) -> Result<Self, ModelError> {
        match resolve_sub_category(sub) {
            Some((owner, canonical)) if owner == major => Ok(Theme { major, sub: Some(canonical.to_string()) }),
            Some((owner, _)) => Err(ModelError::SubCategoryMismatch { sub: sub.to_string(), major, owner }),
            None => Err(ModelError::UnknownSubCategory(sub.to_string())),
        }
    }

    pub fn major(&self) -> MajorTheme {
        self.major
    }

    pub fn sub(&self) -> Option<&str> {
        self.sub.as_deref()
    }

    /// The statement a gold response uses for the theme section, e.g. `山水画（青绿山水）`.
    pub fn statement(&self) -> String {
        match &self.sub {
            Some(sub) => format!("{}画（{}）", self.major.keyword(), sub),
            None => format!("{}画", self.major.keyword()),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawTheme {
    major: MajorTheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sub: Option<String>,
}

impl TryFrom<RawTheme> for Theme {
    type Error = ModelError;

    fn try_from(raw: RawTheme) -> Result<Self, Self::Error> {
        match raw.sub {
            Some(sub) => Theme::with_sub(raw.major, &sub),
            None => Ok(Theme::new(raw.major)),
        }
    }
}

impl From<Theme> for RawTheme {
    fn from(theme: Theme) -> Self {
        RawTheme { major: theme.major, sub: theme.sub }
    }
}

/// Finds a theme mentioned in free text. The earliest major-theme keyword
/// (Chinese or English) wins; when no major keyword is present, a
/// sub-category mention implies its major. The first sub-category of the
/// chosen major found in the text is attached.
pub fn detect_theme(text: &str) -> Option<Theme> {
    let lower = text.to_lowercase();
    let mut best: Option<(usize, MajorTheme)> = None;
    for major in MajorTheme::ALL {
        let mut positions: Vec<usize> = text.match_indices(major.keyword()).map(|(i, _)| i).collect();
        for alias in major.english_aliases() {
            positions.extend(lower.match_indices(&alias.to_lowercase()).map(|(i, _)| i));
        }
        if let Some(&pos) = positions.iter().min() {
            if best.is_none_or(|(p, _)| pos < p) {
                best = Some((pos, major));
            }
        }
    }

    // "flower" must not match inside "flowers&birds".
    let mut masked = lower.clone();
    for major in MajorTheme::ALL {
        for alias in major.english_aliases() {
            let alias = alias.to_lowercase();
            masked = masked.replace(&alias, &" ".repeat(alias.len()));
        }
    }
    let find_sub = |major: MajorTheme| -> Option<(usize, &'static str)> {
        major
            .sub_categories()
            .iter()
            .filter_map(|&(canonical, alias)| {
                let hit = text.find(canonical).or_else(|| masked.find(&alias.to_lowercase()));
                hit.map(|pos| (pos, canonical))
            })
            .min()
    };

    let major = match best {
        Some((_, major)) => major,
        None => {
            let (_, major) = MajorTheme::ALL.into_iter().filter_map(|m| find_sub(m).map(|(pos, _)| (pos, m))).min()?;
            major
        }
    };
    Some(Theme { major, sub: find_sub(major).map(|(_, s)| s.to_string()) })
}
