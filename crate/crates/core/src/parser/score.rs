use std::sync::LazyLock;

use regex::Regex;

use super::ParseError;
use crate::model::Score;

pub(crate) static SCORE_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?:最终分数|Final rating)[ \t]*[:：]").unwrap());

/// Reads the integer after the last score marker in `text`.
///
/// Brackets (`[4]`, `【4】`), a trailing `分` and a trailing full stop are
/// tolerated around the number.
pub fn extract_final_score(text: &str) -> Result<Score, ParseError> {
    let last = SCORE_MARKER.find_iter(text).last().ok_or(ParseError::NoScoreFound)?;
    let rest = text[last.end()..].trim_start();
    let rest = rest.strip_prefix(['[', '【', '(', '（']).unwrap_or(rest).trim_start();
    let token: String = rest.chars().take_while(|c| !c.is_whitespace() && !"]】)）,，。;；".contains(*c)).collect();
    let mut number = token.as_str();
    number = number.strip_suffix('分').unwrap_or(number);
    if let Some(stripped) = number.strip_suffix('.') {
        if !stripped.is_empty() && stripped.chars().all(|c| c.is_ascii_digit()) {
            number = stripped;
        }
    }
    let value: i64 = number.parse().map_err(|_| ParseError::NonInteger(token.clone()))?;
    Score::new(value).map_err(|_| ParseError::ScoreOutOfRange(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supplement_formats() {
        assert_eq!(extract_final_score("…分析…\n最终分数: 4").unwrap().value(), 4);
        assert_eq!(extract_final_score("Final rating: [5]").unwrap().value(), 5);
        assert_eq!(extract_final_score("最终分数：【3】").unwrap().value(), 3);
        assert_eq!(extract_final_score("最终分数: 2分。").unwrap().value(), 2);
        assert_eq!(extract_final_score("Final rating: 1.").unwrap().value(), 1);
    }

    #[test]
    fn last_occurrence_wins() {
        assert_eq!(extract_final_score("最终分数: 3 …later… 最终分数: 5").unwrap().value(), 5);
        assert_eq!(extract_final_score("Final rating: 0\n最终分数: 2").unwrap().value(), 2);
    }

    #[test]
    fn failures() {
        assert_eq!(extract_final_score("no score here"), Err(ParseError::NoScoreFound));
        assert_eq!(extract_final_score("最终分数: 7"), Err(ParseError::ScoreOutOfRange(7)));
        assert_eq!(extract_final_score("最终分数: -1"), Err(ParseError::ScoreOutOfRange(-1)));
        assert!(matches!(extract_final_score("最终分数: 4.5"), Err(ParseError::NonInteger(_))));
        assert!(matches!(extract_final_score("Final rating: [Integer Score]"), Err(ParseError::NonInteger(_))));
        assert!(matches!(extract_final_score("最终分数: "), Err(ParseError::NonInteger(_))));
    }
}
