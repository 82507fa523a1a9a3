//! Text rules shared by the phases: sentence counting and the stage-advance
//! sentinel.

use alloc::string::String;

/// The declaration that lets a campaign leave its current stage.
pub const SENTINEL_PHRASE: &str = "I'm ready to move to the next stage";

/// Counts sentences.
///
/// A boundary is `.`, `!` or `?` followed by whitespace or end of text; a
/// period with digits on both sides (`8.5`) never ends a sentence. Pieces
/// without any alphanumeric character (stray punctuation, blank lines) are
/// not counted.
pub fn count_sentences(text: &str) -> usize {
    let chars: alloc::vec::Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut piece_has_content = false;
    for (i, &ch) in chars.iter().enumerate() {
        if ch.is_alphanumeric() {
            piece_has_content = true;
        }
        if matches!(ch, '.' | '!' | '?') {
            let next = chars.get(i + 1).copied();
            let decimal_point = ch == '.'
                && i > 0
                && chars[i - 1].is_ascii_digit()
                && next.is_some_and(|n| n.is_ascii_digit());
            let at_boundary = next.is_none_or(char::is_whitespace);
            if at_boundary && !decimal_point {
                if piece_has_content {
                    count += 1;
                }
                piece_has_content = false;
            }
        }
    }
    if piece_has_content {
        count += 1;
    }
    count
}

/// Case-folded, whitespace-collapsed form with typographic apostrophes
/// mapped to ASCII and trailing punctuation removed.
pub(crate) fn normalize_for_match(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        let ch = match ch {
            '\u{2018}' | '\u{2019}' | '\u{02BC}' | '\u{2032}' => '\'',
            other => other,
        };
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(ch.to_lowercase());
    }
    while out.ends_with(|c: char| matches!(c, '.' | '!' | '?' | ',' | ';' | ':' | '"' | '\'')) {
        out.pop();
    }
    out
}

/// True iff the feedback contains the sentinel phrase, after normalization.
pub fn detect_sentinel(feedback_text: &str) -> bool {
    normalize_for_match(feedback_text).contains(&normalize_for_match(SENTINEL_PHRASE))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_simple_sentences() {
        assert_eq!(count_sentences("One. Two. Three."), 3);
        assert_eq!(count_sentences(""), 0);
        assert_eq!(count_sentences("   \n\n "), 0);
        assert_eq!(count_sentences("No terminal punctuation"), 1);
        assert_eq!(count_sentences("Really? Yes! Done."), 3);
    }

    #[test]
    fn decimals_and_inline_periods_do_not_split() {
        assert_eq!(count_sentences("A peak at 8.5 ppm appeared. Then it vanished."), 2);
        assert_eq!(count_sentences("Ratio 3.4:1 was used."), 1);
        assert_eq!(count_sentences("Wait... what happened."), 2);
        assert_eq!(count_sentences("Stray . punctuation"), 2);
        assert_eq!(count_sentences(". . ."), 0);
    }

    #[test]
    fn sentinel_detection() {
        assert!(detect_sentinel("I'm ready to move to the next stage."));
        assert!(!detect_sentinel("We should optimize more before proceeding."));
        assert!(detect_sentinel("i'm READY to move to the next stage"));
        assert!(detect_sentinel("Results look good.\n\nI\u{2019}m ready   to move\nto the next stage!"));
        assert!(!detect_sentinel("I'm ready to move to the next"));
        assert!(!detect_sentinel(""));
    }
}
