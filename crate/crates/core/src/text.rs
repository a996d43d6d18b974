//! Small text utilities shared across the pipeline: tokenization for fuzzy
//! span comparison, whitespace normalization for grounding checks, and word
//! counting for window and prompt budgets.

/// Splits `s` into comparison tokens: case-folded, punctuation stripped,
/// whitespace separated. A token that is punctuation-only disappears.
///
/// This is the tokenizer behind [`crate::ensemble::span_overlap`]; anything
/// that compares spans for similarity must go through it so that
/// "Registration accepted." and "registration accepted" compare equal.
#[must_use]
pub fn tokenize(s: &str) -> Vec<String> {
    s.split_whitespace()
        .filter_map(|raw| {
            let token: String = raw
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect();
            if token.is_empty() {
                None
            } else {
                Some(token)
            }
        })
        .collect()
}

/// Collapses every run of whitespace (including newlines) to a single space
/// and trims the ends. Used before substring checks so that a span extracted
/// from a line-wrapped sentence still counts as verbatim.
#[must_use]
pub fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Number of whitespace-separated words in `s`.
#[must_use]
pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// First `max_words` words of `s`, re-joined with single spaces.
/// Returns `s` normalized if it is already within the budget.
#[must_use]
pub fn truncate_words(s: &str, max_words: usize) -> String {
    s.split_whitespace()
        .take(max_words)
        .collect::<Vec<_>>()
        .join(" ")
}

/// First `max_chars` characters of `s` (character, not byte, boundaries).
#[must_use]
pub fn truncate_chars(s: &str, max_chars: usize) -> String {
    s.chars().take(max_chars).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_case_folds_and_strips_punctuation() {
        assert_eq!(
            tokenize("The UE shall start the Registration procedure."),
            vec![
                "the",
                "ue",
                "shall",
                "start",
                "the",
                "registration",
                "procedure"
            ]
        );
    }

    #[test]
    fn tokenize_drops_punctuation_only_tokens() {
        assert_eq!(tokenize("a -- b !!"), vec!["a", "b"]);
        assert!(tokenize("...").is_empty());
    }

    #[test]
    fn tokenize_keeps_digits_and_joins_hyphenated_parts() {
        assert_eq!(tokenize("5GMM-REGISTERED"), vec!["5gmmregistered"]);
        assert_eq!(tokenize("timer T3510"), vec!["timer", "t3510"]);
    }

    #[test]
    fn normalize_ws_collapses_runs_and_newlines() {
        assert_eq!(normalize_ws("a  b\n\tc "), "a b c");
        assert_eq!(normalize_ws(""), "");
    }

    #[test]
    fn word_count_counts_whitespace_tokens() {
        assert_eq!(word_count("one two  three\nfour"), 4);
        assert_eq!(word_count("   "), 0);
    }

    #[test]
    fn truncate_words_keeps_prefix() {
        assert_eq!(truncate_words("a b c d", 2), "a b");
        assert_eq!(truncate_words("a b", 10), "a b");
    }

    #[test]
    fn truncate_chars_respects_char_boundaries() {
        assert_eq!(truncate_chars("héllo", 2), "hé");
    }
}
