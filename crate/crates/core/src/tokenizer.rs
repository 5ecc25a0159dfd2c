//! Token counting for budgets and length statistics.

use serde::{Deserialize, Serialize};

/// How text is measured against a token budget.
///
/// The generator's own tokenizer is not available, so budgets are expressed
/// in one of two reproducible approximations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    /// Unicode whitespace word splitting.
    #[default]
    Whitespace,
    /// `ceil(chars / 4)`, the usual sub-word estimate.
    CharQuarter,
}

impl Tokenizer {
    pub fn count(self, text: &str) -> usize {
        match self {
            Tokenizer::Whitespace => text.split_whitespace().count(),
            Tokenizer::CharQuarter => text.chars().count().div_ceil(4),
        }
    }

    /// Longest prefix of `text` that measures at most `max_tokens`.
    ///
    /// For the whitespace tokenizer the prefix ends at the end of the last
    /// kept word, so trailing whitespace is dropped.
    pub fn truncate(self, text: &str, max_tokens: usize) -> &str {
        match self {
            Tokenizer::Whitespace => {
                if max_tokens == 0 {
                    return "";
                }
                let mut seen = 0;
                let mut in_word = false;
                for (i, c) in text.char_indices() {
                    if c.is_whitespace() {
                        if in_word {
                            in_word = false;
                            if seen == max_tokens {
                                return &text[..i];
                            }
                        }
                    } else if !in_word {
                        in_word = true;
                        seen += 1;
                    }
                }
                text.trim_end()
            }
            Tokenizer::CharQuarter => match text.char_indices().nth(max_tokens * 4) {
                Some((i, _)) => &text[..i],
                None => text,
            },
        }
    }
}
