//! Clinical concept extraction: the retriever half of the pipeline.
//!
//! The built-in engine is a lexicon matcher. Text is split into word tokens,
//! and at each position the longest run of tokens whose normalized form is a
//! lexicon key becomes a [`ConceptSpan`]; scanning resumes after it. Matching
//! never starts or ends inside a word. [`remote`] speaks a small JSON
//! protocol so a trained NER model can be plugged in instead.

mod lexicon;
pub mod remote;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::section::SectionName;

pub use lexicon::{Lexicon, LexiconError, NORMALIZATION_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ConceptType {
    Problem,
    Treatment,
    Test,
}

impl ConceptType {
    pub fn as_str(self) -> &'static str {
        match self {
            ConceptType::Problem => "PROBLEM",
            ConceptType::Treatment => "TREATMENT",
            ConceptType::Test => "TEST",
        }
    }
}

impl fmt::Display for ConceptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConceptType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PROBLEM" => Ok(ConceptType::Problem),
            "TREATMENT" => Ok(ConceptType::Treatment),
            "TEST" => Ok(ConceptType::Test),
            other => Err(format!("unknown concept type `{other}`")),
        }
    }
}

/// One concept mention. `start..end` are byte offsets into the text the
/// concept was extracted from and `text` is exactly that slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptSpan {
    pub text: String,
    pub ctype: ConceptType,
    pub start: usize,
    pub end: usize,
    pub section: SectionName,
}

/// Byte ranges of word tokens: maximal alphanumeric runs, where a single
/// `-`, `/` or apostrophe between two letters stays inside the word
/// ("right-sided", "s/p", "patient's").
pub(crate) fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].1.is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = chars[i].0;
        let mut j = i + 1;
        loop {
            if j < chars.len() && chars[j].1.is_alphanumeric() {
                j += 1;
            } else if j + 1 < chars.len()
                && is_connector(chars[j].1)
                && chars[j - 1].1.is_alphabetic()
                && chars[j + 1].1.is_alphabetic()
            {
                j += 2;
            } else {
                break;
            }
        }
        let end = chars.get(j).map_or(text.len(), |c| c.0);
        spans.push((start, end));
        i = j;
    }
    spans
}

fn is_connector(c: char) -> bool {
    matches!(c, '-' | '/' | '\'' | '\u{2019}')
}

/// Lowercased word tokens joined by single spaces.
pub fn normalize_surface(text: &str) -> String {
    word_spans(text)
        .into_iter()
        .map(|(s, e)| text[s..e].to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn extract_concepts(text: &str, section: &SectionName, lexicon: &Lexicon) -> Vec<ConceptSpan> {
    let words = word_spans(text);
    let lowered: Vec<String> = words
        .iter()
        .map(|&(s, e)| text[s..e].to_lowercase())
        .collect();
    let mut spans = Vec::new();
    let mut key = String::new();
    let mut ends = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let longest = lexicon.max_key_tokens().min(words.len() - i);
        // keys for every shorter length are prefixes of the longest one
        key.clear();
        ends.clear();
        for w in &lowered[i..i + longest] {
            if !key.is_empty() {
                key.push(' ');
            }
            key.push_str(w);
            ends.push(key.len());
        }
        let hit = (1..=longest)
            .rev()
            .find_map(|len| lexicon.get(&key[..ends[len - 1]]).map(|ctype| (len, ctype)));
        match hit {
            Some((len, ctype)) => {
                let (start, end) = (words[i].0, words[i + len - 1].1);
                spans.push(ConceptSpan {
                    text: text[start..end].to_string(),
                    ctype,
                    start,
                    end,
                    section: section.clone(),
                });
                i += len;
            }
            None => i += 1,
        }
    }
    spans
}

/// Surface forms in first-occurrence order, dropping case-insensitive
/// repeats. Internal whitespace (including line breaks) collapses to one space.
pub fn dedup_concepts(spans: &[ConceptSpan]) -> Vec<String> {
    let mut seen = HashSet::new();
    spans
        .iter()
        .filter_map(|span| {
            let surface = span.text.split_whitespace().collect::<Vec<_>>().join(" ");
            seen.insert(surface.to_lowercase()).then_some(surface)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(entries: &[(&str, ConceptType)]) -> Lexicon {
        Lexicon::from_entries(entries.iter().map(|(k, t)| (k.to_string(), *t))).unwrap()
    }

    fn texts(spans: &[ConceptSpan]) -> Vec<&str> {
        spans.iter().map(|s| s.text.as_str()).collect()
    }

    #[test]
    fn word_tokens() {
        let text = "right-sided infarct(patient) 2/p s/p GI-bleed, x - y";
        let words: Vec<_> = word_spans(text)
            .into_iter()
            .map(|(s, e)| &text[s..e])
            .collect();
        assert_eq!(
            words,
            [
                "right-sided",
                "infarct",
                "patient",
                "2",
                "p",
                "s/p",
                "GI-bleed",
                "x",
                "y"
            ]
        );
    }

    #[test]
    fn single_problem() {
        let lexicon = lex(&[("hypertension", ConceptType::Problem)]);
        let section = SectionName::PastMedicalHistory;
        let spans = extract_concepts(
            "Hypertension as per prior medical records",
            &section,
            &lexicon,
        );
        assert_eq!(
            spans,
            [ConceptSpan {
                text: "Hypertension".into(),
                ctype: ConceptType::Problem,
                start: 0,
                end: 12,
                section,
            }]
        );
    }

    #[test]
    fn longest_match_wins() {
        let lexicon = lex(&[
            ("right colectomy", ConceptType::Treatment),
            ("adjuvant chemotherapy", ConceptType::Treatment),
            ("colectomy", ConceptType::Treatment),
        ]);
        let spans = extract_concepts(
            "right colectomy with adjuvant chemotherapy",
            &SectionName::PastMedicalHistory,
            &lexicon,
        );
        assert_eq!(texts(&spans), ["right colectomy", "adjuvant chemotherapy"]);
        assert!(spans.iter().all(|s| s.ctype == ConceptType::Treatment));
    }

    #[test]
    fn empty_text() {
        let lexicon = lex(&[("fever", ConceptType::Problem)]);
        assert!(extract_concepts("", &SectionName::ChiefComplaint, &lexicon).is_empty());
    }

    #[test]
    fn no_mid_word_hits() {
        let lexicon = lex(&[("art", ConceptType::Problem)]);
        assert!(extract_concepts(
            "heart start art-work",
            &SectionName::ChiefComplaint,
            &lexicon
        )
        .is_empty());
        assert_eq!(
            texts(&extract_concepts(
                "modern art.",
                &SectionName::ChiefComplaint,
                &lexicon
            )),
            ["art"]
        );
    }

    #[test]
    fn matches_across_line_breaks_and_case() {
        let lexicon = lex(&[("gi bleeding", ConceptType::Problem)]);
        let spans = extract_concepts(
            "setting of GI\n  BLEEDING)",
            &SectionName::ChiefComplaint,
            &lexicon,
        );
        assert_eq!(texts(&spans), ["GI\n  BLEEDING"]);
        assert_eq!(dedup_concepts(&spans), ["GI BLEEDING"]);
    }

    #[test]
    fn dedup_keeps_first_casing() {
        let mk = |t: &str| ConceptSpan {
            text: t.into(),
            ctype: ConceptType::Problem,
            start: 0,
            end: t.len(),
            section: SectionName::ChiefComplaint,
        };
        let spans = [mk("Hypertension"), mk("GI bleeding"), mk("hypertension")];
        assert_eq!(dedup_concepts(&spans), ["Hypertension", "GI bleeding"]);
        assert!(dedup_concepts(&[]).is_empty());
    }
}
