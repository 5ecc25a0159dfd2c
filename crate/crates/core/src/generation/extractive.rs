use std::collections::HashMap;

use async_trait::async_trait;

use super::{Generated, GenerationError, GenerationRequest, Generator};
use crate::input_builder::{BlockSource, SelectionConfig, TargetSelection};
use crate::segmenter::{trim_blank_lines, SegmentedNote};

/// Splits after a period followed by whitespace (or at end of text) and at
/// every newline. Sentences are trimmed; empty ones are dropped.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let end = match c {
            '\n' => Some((i, i + 1)),
            '.' => match chars.peek() {
                None => Some((i + 1, i + 1)),
                Some((_, next)) if next.is_whitespace() => Some((i + 1, i + 1)),
                _ => None,
            },
            _ => None,
        };
        if let Some((stop, resume)) = end {
            let s = text[start..stop].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = resume;
        }
    }
    let s = text[start..].trim();
    if !s.is_empty() {
        out.push(s);
    }
    out
}

/// First `k` sentences of the note sections the selection uses verbatim,
/// taken in the order they appear in the note.
pub fn generate_extractive(note: &SegmentedNote, selection: &TargetSelection, k: usize) -> String {
    let wanted: Vec<_> = selection
        .verbatim_sections
        .iter()
        .filter_map(|s| match s {
            BlockSource::Section(name) => Some(name),
            _ => None,
        })
        .collect();
    let text = note
        .sections
        .iter()
        .filter(|s| wanted.contains(&&s.name))
        .map(|s| trim_blank_lines(&s.body_text))
        .collect::<Vec<_>>()
        .join("\n");
    split_sentences(&text)
        .into_iter()
        .take(k)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone)]
pub struct ExtractiveGenerator {
    notes: HashMap<String, SegmentedNote>,
    selection: SelectionConfig,
    k: usize,
}

impl ExtractiveGenerator {
    pub fn new(
        notes: HashMap<String, SegmentedNote>,
        selection: SelectionConfig,
        k: usize,
    ) -> Self {
        ExtractiveGenerator {
            notes,
            selection,
            k: k.max(1),
        }
    }
}

#[async_trait]
impl Generator for ExtractiveGenerator {
    fn backend_id(&self) -> &str {
        "extractive"
    }

    async fn generate(&self, req: &GenerationRequest) -> Result<Generated, GenerationError> {
        let note = self.notes.get(&req.hadm_id).ok_or_else(|| {
            GenerationError::Config(format!("no note loaded for hadm_id `{}`", req.hadm_id))
        })?;
        Ok(Generated::new(generate_extractive(
            note,
            self.selection.for_target(req.target),
            self.k,
        )))
    }
}
