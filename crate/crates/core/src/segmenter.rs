//! Rule-based section segmentation of discharge notes.
//!
//! A header is a line whose trimmed content is one of the canonical section
//! names (case and spacing ignored), optionally followed by `:`. "Pertinent
//! Results:" is also recognized when results continue on the same line.
//! Any other line shaped like `Title Case Label:` starts an
//! [`SectionName::Unknown`] section so that unlisted sections ("Allergies:",
//! "Followup Instructions:") do not bleed into their neighbours.
//!
//! Spans are byte offsets into the source. The preamble, every header span
//! and every body span tile the source exactly.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::section::{same_label, SectionName};

static UNKNOWN_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Z][A-Za-z /]{2,40}:$").unwrap());

/// Half-open byte range `[start, end)`, serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct ByteSpan {
    pub start: usize,
    pub end: usize,
}

impl ByteSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        ByteSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn slice<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }
}

impl From<[usize; 2]> for ByteSpan {
    fn from([start, end]: [usize; 2]) -> Self {
        ByteSpan { start, end }
    }
}

impl From<ByteSpan> for [usize; 2] {
    fn from(span: ByteSpan) -> Self {
        [span.start, span.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: SectionName,
    pub header_span: ByteSpan,
    pub body_span: ByteSpan,
    pub body_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentedNote {
    pub source: String,
    pub preamble_span: ByteSpan,
    pub sections: Vec<Section>,
}

impl SegmentedNote {
    pub fn preamble(&self) -> &str {
        self.preamble_span.slice(&self.source)
    }

    pub fn sections_named<'a>(
        &'a self,
        name: &'a SectionName,
    ) -> impl Iterator<Item = &'a Section> + 'a {
        self.sections.iter().filter(move |s| &s.name == name)
    }

    pub fn first(&self, name: &SectionName) -> Option<&Section> {
        self.sections.iter().find(|s| &s.name == name)
    }

    /// Concatenates preamble, headers and bodies back into a string.
    pub fn reassemble(&self) -> String {
        let mut out = String::with_capacity(self.source.len());
        out.push_str(self.preamble());
        for s in &self.sections {
            out.push_str(s.header_span.slice(&self.source));
            out.push_str(&s.body_text);
        }
        out
    }

    /// JSON document emitted by the `segment` subcommand.
    pub fn to_json(&self) -> serde_json::Value {
        let sections: Vec<_> = self
            .sections
            .iter()
            .map(|s| {
                serde_json::json!({
                    "name": s.name.display_name(),
                    "header": s.header_span,
                    "body": s.body_span,
                })
            })
            .collect();
        serde_json::json!({ "preamble": self.preamble_span, "sections": sections })
    }
}

struct HeaderHit {
    name: SectionName,
    /// Offset within the line where the header ends and the body begins.
    header_len: usize,
}

fn classify_line(line: &str) -> Option<HeaderHit> {
    let content = line.trim();
    if content.is_empty() {
        return None;
    }
    let label = content.strip_suffix(':').unwrap_or(content);
    if let Some(name) = SectionName::canonical_from_label(label) {
        return Some(HeaderHit {
            name,
            header_len: line.len(),
        });
    }
    if let Some(colon) = line.find(':') {
        if same_label(&line[..colon], "Pertinent Results") {
            return Some(HeaderHit {
                name: SectionName::PertinentResults,
                header_len: colon + 1,
            });
        }
    }
    if UNKNOWN_HEADER.is_match(content) {
        return Some(HeaderHit {
            name: SectionName::Unknown(content.to_string()),
            header_len: line.len(),
        });
    }
    None
}

pub fn segment(note_text: &str) -> SegmentedNote {
    // (name, header start, header end)
    let mut headers: Vec<(SectionName, usize, usize)> = Vec::new();
    let mut offset = 0;
    for line in note_text.split_inclusive('\n') {
        if let Some(hit) = classify_line(line) {
            headers.push((hit.name, offset, offset + hit.header_len));
        }
        offset += line.len();
    }

    let preamble_end = headers.first().map_or(note_text.len(), |h| h.1);
    let sections = headers
        .iter()
        .enumerate()
        .map(|(i, (name, start, header_end))| {
            let body_end = headers.get(i + 1).map_or(note_text.len(), |next| next.1);
            let body_span = ByteSpan::new(*header_end, body_end);
            Section {
                name: name.clone(),
                header_span: ByteSpan::new(*start, *header_end),
                body_span,
                body_text: body_span.slice(note_text).to_string(),
            }
        })
        .collect();

    SegmentedNote {
        source: note_text.to_string(),
        preamble_span: ByteSpan::new(0, preamble_end),
        sections,
    }
}

/// Body of the first section named `name`, without leading blank lines or
/// trailing whitespace. Text after an inline header loses its leading spaces.
pub fn extract_section<'a>(note: &'a SegmentedNote, name: &SectionName) -> Option<&'a str> {
    note.first(name).map(|s| {
        let inline = !s.header_span.slice(&note.source).ends_with('\n');
        let body = if inline {
            s.body_text.trim_start_matches([' ', '\t'])
        } else {
            &s.body_text
        };
        trim_blank_lines(body)
    })
}

pub(crate) fn trim_blank_lines(text: &str) -> &str {
    let mut start = 0;
    for line in text.split_inclusive('\n') {
        if !line.trim().is_empty() {
            break;
        }
        start += line.len();
    }
    text[start..].trim_end()
}

/// Source text with every Brief Hospital Course and Discharge Instructions
/// body removed. Headers and all other bytes are kept.
pub fn redact_targets(note: &SegmentedNote) -> String {
    let mut out = String::with_capacity(note.source.len());
    let mut cursor = 0;
    for s in note.sections.iter().filter(|s| s.name.is_target()) {
        out.push_str(&note.source[cursor..s.body_span.start]);
        cursor = s.body_span.end;
    }
    out.push_str(&note.source[cursor..]);
    out
}
