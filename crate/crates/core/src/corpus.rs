//! Visit corpus: JSON-lines loading, validation and length statistics.
//!
//! One line per hospital admission, with the keys `hadm_id`, `note_text`,
//! `radiology_reports`, `ed_diagnoses` and `chief_complaint_ed`. The split is
//! not part of the record; it is assigned by whoever loads the file.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::section::TargetSection;
use crate::segmenter::{extract_section, segment};
use crate::tokenizer::Tokenizer;

/// Token budget used when none is configured.
pub const DEFAULT_BUDGET: usize = 2048;

const REQUIRED_FIELDS: [&str; 4] = ["hadm_id", "note_text", "radiology_reports", "ed_diagnoses"];

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    #[default]
    Train,
    Valid,
    TestPhase1,
    TestPhase2,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::TestPhase1 => "test_phase1",
            Split::TestPhase2 => "test_phase2",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test_phase1" | "test_phase_1" | "phase1" => Ok(Split::TestPhase1),
            "test_phase2" | "test_phase_2" | "phase2" | "test" => Ok(Split::TestPhase2),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// ICD revision of a diagnosis code. Codes themselves are opaque.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IcdVersion {
    Icd9,
    Icd10,
}

impl Serialize for IcdVersion {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(match self {
            IcdVersion::Icd9 => 9,
            IcdVersion::Icd10 => 10,
        })
    }
}

impl<'de> Deserialize<'de> for IcdVersion {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Num(9) => Some(IcdVersion::Icd9),
            Raw::Num(10) => Some(IcdVersion::Icd10),
            Raw::Num(_) => None,
            Raw::Text(s) => match s.to_ascii_lowercase().replace(['-', ' '], "").as_str() {
                "9" | "icd9" => Some(IcdVersion::Icd9),
                "10" | "icd10" => Some(IcdVersion::Icd10),
                _ => None,
            },
        };
        parsed.ok_or_else(|| serde::de::Error::custom("icd_version must be 9 or 10"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnosis {
    pub icd_code: String,
    pub icd_version: IcdVersion,
    pub long_title: String,
}

/// One hospital admission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Visit {
    pub hadm_id: String,
    pub note_text: String,
    pub radiology_reports: Vec<String>,
    pub ed_diagnoses: Vec<Diagnosis>,
    pub chief_complaint_ed: Option<String>,
    pub split: Split,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VisitRecord {
    hadm_id: String,
    note_text: String,
    radiology_reports: Vec<String>,
    ed_diagnoses: Vec<Diagnosis>,
    #[serde(default)]
    chief_complaint_ed: Option<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: invalid field `{field}`: {reason}")]
    InvalidField {
        line: usize,
        field: &'static str,
        reason: String,
    },
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate hadm_id `{hadm_id}` on lines {first_line} and {second_line}")]
    DuplicateId {
        hadm_id: String,
        first_line: usize,
        second_line: usize,
    },
}

pub fn load_corpus(path: impl AsRef<Path>, split: Split) -> Result<Vec<Visit>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&text, split)
}

/// Parses corpus text. Blank lines are ignored; line numbers are 1-based.
pub fn parse_corpus(text: &str, split: Split) -> Result<Vec<Visit>, CorpusError> {
    let mut visits = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let visit = parse_record(raw, line, split)?;
        if let Some(&first_line) = seen.get(&visit.hadm_id) {
            return Err(CorpusError::DuplicateId {
                hadm_id: visit.hadm_id,
                first_line,
                second_line: line,
            });
        }
        seen.insert(visit.hadm_id.clone(), line);
        visits.push(visit);
    }
    Ok(visits)
}

fn parse_record(raw: &str, line: usize, split: Split) -> Result<Visit, CorpusError> {
    let value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
            line,
            reason: e.to_string(),
        })?;
    let object = value.as_object().ok_or_else(|| CorpusError::Malformed {
        line,
        reason: "record is not a JSON object".into(),
    })?;
    if let Some(field) = REQUIRED_FIELDS
        .into_iter()
        .find(|f| !object.contains_key(*f))
    {
        return Err(CorpusError::MissingField { line, field });
    }
    let record: VisitRecord =
        serde_json::from_value(value).map_err(|e| CorpusError::Malformed {
            line,
            reason: e.to_string(),
        })?;

    let invalid = |field, reason: &str| CorpusError::InvalidField {
        line,
        field,
        reason: reason.to_string(),
    };
    if record.hadm_id.trim().is_empty() {
        return Err(invalid("hadm_id", "must not be empty"));
    }
    if record.note_text.trim().is_empty() {
        return Err(invalid("note_text", "must not be empty"));
    }
    if record.radiology_reports.is_empty() {
        return Err(invalid(
            "radiology_reports",
            "at least one report is required",
        ));
    }
    if record
        .ed_diagnoses
        .iter()
        .any(|d| d.icd_code.trim().is_empty())
    {
        return Err(invalid("ed_diagnoses", "icd_code must not be empty"));
    }

    Ok(Visit {
        hadm_id: record.hadm_id,
        note_text: record.note_text,
        radiology_reports: record.radiology_reports,
        ed_diagnoses: record.ed_diagnoses,
        chief_complaint_ed: record.chief_complaint_ed,
        split,
    })
}

/// Writes visits in the same JSON-lines schema `load_corpus` reads.
pub fn write_corpus<W: Write>(mut out: W, visits: &[Visit]) -> std::io::Result<()> {
    for v in visits {
        let record = VisitRecord {
            hadm_id: v.hadm_id.clone(),
            note_text: v.note_text.clone(),
            radiology_reports: v.radiology_reports.clone(),
            ed_diagnoses: v.ed_diagnoses.clone(),
            chief_complaint_ed: v.chief_complaint_ed.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean_token_length: f64,
    pub fraction_over_budget: f64,
    pub sample_count: usize,
}

impl LengthStats {
    pub fn from_counts(counts: &[usize], budget: usize) -> Self {
        if counts.is_empty() {
            return LengthStats::default();
        }
        let n = counts.len();
        let total: usize = counts.iter().sum();
        let over = counts.iter().filter(|&&c| c > budget).count();
        LengthStats {
            mean_token_length: total as f64 / n as f64,
            fraction_over_budget: over as f64 / n as f64,
            sample_count: n,
        }
    }
}

/// Note lengths (whole corpus and per split) and gold target lengths per split.
///
/// Target statistics only count visits in which the target section is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub tokenizer: Tokenizer,
    pub budget: usize,
    pub overall: LengthStats,
    pub per_split: BTreeMap<Split, LengthStats>,
    pub per_target: BTreeMap<Split, BTreeMap<TargetSection, LengthStats>>,
}

impl CorpusStats {
    pub fn mean_token_length(&self) -> f64 {
        self.overall.mean_token_length
    }

    pub fn fraction_over_budget(&self) -> f64 {
        self.overall.fraction_over_budget
    }

    pub fn sample_count(&self) -> usize {
        self.overall.sample_count
    }
}

pub fn compute_stats(visits: &[Visit], tokenizer: Tokenizer, budget: usize) -> CorpusStats {
    let mut note_counts: BTreeMap<Split, Vec<usize>> = BTreeMap::new();
    let mut target_counts: BTreeMap<Split, BTreeMap<TargetSection, Vec<usize>>> = BTreeMap::new();
    let mut all = Vec::with_capacity(visits.len());

    for v in visits {
        let n = tokenizer.count(&v.note_text);
        all.push(n);
        note_counts.entry(v.split).or_default().push(n);
        let note = segment(&v.note_text);
        for target in TargetSection::ALL {
            if let Some(body) = extract_section(&note, &target.section_name()) {
                target_counts
                    .entry(v.split)
                    .or_default()
                    .entry(target)
                    .or_default()
                    .push(tokenizer.count(body));
            }
        }
    }

    CorpusStats {
        tokenizer,
        budget,
        overall: LengthStats::from_counts(&all, budget),
        per_split: note_counts
            .into_iter()
            .map(|(split, counts)| (split, LengthStats::from_counts(&counts, budget)))
            .collect(),
        per_target: target_counts
            .into_iter()
            .map(|(split, by_target)| {
                let stats = by_target
                    .into_iter()
                    .map(|(t, counts)| (t, LengthStats::from_counts(&counts, budget)))
                    .collect();
                (split, stats)
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, note: &str) -> String {
        serde_json::json!({
            "hadm_id": id,
            "note_text": note,
            "radiology_reports": ["CXR: clear"],
            "ed_diagnoses": [{"icd_code": "R51", "icd_version": 10, "long_title": "Headache"}],
            "chief_complaint_ed": null,
        })
        .to_string()
    }

    fn visit(id: &str, note: &str) -> Visit {
        parse_corpus(&record(id, note), Split::Train)
            .unwrap()
            .remove(0)
    }

    #[test]
    fn loads_records_in_order() {
        let text = [record("H1", "a"), record("H2", "b"), record("H3", "c")].join("\n");
        let visits = parse_corpus(&text, Split::Valid).unwrap();
        let ids: Vec<_> = visits.iter().map(|v| v.hadm_id.as_str()).collect();
        assert_eq!(ids, ["H1", "H2", "H3"]);
        assert!(visits.iter().all(|v| v.split == Split::Valid));
        assert_eq!(visits[0].ed_diagnoses[0].icd_version, IcdVersion::Icd10);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        assert!(parse_corpus("", Split::Train).unwrap().is_empty());
        assert!(parse_corpus("\n\n", Split::Train).unwrap().is_empty());
    }

    #[test]
    fn missing_note_text_names_field_and_line() {
        let bad = r#"{"hadm_id":"H2","radiology_reports":["x"],"ed_diagnoses":[],"chief_complaint_ed":null}"#;
        let text = format!("{}\n{}", record("H1", "a"), bad);
        match parse_corpus(&text, Split::Train) {
            Err(CorpusError::MissingField { line, field }) => {
                assert_eq!((line, field), (2, "note_text"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_cites_both_lines() {
        let text = [
            record("H001", "a"),
            record("H002", "b"),
            record("H003", "c"),
            record("H001", "d"),
        ]
        .join("\n");
        let err = parse_corpus(&text, Split::Train).unwrap_err();
        match &err {
            CorpusError::DuplicateId {
                hadm_id,
                first_line,
                second_line,
            } => assert_eq!(
                (hadm_id.as_str(), *first_line, *second_line),
                ("H001", 1, 4)
            ),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("lines 1 and 4"));
    }

    #[test]
    fn rejects_invariant_violations() {
        let no_reports =
            r#"{"hadm_id":"H","note_text":"x","radiology_reports":[],"ed_diagnoses":[]}"#;
        assert!(matches!(
            parse_corpus(no_reports, Split::Train),
            Err(CorpusError::InvalidField {
                field: "radiology_reports",
                ..
            })
        ));
        let blank_note =
            r#"{"hadm_id":"H","note_text":"  ","radiology_reports":["r"],"ed_diagnoses":[]}"#;
        assert!(matches!(
            parse_corpus(blank_note, Split::Train),
            Err(CorpusError::InvalidField {
                field: "note_text",
                ..
            })
        ));
        let extra = r#"{"hadm_id":"H","note_text":"x","radiology_reports":["r"],"ed_diagnoses":[],"bogus":1}"#;
        assert!(matches!(
            parse_corpus(extra, Split::Train),
            Err(CorpusError::Malformed { .. })
        ));
    }

    #[test]
    fn icd_version_accepts_strings() {
        let d: Diagnosis =
            serde_json::from_str(r#"{"icd_code":"4019","icd_version":"9","long_title":"HTN"}"#)
                .unwrap();
        assert_eq!(d.icd_version, IcdVersion::Icd9);
        assert!(serde_json::from_str::<Diagnosis>(
            r#"{"icd_code":"x","icd_version":11,"long_title":"t"}"#
        )
        .is_err());
    }

    #[test]
    fn stats_hand_counted() {
        let ten = ["w"; 10].join(" ");
        let thirty = vec!["w"; 30].join(" ");
        let visits = vec![visit("A", &ten), visit("B", &thirty)];
        let stats = compute_stats(&visits, Tokenizer::Whitespace, 20);
        assert_eq!(stats.mean_token_length(), 20.0);
        assert_eq!(stats.fraction_over_budget(), 0.5);
        assert_eq!(stats.sample_count(), 2);
        assert_eq!(stats.per_split[&Split::Train].sample_count, 2);

        let under = compute_stats(&visits, Tokenizer::Whitespace, 100);
        assert_eq!(under.fraction_over_budget(), 0.0);
    }

    #[test]
    fn stats_empty() {
        let stats = compute_stats(&[], Tokenizer::Whitespace, 2048);
        assert_eq!(stats.mean_token_length(), 0.0);
        assert_eq!(stats.fraction_over_budget(), 0.0);
        assert_eq!(stats.sample_count(), 0);
        assert!(stats.per_split.is_empty());
    }

    #[test]
    fn split_parsing() {
        assert_eq!("test_phase2".parse::<Split>().unwrap(), Split::TestPhase2);
        assert!("bogus".parse::<Split>().is_err());
    }
}
