use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::MetricReport;
use crate::section::TargetSection;
use crate::segmenter::{extract_section, segment};

/// Reference texts for one visit. A missing target is not scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub hadm_id: String,
    pub brief_hospital_course: Option<String>,
    pub discharge_instructions: Option<String>,
}

impl GoldRecord {
    pub fn get(&self, target: TargetSection) -> Option<&str> {
        match target {
            TargetSection::BriefHospitalCourse => self.brief_hospital_course.as_deref(),
            TargetSection::DischargeInstructions => self.discharge_instructions.as_deref(),
        }
    }

    /// Gold sections taken from a full discharge note.
    pub fn from_note(hadm_id: &str, note_text: &str) -> Self {
        let note = segment(note_text);
        let get = |t: TargetSection| extract_section(&note, &t.section_name()).map(str::to_string);
        GoldRecord {
            hadm_id: hadm_id.to_string(),
            brief_hospital_course: get(TargetSection::BriefHospitalCourse),
            discharge_instructions: get(TargetSection::DischargeInstructions),
        }
    }
}

#[derive(Debug, Error)]
pub enum GoldError {
    #[error("gold line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("gold line {second}: hadm_id `{hadm_id}` already seen on line {first}")]
    Duplicate {
        hadm_id: String,
        first: usize,
        second: usize,
    },
}

#[derive(Deserialize)]
struct GoldLine {
    hadm_id: String,
    #[serde(default)]
    brief_hospital_course: Option<String>,
    #[serde(default)]
    discharge_instructions: Option<String>,
    #[serde(default)]
    note_text: Option<String>,
}

/// Parses gold JSON lines. Each line either carries the target texts
/// directly or is a corpus record whose `note_text` holds them.
pub fn read_gold(text: &str) -> Result<Vec<GoldRecord>, GoldError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let g: GoldLine = serde_json::from_str(raw).map_err(|e| GoldError::Line {
            line,
            reason: e.to_string(),
        })?;
        if let Some(first) = seen.insert(g.hadm_id.clone(), line) {
            return Err(GoldError::Duplicate {
                hadm_id: g.hadm_id,
                first,
                second: line,
            });
        }
        let record = match (
            &g.note_text,
            &g.brief_hospital_course,
            &g.discharge_instructions,
        ) {
            (Some(note), None, None) => GoldRecord::from_note(&g.hadm_id, note),
            _ => GoldRecord {
                hadm_id: g.hadm_id,
                brief_hospital_course: g.brief_hospital_course,
                discharge_instructions: g.discharge_instructions,
            },
        };
        out.push(record);
    }
    Ok(out)
}

/// Writes `hadm_id,target,metric,value`, one row per report and metric.
pub fn write_scores<W: Write>(out: W, reports: &[MetricReport]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    w.write_record(["hadm_id", "target", "metric", "value"])?;
    for r in reports {
        for (m, v) in &r.scores {
            w.write_record([
                r.hadm_id.as_str(),
                r.target.key(),
                m.as_str(),
                &v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
