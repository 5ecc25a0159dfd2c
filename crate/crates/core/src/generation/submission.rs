use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::section::TargetSection;

/// One row of `hadm_id,brief_hospital_course,discharge_instructions`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionRow {
    pub hadm_id: String,
    pub brief_hospital_course: String,
    pub discharge_instructions: String,
}

impl SubmissionRow {
    pub fn get(&self, target: TargetSection) -> &str {
        match target {
            TargetSection::BriefHospitalCourse => &self.brief_hospital_course,
            TargetSection::DischargeInstructions => &self.discharge_instructions,
        }
    }

    pub fn set(&mut self, target: TargetSection, text: String) {
        match target {
            TargetSection::BriefHospitalCourse => self.brief_hospital_course = text,
            TargetSection::DischargeInstructions => self.discharge_instructions = text,
        }
    }
}

#[derive(Debug, Error)]
pub enum SubmissionError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("duplicate hadm_id `{0}` in submission")]
    Duplicate(String),
}

pub fn write_submission<W: Write>(out: W, rows: &[SubmissionRow]) -> Result<(), SubmissionError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["hadm_id", "brief_hospital_course", "discharge_instructions"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_submission<R: Read>(input: R) -> Result<Vec<SubmissionRow>, SubmissionError> {
    let mut rows: Vec<SubmissionRow> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in csv::Reader::from_reader(input).deserialize() {
        let row: SubmissionRow = row?;
        if !seen.insert(row.hadm_id.clone()) {
            return Err(SubmissionError::Duplicate(row.hadm_id));
        }
        rows.push(row);
    }
    Ok(rows)
}
