//! Canonical discharge-note section names and the two generation targets.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A recognized note section, or an unlisted header kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SectionName {
    ChiefComplaint,
    MajorSurgicalOrInvasiveProcedure,
    HistoryOfPresentIllness,
    PastMedicalHistory,
    SocialHistory,
    FamilyHistory,
    PhysicalExam,
    PertinentResults,
    BriefHospitalCourse,
    MedicationsOnAdmission,
    DischargeMedications,
    DischargeDisposition,
    DischargeDiagnosis,
    DischargeCondition,
    DischargeInstructions,
    Unknown(String),
}

impl SectionName {
    /// The fifteen canonical sections in the order they usually appear.
    pub const CANONICAL: [SectionName; 15] = [
        SectionName::ChiefComplaint,
        SectionName::MajorSurgicalOrInvasiveProcedure,
        SectionName::HistoryOfPresentIllness,
        SectionName::PastMedicalHistory,
        SectionName::SocialHistory,
        SectionName::FamilyHistory,
        SectionName::PhysicalExam,
        SectionName::PertinentResults,
        SectionName::BriefHospitalCourse,
        SectionName::MedicationsOnAdmission,
        SectionName::DischargeMedications,
        SectionName::DischargeDisposition,
        SectionName::DischargeDiagnosis,
        SectionName::DischargeCondition,
        SectionName::DischargeInstructions,
    ];

    pub fn display_name(&self) -> &str {
        match self {
            SectionName::ChiefComplaint => "Chief Complaint",
            SectionName::MajorSurgicalOrInvasiveProcedure => "Major Surgical or Invasive Procedure",
            SectionName::HistoryOfPresentIllness => "History of Present Illness",
            SectionName::PastMedicalHistory => "Past Medical History",
            SectionName::SocialHistory => "Social History",
            SectionName::FamilyHistory => "Family History",
            SectionName::PhysicalExam => "Physical Exam",
            SectionName::PertinentResults => "Pertinent Results",
            SectionName::BriefHospitalCourse => "Brief Hospital Course",
            SectionName::MedicationsOnAdmission => "Medications on Admission",
            SectionName::DischargeMedications => "Discharge Medications",
            SectionName::DischargeDisposition => "Discharge Disposition",
            SectionName::DischargeDiagnosis => "Discharge Diagnosis",
            SectionName::DischargeCondition => "Discharge Condition",
            SectionName::DischargeInstructions => "Discharge Instructions",
            SectionName::Unknown(raw) => raw,
        }
    }

    /// Matches a header label against the canonical names, ignoring case and
    /// runs of whitespace. Returns `None` for anything unlisted.
    pub fn canonical_from_label(label: &str) -> Option<SectionName> {
        Self::CANONICAL
            .iter()
            .find(|name| same_label(label, name.display_name()))
            .cloned()
    }

    /// Parses a display name; unlisted names become [`SectionName::Unknown`].
    pub fn parse(label: &str) -> SectionName {
        Self::canonical_from_label(label).unwrap_or_else(|| SectionName::Unknown(label.to_string()))
    }

    pub fn is_canonical(&self) -> bool {
        !matches!(self, SectionName::Unknown(_))
    }

    pub fn is_target(&self) -> bool {
        matches!(
            self,
            SectionName::BriefHospitalCourse | SectionName::DischargeInstructions
        )
    }
}

/// Word-by-word comparison ignoring case and whitespace runs.
pub(crate) fn same_label(a: &str, b: &str) -> bool {
    let same_word = |x: &str, y: &str| {
        x.chars()
            .flat_map(char::to_lowercase)
            .eq(y.chars().flat_map(char::to_lowercase))
    };
    let mut wa = a.split_whitespace();
    let mut wb = b.split_whitespace();
    loop {
        match (wa.next(), wb.next()) {
            (None, None) => return true,
            (Some(x), Some(y)) if same_word(x, y) => {}
            _ => return false,
        }
    }
}

impl fmt::Display for SectionName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl Serialize for SectionName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.display_name())
    }
}

impl<'de> Deserialize<'de> for SectionName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Ok(SectionName::parse(&raw))
    }
}

/// The two sections the system generates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSection {
    BriefHospitalCourse,
    DischargeInstructions,
}

impl TargetSection {
    pub const ALL: [TargetSection; 2] = [
        TargetSection::BriefHospitalCourse,
        TargetSection::DischargeInstructions,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            TargetSection::BriefHospitalCourse => "Brief Hospital Course",
            TargetSection::DischargeInstructions => "Discharge Instructions",
        }
    }

    /// Identifier used in file formats (`brief_hospital_course`, ...).
    pub fn key(self) -> &'static str {
        match self {
            TargetSection::BriefHospitalCourse => "brief_hospital_course",
            TargetSection::DischargeInstructions => "discharge_instructions",
        }
    }

    pub fn from_key(key: &str) -> Option<TargetSection> {
        Self::ALL.into_iter().find(|t| t.key() == key)
    }

    pub fn section_name(self) -> SectionName {
        match self {
            TargetSection::BriefHospitalCourse => SectionName::BriefHospitalCourse,
            TargetSection::DischargeInstructions => SectionName::DischargeInstructions,
        }
    }
}

impl fmt::Display for TargetSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}
