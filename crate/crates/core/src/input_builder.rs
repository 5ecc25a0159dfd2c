//! Reconstructs the generator input for one target section.
//!
//! Each target has two ordered source lists: sources reduced to a
//! comma-joined concept list, and sources copied verbatim. Every source becomes
//! one `Label: content` block, and the blocks follow the instruction line, one
//! per line. When the result exceeds the token budget, whole blocks are
//! dropped from the end of the list, and the block that crosses the budget
//! is cut tail-first instead.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::concepts::{dedup_concepts, extract_concepts, ConceptSpan, Lexicon};
use crate::corpus::Visit;
use crate::section::{SectionName, TargetSection};
use crate::segmenter::{extract_section, SegmentedNote};
use crate::tokenizer::Tokenizer;

pub const RADIOLOGY_LABEL: &str = "Radiology report";
pub const DIAGNOSIS_LABEL: &str = "Diagnosis description";

/// Where a block's text comes from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockSource {
    Section(SectionName),
    /// All radiology reports of the visit, merged into one block.
    Radiology,
    /// Unique ED diagnosis long titles.
    DiagnosisDescriptions,
}

impl BlockSource {
    pub fn label(&self) -> &str {
        match self {
            BlockSource::Section(name) => name.display_name().trim_end_matches(':').trim_end(),
            BlockSource::Radiology => RADIOLOGY_LABEL,
            BlockSource::DiagnosisDescriptions => DIAGNOSIS_LABEL,
        }
    }

    pub fn parse(label: &str) -> BlockSource {
        let norm = label
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        match norm.as_str() {
            "radiology report" | "radiology reports" | "radiology" => BlockSource::Radiology,
            "diagnosis description" | "diagnosis descriptions" => {
                BlockSource::DiagnosisDescriptions
            }
            _ => BlockSource::Section(SectionName::parse(label.trim())),
        }
    }
}

impl fmt::Display for BlockSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for BlockSource {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for BlockSource {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(BlockSource::parse(&String::deserialize(deserializer)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSelection {
    /// Sources reduced to concept lists.
    pub concept_sections: Vec<BlockSource>,
    /// Sources used as-is.
    pub verbatim_sections: Vec<BlockSource>,
}

impl TargetSelection {
    pub fn include_radiology(&self) -> bool {
        self.sources().any(|(s, _)| *s == BlockSource::Radiology)
    }

    pub fn include_diagnosis_descriptions(&self) -> bool {
        self.sources()
            .any(|(s, _)| *s == BlockSource::DiagnosisDescriptions)
    }

    /// Sources in block order: concept sources first, then verbatim ones.
    pub fn sources(&self) -> impl Iterator<Item = (&BlockSource, BlockMode)> {
        self.concept_sections
            .iter()
            .map(|s| (s, BlockMode::ConceptList))
            .chain(
                self.verbatim_sections
                    .iter()
                    .map(|s| (s, BlockMode::Verbatim)),
            )
    }

    /// Same sources and order with every concept source used verbatim.
    pub fn all_verbatim(&self) -> TargetSelection {
        TargetSelection {
            concept_sections: Vec::new(),
            verbatim_sections: self.sources().map(|(s, _)| s.clone()).collect(),
        }
    }

    pub fn problems(&self, target: TargetSection) -> Vec<SelectionProblem> {
        let mut problems = Vec::new();
        let concept: HashSet<_> = self.concept_sections.iter().collect();
        for source in &self.verbatim_sections {
            if concept.contains(source) {
                problems.push(SelectionProblem::Overlap(source.clone()));
            }
        }
        let own = BlockSource::Section(target.section_name());
        if self.sources().any(|(s, _)| *s == own) {
            problems.push(SelectionProblem::ContainsTarget(own));
        }
        let mut seen = HashSet::new();
        for (source, _) in self.sources() {
            if !seen.insert(source) && !concept.contains(source) {
                problems.push(SelectionProblem::Duplicate(source.clone()));
            }
        }
        problems
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectionProblem {
    Overlap(BlockSource),
    ContainsTarget(BlockSource),
    Duplicate(BlockSource),
}

impl fmt::Display for SelectionProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionProblem::Overlap(s) => {
                write!(f, "`{s}` is listed as both concept and verbatim source")
            }
            SelectionProblem::ContainsTarget(s) => write!(f, "`{s}` is the target section itself"),
            SelectionProblem::Duplicate(s) => write!(f, "`{s}` is listed twice"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub brief_hospital_course: TargetSelection,
    pub discharge_instructions: TargetSelection,
}

impl SelectionConfig {
    pub fn for_target(&self, target: TargetSection) -> &TargetSelection {
        match target {
            TargetSection::BriefHospitalCourse => &self.brief_hospital_course,
            TargetSection::DischargeInstructions => &self.discharge_instructions,
        }
    }

    pub fn for_target_mut(&mut self, target: TargetSection) -> &mut TargetSelection {
        match target {
            TargetSection::BriefHospitalCourse => &mut self.brief_hospital_course,
            TargetSection::DischargeInstructions => &mut self.discharge_instructions,
        }
    }

    pub fn all_verbatim(&self) -> SelectionConfig {
        SelectionConfig {
            brief_hospital_course: self.brief_hospital_course.all_verbatim(),
            discharge_instructions: self.discharge_instructions.all_verbatim(),
        }
    }

    pub fn problems(&self) -> Vec<(TargetSection, SelectionProblem)> {
        TargetSection::ALL
            .into_iter()
            .flat_map(|t| {
                self.for_target(t)
                    .problems(t)
                    .into_iter()
                    .map(move |p| (t, p))
            })
            .collect()
    }
}

impl Default for SelectionConfig {
    fn default() -> Self {
        default_selection()
    }
}

/// Default section routing for both targets.
pub fn default_selection() -> SelectionConfig {
    use SectionName::*;
    let verbatim = vec![
        BlockSource::Section(ChiefComplaint),
        BlockSource::Section(MajorSurgicalOrInvasiveProcedure),
        BlockSource::Section(HistoryOfPresentIllness),
        BlockSource::DiagnosisDescriptions,
        BlockSource::Section(DischargeDisposition),
        BlockSource::Section(DischargeDiagnosis),
        BlockSource::Section(DischargeCondition),
    ];
    SelectionConfig {
        brief_hospital_course: TargetSelection {
            concept_sections: vec![
                BlockSource::Section(PhysicalExam),
                BlockSource::Section(PertinentResults),
                BlockSource::Radiology,
            ],
            verbatim_sections: verbatim.clone(),
        },
        discharge_instructions: TargetSelection {
            concept_sections: vec![
                BlockSource::Section(PertinentResults),
                BlockSource::Section(DischargeMedications),
            ],
            verbatim_sections: verbatim,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockMode {
    Verbatim,
    ConceptList,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputBlock {
    pub label: String,
    pub mode: BlockMode,
    pub content: String,
    /// Tokens of the rendered `label: content` line.
    pub token_count: usize,
    /// Higher survives truncation longer.
    pub priority: usize,
}

impl InputBlock {
    pub fn render(&self) -> String {
        render_block(&self.label, &self.content)
    }
}

fn render_block(label: &str, content: &str) -> String {
    format!("{label}: {content}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconstructedInput {
    pub target: TargetSection,
    pub instruction: String,
    pub blocks: Vec<InputBlock>,
    pub total_tokens: usize,
    pub truncated: bool,
}

impl ReconstructedInput {
    /// Text substituted for `{input}` in the prompt template.
    pub fn serialize(&self) -> String {
        let mut out = self.instruction.clone();
        for block in &self.blocks {
            out.push('\n');
            out.push_str(&block.render());
        }
        out
    }
}

pub fn instruction_for(target: TargetSection) -> String {
    format!(
        "Given the following concepts and text extracted from each section in a discharge summary, generate the section \"{}\".",
        target.display_name()
    )
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BuildError {
    #[error("budget of {budget} tokens cannot hold the {instruction_tokens}-token instruction")]
    Unbuildable {
        budget: usize,
        instruction_tokens: usize,
    },
}

/// Concepts extracted for one visit, keyed by source.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitConcepts {
    pub sections: BTreeMap<SectionName, Vec<ConceptSpan>>,
    /// One list per radiology report, in report order.
    pub radiology: Vec<Vec<ConceptSpan>>,
    pub diagnoses: Vec<ConceptSpan>,
}

impl VisitConcepts {
    pub fn for_source(&self, source: &BlockSource) -> Vec<ConceptSpan> {
        match source {
            BlockSource::Section(name) => self.sections.get(name).cloned().unwrap_or_default(),
            BlockSource::Radiology => self.radiology.concat(),
            BlockSource::DiagnosisDescriptions => self.diagnoses.clone(),
        }
    }
}

/// Text a source contributes when used verbatim, or `None` when absent.
pub fn source_text(visit: &Visit, note: &SegmentedNote, source: &BlockSource) -> Option<String> {
    let text = match source {
        BlockSource::Section(name) => extract_section(note, name)?.to_string(),
        BlockSource::Radiology => visit.radiology_reports.join("\n"),
        BlockSource::DiagnosisDescriptions => unique_titles(visit).join("; "),
    };
    (!text.trim().is_empty()).then_some(text)
}

fn unique_titles(visit: &Visit) -> Vec<&str> {
    let mut seen = HashSet::new();
    visit
        .ed_diagnoses
        .iter()
        .map(|d| d.long_title.trim())
        .filter(|t| !t.is_empty() && seen.insert(*t))
        .collect()
}

/// Where one extracted concept list belongs inside `VisitConcepts`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConceptSlot {
    Section(SectionName),
    /// Index into the visit's radiology reports.
    Radiology(usize),
    Diagnoses,
}

/// A text to run concept extraction on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptDocument {
    pub slot: ConceptSlot,
    pub text: String,
    pub section: SectionName,
}

/// Texts needed by every concept source of either target, each source once.
pub fn concept_documents(
    visit: &Visit,
    note: &SegmentedNote,
    selection: &SelectionConfig,
) -> Vec<ConceptDocument> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in TargetSection::ALL {
        for source in &selection.for_target(t).concept_sections {
            if !seen.insert(source.clone()) {
                continue;
            }
            match source {
                BlockSource::Section(name) => {
                    if let Some(body) = extract_section(note, name) {
                        out.push(ConceptDocument {
                            slot: ConceptSlot::Section(name.clone()),
                            text: body.to_string(),
                            section: name.clone(),
                        });
                    }
                }
                BlockSource::Radiology => {
                    for (i, report) in visit.radiology_reports.iter().enumerate() {
                        out.push(ConceptDocument {
                            slot: ConceptSlot::Radiology(i),
                            text: report.clone(),
                            section: SectionName::Unknown(RADIOLOGY_LABEL.to_string()),
                        });
                    }
                }
                BlockSource::DiagnosisDescriptions => out.push(ConceptDocument {
                    slot: ConceptSlot::Diagnoses,
                    text: unique_titles(visit).join("; "),
                    section: SectionName::Unknown(DIAGNOSIS_LABEL.to_string()),
                }),
            }
        }
    }
    out
}

impl VisitConcepts {
    pub fn insert(&mut self, slot: ConceptSlot, spans: Vec<ConceptSpan>) {
        match slot {
            ConceptSlot::Section(name) => {
                self.sections.insert(name, spans);
            }
            ConceptSlot::Radiology(i) => {
                if self.radiology.len() <= i {
                    self.radiology.resize(i + 1, Vec::new());
                }
                self.radiology[i] = spans;
            }
            ConceptSlot::Diagnoses => self.diagnoses = spans,
        }
    }
}

/// Runs the lexicon over every concept source the selection needs.
pub fn extract_visit_concepts(
    visit: &Visit,
    note: &SegmentedNote,
    lexicon: &Lexicon,
    selection: &SelectionConfig,
) -> VisitConcepts {
    let mut out = VisitConcepts::default();
    for doc in concept_documents(visit, note, selection) {
        let spans = extract_concepts(&doc.text, &doc.section, lexicon);
        out.insert(doc.slot, spans);
    }
    out
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn build_input(
    visit: &Visit,
    note: &SegmentedNote,
    concepts: &VisitConcepts,
    target: TargetSection,
    cfg: &SelectionConfig,
    budget: usize,
    tokenizer: Tokenizer,
) -> Result<ReconstructedInput, BuildError> {
    let instruction = instruction_for(target);
    let instruction_tokens = tokenizer.count(&instruction);
    if budget < instruction_tokens {
        return Err(BuildError::Unbuildable {
            budget,
            instruction_tokens,
        });
    }

    let selection = cfg.for_target(target);
    let sources: Vec<_> = selection.sources().collect();
    let n = sources.len();
    let mut blocks = Vec::with_capacity(n);
    for (idx, (source, mode)) in sources.into_iter().enumerate() {
        let content = match mode {
            BlockMode::Verbatim => {
                source_text(visit, note, source).map(|t| collapse_whitespace(&t))
            }
            BlockMode::ConceptList => {
                let present = match source {
                    BlockSource::Section(name) => note.first(name).is_some(),
                    _ => true,
                };
                let list = dedup_concepts(&concepts.for_source(source));
                (present && !list.is_empty()).then(|| list.join(", "))
            }
        };
        let Some(content) = content else { continue };
        let label = source.label().to_string();
        blocks.push(InputBlock {
            token_count: tokenizer.count(&render_block(&label, &content)),
            label,
            mode,
            content,
            priority: n - idx,
        });
    }

    let mut total = instruction_tokens + blocks.iter().map(|b| b.token_count).sum::<usize>();
    let mut truncated = false;
    while total > budget {
        truncated = true;
        let victim = blocks
            .iter()
            .enumerate()
            .min_by_key(|(_, b)| b.priority)
            .map(|(i, _)| i)
            .expect("instruction alone fits, so some block must exceed the budget");
        let excess = total - budget;
        let block = &mut blocks[victim];
        if excess >= block.token_count {
            total -= block.token_count;
            blocks.remove(victim);
            continue;
        }
        let keep = block.token_count - excess;
        let prefix = render_block(&block.label, "");
        if keep <= tokenizer.count(&prefix) {
            total -= block.token_count;
            blocks.remove(victim);
            continue;
        }
        let rendered = block.render();
        let cut = tokenizer.truncate(&rendered, keep);
        block.content = cut
            .get(prefix.len()..)
            .unwrap_or_default()
            .trim_end()
            .to_string();
        let new_count = tokenizer.count(&block.render());
        total = total - block.token_count + new_count;
        block.token_count = new_count;
    }

    Ok(ReconstructedInput {
        target,
        instruction,
        blocks,
        total_tokens: total,
        truncated,
    })
}
