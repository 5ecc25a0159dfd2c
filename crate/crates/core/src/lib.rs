//! Retrieve-then-generate pipeline for discharge summary target sections.
//!
//! A discharge note is segmented into its named sections, clinical concepts
//! (problems, treatments, tests) are pulled from the sections that only need
//! to be summarized, and the result is assembled with the sections that are
//! copied verbatim into a budgeted prompt for a generator. The generated
//! "Brief Hospital Course" and "Discharge Instructions" are then scored with
//! BLEU-4, ROUGE-1/2/L, METEOR and a lexicon concept F1, and averaged into a
//! single overall score.
//!
//! ```
//! use dischargekit::{segment, extract_section, SectionName};
//!
//! let note = segment("Chief Complaint:\nheadache\n\nBrief Hospital Course:\nstable course\n");
//! assert_eq!(note.sections.len(), 2);
//! assert_eq!(
//!     extract_section(&note, &SectionName::BriefHospitalCourse),
//!     Some("stable course")
//! );
//! ```

pub mod concepts;
pub mod corpus;
pub mod evaluation;
pub mod generation;
pub mod http;
pub mod input_builder;
pub mod pipeline;
pub mod prompt;
pub mod section;
pub mod segmenter;
pub mod tokenizer;

pub use concepts::{
    dedup_concepts, extract_concepts, ConceptSpan, ConceptType, Lexicon, LexiconError,
};
pub use corpus::{
    compute_stats, load_corpus, CorpusError, CorpusStats, Diagnosis, IcdVersion, Split, Visit,
};
pub use evaluation::{aggregate, AggregateReport, MetricId, MetricReport};
pub use generation::{
    GenerationError, GenerationParams, GenerationRequest, GenerationResponse, Generator,
};
pub use input_builder::{
    build_input, default_selection, BlockSource, BuildError, InputBlock, ReconstructedInput,
    SelectionConfig,
};
pub use pipeline::{run_pipeline, validate_config, PipelineConfig, RunReport};
pub use prompt::{PromptTemplate, TemplateError};
pub use section::{SectionName, TargetSection};
pub use segmenter::{extract_section, redact_targets, segment, ByteSpan, Section, SegmentedNote};
pub use tokenizer::Tokenizer;
