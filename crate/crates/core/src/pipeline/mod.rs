//! End-to-end orchestration and the per-stage building blocks the CLI
//! subcommands share with it.

mod config;
mod report;
mod stages;

pub use config::{
    env_name, env_overrides, known_paths, parse_override, validate_config, BackendConfig,
    BackendKind, ConcurrencyConfig, ConfigError, CorpusConfig, EvaluationConfig, Finding,
    InputMode, LexiconConfig, NerConfig, PipelineConfig, Severity, ENV_PREFIX,
};
pub use report::{CompressionStats, RunReport, RunStatus, StageTiming};
pub use stages::{
    build_generator, build_prompts, evaluate_submission, extract_all, generate_all, gold_records,
    read_prompts, run_pipeline, segment_all, submission_rows, write_json, write_jsonl,
    ExtractedVisit, PipelineError, PromptRecord, PromptStage, Stage, ARTIFACTS,
};
