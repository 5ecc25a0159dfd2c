use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::info;

use super::config::{validate_config, BackendKind, Finding, PipelineConfig, Severity};
use super::report::{CompressionStats, RunReport, RunStatus, StageTiming};
use crate::concepts::remote::RemoteNer;
use crate::concepts::Lexicon;
use crate::corpus::{compute_stats, load_corpus, Visit};
use crate::evaluation::{
    aggregate, evaluate_samples, write_scores, AggregateReport, Evaluation, GoldRecord,
    RemoteScorer, Sample,
};
use crate::generation::{
    generate_batch, write_submission, DocumentOutcome, ExtractiveGenerator, GenerationParams,
    GenerationRequest, Generator, MockGenerator, RemoteGenerator, SubmissionRow,
};
use crate::input_builder::{build_input, concept_documents, VisitConcepts};
use crate::section::TargetSection;
use crate::segmenter::{segment, SegmentedNote};

/// Files written to the output directory by a full run.
pub const ARTIFACTS: [&str; 7] = [
    "concepts.jsonl",
    "prompts.jsonl",
    "submission.csv",
    "gold.jsonl",
    "scores.csv",
    "aggregate.json",
    "run_report.json",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    Extract,
    BuildInput,
    Generate,
    Evaluate,
    Write,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Extract => "extract",
            Stage::BuildInput => "build_input",
            Stage::Generate => "generate",
            Stage::Evaluate => "evaluate",
            Stage::Write => "write",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration is invalid ({} finding(s))", .0.len())]
    Validation(Vec<Finding>),
    #[error("stage `{stage}` failed: {message}")]
    Stage {
        stage: Stage,
        message: String,
        report: Box<RunReport>,
    },
}

/// Concepts for one visit, or why extraction failed. One line of
/// `concepts.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedVisit {
    pub hadm_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub concepts: Option<VisitConcepts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn thread_pool(cfg: &PipelineConfig) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.concurrency.workers.max(1))
        .build()
        .expect("thread pool builds")
}

pub fn segment_all(cfg: &PipelineConfig, visits: &[Visit]) -> Vec<SegmentedNote> {
    thread_pool(cfg).install(|| visits.par_iter().map(|v| segment(&v.note_text)).collect())
}

/// Concept extraction for every visit, through the remote NER service when
/// one is configured and the lexicon otherwise.
pub async fn extract_all(
    cfg: &PipelineConfig,
    visits: &[Visit],
    notes: &[SegmentedNote],
    lexicon: &Lexicon,
) -> Vec<ExtractedVisit> {
    let selection = cfg.effective_selection();
    let docs: Vec<_> = thread_pool(cfg).install(|| {
        visits
            .par_iter()
            .zip(notes)
            .map(|(v, n)| concept_documents(v, n, &selection))
            .collect()
    });

    let results: Vec<Result<VisitConcepts, String>> = match &cfg.ner.endpoint {
        None => thread_pool(cfg).install(|| {
            docs.par_iter()
                .map(|visit_docs| {
                    let mut c = VisitConcepts::default();
                    for d in visit_docs {
                        c.insert(
                            d.slot.clone(),
                            crate::concepts::extract_concepts(&d.text, &d.section, lexicon),
                        );
                    }
                    Ok(c)
                })
                .collect()
        }),
        Some(endpoint) => {
            let ner = RemoteNer::new(endpoint, cfg.ner.retry);
            let flat: Vec<_> = docs
                .iter()
                .flatten()
                .map(|d| (d.text.clone(), d.section.clone()))
                .collect();
            let mut answers = ner
                .extract_many(&flat, cfg.concurrency.max_in_flight)
                .await
                .into_iter();
            docs.iter()
                .map(|visit_docs| {
                    let mut c = VisitConcepts::default();
                    let mut failure = None;
                    for d in visit_docs {
                        match answers.next().expect("one answer per document") {
                            Ok(spans) => c.insert(d.slot.clone(), spans),
                            Err(e) => {
                                failure.get_or_insert_with(|| format!("{}: {e}", d.section));
                            }
                        }
                    }
                    failure.map_or(Ok(c), Err)
                })
                .collect()
        }
    };

    visits
        .iter()
        .zip(results)
        .map(|(v, r)| match r {
            Ok(c) => ExtractedVisit {
                hadm_id: v.hadm_id.clone(),
                concepts: Some(c),
                error: None,
            },
            Err(e) => ExtractedVisit {
                hadm_id: v.hadm_id.clone(),
                concepts: None,
                error: Some(e),
            },
        })
        .collect()
}

/// One line of `prompts.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub hadm_id: String,
    pub target: TargetSection,
    pub prompt: String,
    pub total_tokens: usize,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptStage {
    /// Sorted by `(hadm_id, target)`.
    pub records: Vec<PromptRecord>,
    /// Documents that could not get a prompt.
    pub failures: Vec<DocumentOutcome>,
    pub compression: BTreeMap<TargetSection, CompressionStats>,
}

/// Builds the inference prompt for every visit and target, along with the
/// verbatim-only token count used for compression reporting.
pub fn build_prompts(
    cfg: &PipelineConfig,
    visits: &[Visit],
    notes: &[SegmentedNote],
    extracted: &[ExtractedVisit],
) -> PromptStage {
    let selection = cfg.effective_selection();
    let raw_selection = cfg.selection.all_verbatim();
    let empty = VisitConcepts::default();

    type Built = (
        TargetSection,
        Result<(PromptRecord, usize), DocumentOutcome>,
    );
    let per_visit: Vec<Vec<Built>> = thread_pool(cfg).install(|| {
        visits
            .par_iter()
            .zip(notes)
            .zip(extracted)
            .map(|((visit, note), ex)| {
                TargetSection::ALL
                    .into_iter()
                    .map(|target| {
                        let Some(concepts) = ex.concepts.as_ref() else {
                            let msg = ex
                                .error
                                .clone()
                                .unwrap_or_else(|| "no concepts".to_string());
                            return (
                                target,
                                Err(DocumentOutcome::failure(
                                    &visit.hadm_id,
                                    target,
                                    "extract",
                                    msg,
                                )),
                            );
                        };
                        let built = build_input(
                            visit,
                            note,
                            concepts,
                            target,
                            &selection,
                            cfg.budget,
                            cfg.tokenizer,
                        );
                        let input = match built {
                            Ok(i) => i,
                            Err(e) => {
                                return (
                                    target,
                                    Err(DocumentOutcome::failure(
                                        &visit.hadm_id,
                                        target,
                                        "build_input",
                                        e.to_string(),
                                    )),
                                )
                            }
                        };
                        let raw = build_input(
                            visit,
                            note,
                            &empty,
                            target,
                            &raw_selection,
                            usize::MAX,
                            cfg.tokenizer,
                        )
                        .map(|r| r.total_tokens)
                        .unwrap_or(0);
                        let record = PromptRecord {
                            hadm_id: visit.hadm_id.clone(),
                            target,
                            prompt: cfg.prompt.render_inference(&input),
                            total_tokens: input.total_tokens,
                            truncated: input.truncated,
                        };
                        (target, Ok((record, raw)))
                    })
                    .collect()
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut pairs: BTreeMap<TargetSection, Vec<(usize, usize)>> = BTreeMap::new();
    for (target, built) in per_visit.into_iter().flatten() {
        match built {
            Ok((record, raw)) => {
                pairs
                    .entry(target)
                    .or_default()
                    .push((raw, record.total_tokens));
                records.push(record);
            }
            Err(outcome) => failures.push(outcome),
        }
    }
    records.sort_by(|a, b| (&a.hadm_id, a.target).cmp(&(&b.hadm_id, b.target)));
    let compression = TargetSection::ALL
        .into_iter()
        .map(|t| {
            (
                t,
                CompressionStats::from_pairs(pairs.get(&t).map_or(&[][..], Vec::as_slice)),
            )
        })
        .collect();
    PromptStage {
        records,
        failures,
        compression,
    }
}

pub fn read_prompts(text: &str) -> Result<Vec<PromptRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("prompts line {}: {e}", i + 1)))
        .collect()
}

pub fn build_generator(cfg: &PipelineConfig, visits: &[Visit]) -> Box<dyn Generator> {
    match cfg.backend.kind {
        BackendKind::Mock => Box::new(MockGenerator::new(cfg.backend.canned.clone())),
        BackendKind::Extractive => {
            let notes: HashMap<String, SegmentedNote> = visits
                .iter()
                .map(|v| (v.hadm_id.clone(), segment(&v.note_text)))
                .collect();
            Box::new(ExtractiveGenerator::new(
                notes,
                cfg.effective_selection(),
                cfg.backend.extractive_k,
            ))
        }
        BackendKind::Remote => Box::new(RemoteGenerator::new(
            cfg.backend.endpoint.as_deref().unwrap_or_default(),
            cfg.backend.retry,
            cfg.tokenizer,
        )),
    }
}

fn generation_params(cfg: &PipelineConfig) -> GenerationParams {
    GenerationParams {
        seed: cfg.generation.seed.or(Some(cfg.seed)),
        ..cfg.generation
    }
}

/// Generates text for every prompt record; outcomes are sorted.
pub async fn generate_all(
    cfg: &PipelineConfig,
    visits: &[Visit],
    prompts: &[PromptRecord],
) -> Vec<DocumentOutcome> {
    let generator = build_generator(cfg, visits);
    let params = generation_params(cfg);
    let requests = prompts
        .iter()
        .map(|p| GenerationRequest {
            hadm_id: p.hadm_id.clone(),
            target: p.target,
            prompt: p.prompt.clone(),
            params,
        })
        .collect();
    generate_batch(generator.as_ref(), requests, cfg.concurrency.max_in_flight).await
}

/// One row per visit in corpus order. Failed documents leave their cell empty.
pub fn submission_rows(visits: &[Visit], outcomes: &[DocumentOutcome]) -> Vec<SubmissionRow> {
    let mut texts: HashMap<(&str, TargetSection), &str> = HashMap::new();
    for o in outcomes {
        texts.insert((o.hadm_id.as_str(), o.target), o.text());
    }
    visits
        .iter()
        .map(|v| {
            let mut row = SubmissionRow {
                hadm_id: v.hadm_id.clone(),
                ..SubmissionRow::default()
            };
            for t in TargetSection::ALL {
                row.set(
                    t,
                    texts
                        .get(&(v.hadm_id.as_str(), t))
                        .copied()
                        .unwrap_or_default()
                        .to_string(),
                );
            }
            row
        })
        .collect()
}

pub fn gold_records(visits: &[Visit]) -> Vec<GoldRecord> {
    visits
        .iter()
        .map(|v| GoldRecord::from_note(&v.hadm_id, &v.note_text))
        .collect()
}

/// Scores a submission against gold records. Every gold target is scored;
/// a visit absent from the submission counts as an empty candidate.
pub async fn evaluate_submission(
    cfg: &PipelineConfig,
    gold: &[GoldRecord],
    submission: &[SubmissionRow],
    lexicon: Option<&Lexicon>,
) -> Result<(Evaluation, AggregateReport), String> {
    let by_id: HashMap<&str, &SubmissionRow> =
        submission.iter().map(|r| (r.hadm_id.as_str(), r)).collect();
    let mut warnings = Vec::new();
    let mut samples = Vec::new();
    for g in gold {
        let row = by_id.get(g.hadm_id.as_str());
        if row.is_none() {
            warnings.push(format!(
                "hadm_id {} missing from submission; scored as empty",
                g.hadm_id
            ));
        }
        for t in TargetSection::ALL {
            if let Some(reference) = g.get(t) {
                samples.push(Sample {
                    hadm_id: g.hadm_id.clone(),
                    target: t,
                    candidate: row.map_or("", |r| r.get(t)).to_string(),
                    reference: reference.to_string(),
                });
            }
        }
    }
    let scorer = cfg
        .evaluation
        .scorer_endpoint
        .as_deref()
        .map(|e| RemoteScorer::new(e, cfg.evaluation.retry));
    let mut evaluation = evaluate_samples(
        &samples,
        &cfg.evaluation.metrics,
        lexicon,
        scorer.as_ref(),
        cfg.concurrency.max_in_flight,
    )
    .await
    .map_err(|e| e.to_string())?;
    warnings.append(&mut evaluation.warnings);
    evaluation.warnings = warnings;
    let mut agg = aggregate(&evaluation.reports).map_err(|e| e.to_string())?;
    agg.unavailable = evaluation.unavailable.clone();
    Ok((evaluation, agg))
}

pub fn write_jsonl<T: Serialize>(
    path: &Path,
    items: impl IntoIterator<Item = T>,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
}

fn io_err(path: &Path, e: impl fmt::Display) -> String {
    format!("{}: {e}", path.display())
}

struct Run {
    report: RunReport,
    clock: Instant,
}

impl Run {
    fn lap(&mut self, stage: Stage) {
        let millis = self.clock.elapsed().as_millis() as u64;
        info!(stage = stage.as_str(), millis, "stage finished");
        self.report.stage_timings.push(StageTiming {
            stage: stage.as_str().to_string(),
            millis,
        });
        self.clock = Instant::now();
    }

    fn fail(mut self, stage: Stage, message: String, out_dir: &Path) -> PipelineError {
        self.report.status = RunStatus::Failed {
            stage: stage.as_str().to_string(),
            message: message.clone(),
        };
        if std::fs::create_dir_all(out_dir).is_ok() {
            let _ = write_json(&out_dir.join("run_report.json"), &self.report);
        }
        PipelineError::Stage {
            stage,
            message,
            report: Box::new(self.report),
        }
    }
}

/// Runs every stage and writes all artifacts to `cfg.output_dir`.
///
/// Per-document problems are recorded in the report; a stage that cannot
/// run at all stops the pipeline and still leaves a report naming it.
pub async fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport, PipelineError> {
    let findings: Vec<Finding> = validate_config(cfg)
        .into_iter()
        .filter(|f| f.severity == Severity::Error)
        .collect();
    if !findings.is_empty() {
        return Err(PipelineError::Validation(findings));
    }
    let out = cfg.output_dir.as_path();
    let mut run = Run {
        report: RunReport {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            backend: cfg.backend.kind.to_string(),
            status: RunStatus::Complete,
            stage_timings: Vec::new(),
            corpus_stats: None,
            compression: BTreeMap::new(),
            outcomes: Vec::new(),
            aggregate: None,
            warnings: Vec::new(),
        },
        clock: Instant::now(),
    };

    if let Err(e) = std::fs::create_dir_all(out) {
        return Err(run.fail(Stage::Write, io_err(out, e), out));
    }
    let visits = match load_corpus(&cfg.corpus.path, cfg.corpus.split) {
        Ok(v) => v,
        Err(e) => return Err(run.fail(Stage::Load, e.to_string(), out)),
    };
    let lexicon = match Lexicon::load(&cfg.lexicon.path) {
        Ok(l) => l,
        Err(e) => return Err(run.fail(Stage::Load, e.to_string(), out)),
    };
    run.report.corpus_stats = Some(compute_stats(&visits, cfg.tokenizer, cfg.budget));
    let notes = segment_all(cfg, &visits);
    run.lap(Stage::Load);

    let extracted = extract_all(cfg, &visits, &notes, &lexicon).await;
    if let Err(e) = write_jsonl(&out.join("concepts.jsonl"), &extracted) {
        return Err(run.fail(Stage::Extract, io_err(out, e), out));
    }
    run.lap(Stage::Extract);

    let prompts = build_prompts(cfg, &visits, &notes, &extracted);
    if let Err(e) = write_jsonl(&out.join("prompts.jsonl"), &prompts.records) {
        return Err(run.fail(Stage::BuildInput, io_err(out, e), out));
    }
    run.report.compression = prompts.compression.clone();
    run.lap(Stage::BuildInput);

    let mut outcomes = generate_all(cfg, &visits, &prompts.records).await;
    outcomes.extend(prompts.failures);
    outcomes.sort_by(|a, b| (&a.hadm_id, a.target).cmp(&(&b.hadm_id, b.target)));
    let rows = submission_rows(&visits, &outcomes);
    run.report.outcomes = outcomes;
    let written = File::create(out.join("submission.csv"))
        .map_err(|e| e.to_string())
        .and_then(|f| write_submission(BufWriter::new(f), &rows).map_err(|e| e.to_string()));
    if let Err(e) = written {
        return Err(run.fail(Stage::Generate, e, out));
    }
    run.lap(Stage::Generate);

    let gold = gold_records(&visits);
    if let Err(e) = write_jsonl(&out.join("gold.jsonl"), &gold) {
        return Err(run.fail(Stage::Evaluate, io_err(out, e), out));
    }
    let (evaluation, agg) = match evaluate_submission(cfg, &gold, &rows, Some(&lexicon)).await {
        Ok(r) => r,
        Err(e) => return Err(run.fail(Stage::Evaluate, e, out)),
    };
    let written = File::create(out.join("scores.csv"))
        .map_err(|e| e.to_string())
        .and_then(|f| {
            write_scores(BufWriter::new(f), &evaluation.reports).map_err(|e| e.to_string())
        })
        .and_then(|_| write_json(&out.join("aggregate.json"), &agg).map_err(|e| e.to_string()));
    if let Err(e) = written {
        return Err(run.fail(Stage::Evaluate, e, out));
    }
    run.report.warnings.extend(evaluation.warnings);
    run.report.aggregate = Some(agg);
    run.lap(Stage::Evaluate);

    let failed = run.report.failed_documents();
    if failed > 0 {
        run.report.status = RunStatus::Partial {
            failed_documents: failed,
        };
    }
    if let Err(e) = write_json(&out.join("run_report.json"), &run.report) {
        return Err(run.fail(Stage::Write, io_err(out, e), out));
    }
    Ok(run.report)
}
