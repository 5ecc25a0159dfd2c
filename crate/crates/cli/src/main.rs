//! `dischargekit` command line.
//!
//! Every subcommand reads the same TOML config (`--config`). Any config key
//! can be overridden with `--set key.path=value` or directly as
//! `--key.path=value`, and through `DISCHARGEKIT_KEY_PATH` variables.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 stage failure,
//! 3 finished with per-document failures.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dischargekit::concepts::dedup_concepts;
use dischargekit::corpus::load_corpus;
use dischargekit::evaluation::{read_gold, write_scores};
use dischargekit::generation::{read_submission, write_submission};
use dischargekit::pipeline::{
    build_prompts, evaluate_submission, extract_all, generate_all, gold_records, known_paths,
    parse_override, read_prompts, run_pipeline, segment_all, submission_rows, validate_config,
    write_json, ExtractedVisit, PipelineConfig, PipelineError, RunStatus, Severity,
};
use dischargekit::{compute_stats, extract_concepts, segment, Lexicon, SectionName, Visit};

const EXIT_OK: u8 = 0;
const EXIT_INVALID: u8 = 1;
const EXIT_STAGE: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dischargekit",
    version,
    about = "Discharge summary section generation pipeline"
)]
struct Cli {
    #[command(flatten)]
    config_args: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Pipeline config (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set budget=1024`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Split a note into sections and print the spans as JSON.
    Segment {
        /// Note file; standard input when omitted or `-`.
        input: Option<PathBuf>,
    },
    /// Extract concepts for the corpus, or for one text with `--text`.
    Extract {
        /// Extract from this file (`-` for standard input) instead of the corpus.
        #[arg(long)]
        text: Option<PathBuf>,
        /// Section the text belongs to.
        #[arg(long, default_value = "Unknown")]
        section: String,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build generator prompts for every visit and target.
    BuildInput {
        /// Concepts from `extract`; extracted on the fly when omitted.
        #[arg(long)]
        concepts: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured backend over a prompts file and write a submission CSV.
    Generate {
        #[arg(long)]
        prompts: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a submission against gold sections.
    Evaluate {
        #[arg(long)]
        submission: PathBuf,
        /// Gold JSON lines; taken from the configured corpus when omitted.
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Per-sample scores CSV; standard output when omitted.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Aggregate report JSON; standard output when omitted.
        #[arg(long)]
        aggregate: Option<PathBuf>,
    },
    /// Print corpus length statistics.
    Stats,
    /// Run every stage and write all artifacts to `output_dir`.
    Run,
    /// Check the configuration and print any findings.
    Validate {
        /// Also print the effective configuration as TOML.
        #[arg(long)]
        print: bool,
    },
}

/// Pulls `--key.path=value` arguments for known config keys out of argv.
fn split_key_flags(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let known = known_paths();
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    for arg in args {
        let key = arg
            .strip_prefix("--")
            .and_then(|a| a.split_once('='))
            .map(|(k, _)| k.to_string());
        match key {
            Some(k) if known.contains(&k) => overrides.push(arg),
            _ => rest.push(arg),
        }
    }
    (rest, overrides)
}

fn load_config(args: &ConfigArgs, key_flags: &[String]) -> Result<PipelineConfig> {
    let mut overrides = Vec::new();
    for s in args.set.iter().chain(key_flags) {
        overrides.push(parse_override(s)?);
    }
    Ok(PipelineConfig::load_with_env(
        args.config.as_deref(),
        &overrides,
    )?)
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        None => read_stdin(),
        Some(p) if p == Path::new("-") => read_stdin(),
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
    }
}

fn read_stdin() -> Result<String> {
    let mut s = String::new();
    io::stdin()
        .read_to_string(&mut s)
        .context("reading standard input")?;
    Ok(s)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_lines<T: serde::Serialize>(path: Option<&Path>, items: &[T]) -> Result<()> {
    let mut w = output(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

struct Loaded {
    visits: Vec<Visit>,
    lexicon: Lexicon,
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Loaded> {
    let visits = load_corpus(&cfg.corpus.path, cfg.corpus.split)?;
    let lexicon = Lexicon::load(&cfg.lexicon.path)?;
    Ok(Loaded { visits, lexicon })
}

/// Configuration errors stop a subcommand before it touches any data.
fn ensure_valid(cfg: &PipelineConfig) -> Option<u8> {
    let findings = validate_config(cfg);
    for f in &findings {
        eprintln!("{f}");
    }
    findings
        .iter()
        .any(|f| f.severity == Severity::Error)
        .then_some(EXIT_INVALID)
}

fn report_failures(count: usize) -> u8 {
    if count > 0 {
        eprintln!("{count} document(s) failed");
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

fn read_concepts(path: &Path) -> Result<Vec<ExtractedVisit>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

async fn execute(command: Command, cfg_args: ConfigArgs, key_flags: Vec<String>) -> Result<u8> {
    if let Command::Segment { input } = &command {
        let text = read_input(input.as_deref())?;
        println!(
            "{}",
            serde_json::to_string_pretty(&segment(&text).to_json())?
        );
        return Ok(EXIT_OK);
    }

    let cfg = match load_config(&cfg_args, &key_flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Ok(EXIT_INVALID);
        }
    };

    match command {
        Command::Segment { .. } => unreachable!("handled above"),
        Command::Validate { print } => {
            let code = ensure_valid(&cfg).unwrap_or(EXIT_OK);
            if print {
                print!("{}", cfg.to_toml());
            }
            if code == EXIT_OK {
                eprintln!("configuration ok ({})", cfg.hash());
            }
            Ok(code)
        }
        Command::Stats => {
            if cfg.budget == 0 {
                eprintln!("error: budget: must be > 0");
                return Ok(EXIT_INVALID);
            }
            let visits = load_corpus(&cfg.corpus.path, cfg.corpus.split)?;
            let stats = compute_stats(&visits, cfg.tokenizer, cfg.budget);
            println!("{}", serde_json::to_string_pretty(&stats)?);
            Ok(EXIT_OK)
        }
        Command::Extract { text, section, out } => {
            if let Some(path) = text {
                let lexicon = Lexicon::load(&cfg.lexicon.path)?;
                let body = read_input(Some(&path))?;
                let section = SectionName::parse(&section);
                let spans = extract_concepts(&body, &section, &lexicon);
                let json =
                    serde_json::json!({ "concepts": dedup_concepts(&spans), "spans": spans });
                let mut w = output(out.as_deref())?;
                writeln!(w, "{}", serde_json::to_string_pretty(&json)?)?;
                w.flush()?;
                return Ok(EXIT_OK);
            }
            if let Some(code) = ensure_valid(&cfg) {
                return Ok(code);
            }
            let inputs = load_inputs(&cfg)?;
            let notes = segment_all(&cfg, &inputs.visits);
            let extracted = extract_all(&cfg, &inputs.visits, &notes, &inputs.lexicon).await;
            write_lines(out.as_deref(), &extracted)?;
            Ok(report_failures(
                extracted.iter().filter(|e| e.error.is_some()).count(),
            ))
        }
        Command::BuildInput { concepts, out } => {
            if let Some(code) = ensure_valid(&cfg) {
                return Ok(code);
            }
            let inputs = load_inputs(&cfg)?;
            let notes = segment_all(&cfg, &inputs.visits);
            let extracted = match concepts {
                Some(p) => {
                    let mut by_id: std::collections::HashMap<String, ExtractedVisit> =
                        read_concepts(&p)?
                            .into_iter()
                            .map(|e| (e.hadm_id.clone(), e))
                            .collect();
                    inputs
                        .visits
                        .iter()
                        .map(|v| {
                            by_id.remove(&v.hadm_id).unwrap_or_else(|| ExtractedVisit {
                                hadm_id: v.hadm_id.clone(),
                                concepts: None,
                                error: Some("missing from concepts file".to_string()),
                            })
                        })
                        .collect()
                }
                None => extract_all(&cfg, &inputs.visits, &notes, &inputs.lexicon).await,
            };
            let stage = build_prompts(&cfg, &inputs.visits, &notes, &extracted);
            write_lines(out.as_deref(), &stage.records)?;
            for f in &stage.failures {
                eprintln!("{} {}: {:?}", f.hadm_id, f.target, f.status);
            }
            Ok(report_failures(stage.failures.len()))
        }
        Command::Generate { prompts, out } => {
            if let Some(code) = ensure_valid(&cfg) {
                return Ok(code);
            }
            let visits = load_corpus(&cfg.corpus.path, cfg.corpus.split)?;
            let text = std::fs::read_to_string(&prompts)
                .with_context(|| format!("reading {}", prompts.display()))?;
            let records = read_prompts(&text).map_err(anyhow::Error::msg)?;
            let outcomes = generate_all(&cfg, &visits, &records).await;
            let rows = submission_rows(&visits, &outcomes);
            write_submission(output(out.as_deref())?, &rows)?;
            let failed = outcomes.iter().filter(|o| !o.is_success()).count();
            for o in outcomes.iter().filter(|o| !o.is_success()) {
                eprintln!("{} {}: {:?}", o.hadm_id, o.target, o.status);
            }
            Ok(report_failures(failed))
        }
        Command::Evaluate {
            submission,
            gold,
            scores,
            aggregate,
        } => {
            let sub_file = File::open(&submission)
                .with_context(|| format!("opening {}", submission.display()))?;
            let rows = read_submission(sub_file)?;
            let gold = match gold {
                Some(p) => read_gold(&read_input(Some(&p))?)?,
                None => gold_records(&load_corpus(&cfg.corpus.path, cfg.corpus.split)?),
            };
            let lexicon = if cfg
                .evaluation
                .metrics
                .contains(&dischargekit::MetricId::ConceptF1)
            {
                Some(Lexicon::load(&cfg.lexicon.path)?)
            } else {
                None
            };
            let (evaluation, agg) = evaluate_submission(&cfg, &gold, &rows, lexicon.as_ref())
                .await
                .map_err(anyhow::Error::msg)?;
            for w in &evaluation.warnings {
                eprintln!("warning: {w}");
            }
            write_scores(output(scores.as_deref())?, &evaluation.reports)?;
            match aggregate {
                Some(p) => write_json(&p, &agg)?,
                None => println!("{}", serde_json::to_string_pretty(&agg)?),
            }
            Ok(EXIT_OK)
        }
        Command::Run => match run_pipeline(&cfg).await {
            Ok(report) => {
                for (target, c) in &report.compression {
                    eprintln!(
                        "compression {target}: {:.1} -> {:.1} tokens (ratio {:.3})",
                        c.mean_raw_tokens, c.mean_reconstructed_tokens, c.ratio
                    );
                }
                eprintln!(
                    "mean compression ratio: {:.3}",
                    report.mean_compression_ratio()
                );
                if let Some(agg) = &report.aggregate {
                    eprintln!("overall score: {:.4}", agg.overall);
                }
                eprintln!("artifacts written to {}", cfg.output_dir.display());
                Ok(match report.status {
                    RunStatus::Complete => EXIT_OK,
                    _ => report_failures(report.failed_documents()),
                })
            }
            Err(PipelineError::Validation(findings)) => {
                for f in findings {
                    eprintln!("{f}");
                }
                Ok(EXIT_INVALID)
            }
            Err(e @ PipelineError::Stage { .. }) => {
                eprintln!("error: {e}");
                Ok(EXIT_STAGE)
            }
        },
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(io::stderr)
        .init();

    let (args, key_flags) = split_key_flags(std::env::args().collect());
    let cli = Cli::parse_from(args);
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start runtime: {e}");
            return ExitCode::from(EXIT_STAGE);
        }
    };
    match runtime.block_on(execute(cli.command, cli.config_args, key_flags)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_STAGE)
        }
    }
}
