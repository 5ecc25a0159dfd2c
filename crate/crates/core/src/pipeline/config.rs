//! Pipeline configuration: one TOML document, overridable per key from the
//! environment (`DISCHARGEKIT_<PATH>`) and from `key.path=value` pairs.
//!
//! Precedence, lowest first: built-in defaults, the file, the environment,
//! explicit overrides. Relative paths are resolved against the directory of
//! the config file (the working directory when there is none).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::concepts::Lexicon;
use crate::corpus::{Split, DEFAULT_BUDGET};
use crate::evaluation::MetricId;
use crate::generation::GenerationParams;
use crate::http::RetryPolicy;
use crate::input_builder::{instruction_for, SelectionConfig};
use crate::prompt::PromptTemplate;
use crate::section::TargetSection;
use crate::tokenizer::Tokenizer;

pub const ENV_PREFIX: &str = "DISCHARGEKIT_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// Concept lists for concept sources, verbatim text for the rest.
    #[default]
    NerText,
    /// Every selected source copied verbatim.
    AllText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    Extractive,
    Remote,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Mock => "mock",
            BackendKind::Extractive => "extractive",
            BackendKind::Remote => "remote",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    pub split: Split,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            path: PathBuf::from("corpus.jsonl"),
            split: Split::Train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconConfig {
    pub path: PathBuf,
}

impl Default for LexiconConfig {
    fn default() -> Self {
        LexiconConfig {
            path: PathBuf::from("lexicon.tsv"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Mock backend output per target.
    pub canned: BTreeMap<TargetSection, String>,
    /// Sentences returned by the extractive backend.
    pub extractive_k: usize,
    /// Base address of a remote generator.
    pub endpoint: Option<String>,
    pub retry: RetryPolicy,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Mock,
            canned: BTreeMap::from([
                (
                    TargetSection::BriefHospitalCourse,
                    "The patient was admitted, treated for the presenting problem and remained stable until discharge."
                        .to_string(),
                ),
                (
                    TargetSection::DischargeInstructions,
                    "Please take your medications as prescribed and follow up with your primary care physician."
                        .to_string(),
                ),
            ]),
            extractive_k: 3,
            endpoint: None,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub metrics: Vec<MetricId>,
    pub scorer_endpoint: Option<String>,
    pub retry: RetryPolicy,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            metrics: MetricId::LOCAL.to_vec(),
            scorer_endpoint: None,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcurrencyConfig {
    /// Threads for per-visit CPU work.
    pub workers: usize,
    /// Concurrent requests to any remote service.
    pub max_in_flight: usize,
}

impl Default for ConcurrencyConfig {
    fn default() -> Self {
        ConcurrencyConfig {
            workers: 4,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NerConfig {
    /// Remote NER service; the lexicon is used when unset.
    pub endpoint: Option<String>,
    pub retry: RetryPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub budget: usize,
    pub tokenizer: Tokenizer,
    pub output_dir: PathBuf,
    pub input_mode: InputMode,
    pub corpus: CorpusConfig,
    pub lexicon: LexiconConfig,
    pub selection: SelectionConfig,
    pub prompt: PromptTemplate,
    pub backend: BackendConfig,
    pub generation: GenerationParams,
    pub evaluation: EvaluationConfig,
    pub concurrency: ConcurrencyConfig,
    pub ner: NerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            budget: DEFAULT_BUDGET,
            tokenizer: Tokenizer::default(),
            output_dir: PathBuf::from("out"),
            input_mode: InputMode::default(),
            corpus: CorpusConfig::default(),
            lexicon: LexiconConfig::default(),
            selection: SelectionConfig::default(),
            prompt: PromptTemplate::default(),
            backend: BackendConfig::default(),
            generation: GenerationParams::default(),
            evaluation: EvaluationConfig::default(),
            concurrency: ConcurrencyConfig::default(),
            ner: NerConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path} is not valid TOML: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("override `{0}` must look like key.path=value")]
    BadOverride(String),
    #[error("cannot set `{path}`: `{segment}` is not a table")]
    NotATable { path: String, segment: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Parses an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Map<String, Value>>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Recursively overlays `top` onto `base`; non-table values replace.
fn merge(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Object(b)), Value::Object(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(root: &mut Map<String, Value>, path: &str, value: Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = path.split('.').map(str::trim).collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| ConfigError::BadOverride(path.to_string()))?;
    let mut table = root;
    for seg in parts {
        let entry = table
            .entry(seg.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
        table = entry
            .as_object_mut()
            .ok_or_else(|| ConfigError::NotATable {
                path: path.to_string(),
                segment: seg.to_string(),
            })?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Every dotted key of the default configuration, including optional ones.
pub fn known_paths() -> Vec<String> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<String>) {
        match v {
            Value::Object(map) if !map.is_empty() => {
                for (k, child) in map {
                    let p = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    out.push(p.clone());
                    walk(&p, child, out);
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    let default = serde_json::to_value(PipelineConfig::default()).expect("config serializes");
    walk("", &default, &mut out);
    out
}

/// `DISCHARGEKIT_BACKEND_KIND` style name for a dotted key.
pub fn env_name(path: &str) -> String {
    format!("{ENV_PREFIX}{}", path.replace('.', "_").to_uppercase())
}

/// Overrides taken from environment variables whose names map to a known key.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<(String, String)> {
    let by_name: BTreeMap<String, String> = known_paths()
        .into_iter()
        .map(|p| (env_name(&p), p))
        .collect();
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| by_name.get(&k).map(|p| (p.clone(), v)))
        .collect();
    out.sort();
    out
}

pub fn parse_override(s: &str) -> Result<(String, String), ConfigError> {
    let s = s.trim_start_matches("--");
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| ConfigError::BadOverride(s.to_string()))?;
    if k.trim().is_empty() {
        return Err(ConfigError::BadOverride(s.to_string()));
    }
    Ok((k.trim().to_string(), v.to_string()))
}

impl PipelineConfig {
    /// Builds a config from an optional file plus overrides applied in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let Value::Object(mut root) =
            serde_json::to_value(PipelineConfig::default()).expect("config serializes")
        else {
            unreachable!("config serializes to an object")
        };
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                toml::from_str::<Map<String, Value>>(&text).map_err(|e| ConfigError::Syntax {
                    path: p.to_path_buf(),
                    message: e.to_string(),
                })?
            }
            None => Map::new(),
        };
        merge(&mut root, file);
        for (k, v) in overrides {
            set_path(&mut root, k, parse_value(v))?;
        }
        let mut cfg: PipelineConfig = serde_json::from_value(Value::Object(root))
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let base = path
            .and_then(Path::parent)
            .map(Path::to_path_buf)
            .unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    /// Like `load`, with `DISCHARGEKIT_*` variables applied before `overrides`.
    pub fn load_with_env(
        path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, ConfigError> {
        let mut all = env_overrides(std::env::vars());
        all.extend_from_slice(overrides);
        Self::load(path, &all)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.corpus.path,
            &mut self.lexicon.path,
            &mut self.output_dir,
        ] {
            if p.is_relative() && !base.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes as TOML")
    }

    pub fn effective_selection(&self) -> SelectionConfig {
        match self.input_mode {
            InputMode::NerText => self.selection.clone(),
            InputMode::AllText => self.selection.all_verbatim(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.field, self.message)
    }
}

fn error(field: impl Into<String>, message: impl Into<String>) -> Finding {
    Finding {
        severity: Severity::Error,
        field: field.into(),
        message: message.into(),
    }
}

/// Checks every config invariant. An empty result means the config is usable.
pub fn validate_config(cfg: &PipelineConfig) -> Vec<Finding> {
    let mut out = Vec::new();

    if !cfg.corpus.path.is_file() {
        out.push(error(
            "corpus.path",
            format!("{} does not exist", cfg.corpus.path.display()),
        ));
    }
    if !cfg.lexicon.path.is_file() {
        out.push(error(
            "lexicon.path",
            format!("{} does not exist", cfg.lexicon.path.display()),
        ));
    } else if let Err(e) = Lexicon::load(&cfg.lexicon.path) {
        out.push(error("lexicon.path", e.to_string()));
    }

    if cfg.budget == 0 {
        out.push(error("budget", "must be > 0"));
    } else {
        for t in TargetSection::ALL {
            let needed = cfg.tokenizer.count(&instruction_for(t));
            if cfg.budget < needed {
                out.push(error(
                    "budget",
                    format!(
                        "{} tokens cannot hold the {needed}-token instruction for {t}",
                        cfg.budget
                    ),
                ));
                break;
            }
        }
    }

    for (target, problem) in cfg.selection.problems() {
        out.push(error(
            format!("selection.{}", target.key()),
            problem.to_string(),
        ));
    }

    match cfg.backend.kind {
        BackendKind::Mock => {
            for t in TargetSection::ALL {
                if !cfg.backend.canned.contains_key(&t) {
                    out.push(error(
                        format!("backend.canned.{}", t.key()),
                        "mock backend needs canned text",
                    ));
                }
            }
        }
        BackendKind::Extractive => {
            if cfg.backend.extractive_k == 0 {
                out.push(error("backend.extractive_k", "must be >= 1"));
            }
        }
        BackendKind::Remote => {
            if cfg.backend.endpoint.as_deref().is_none_or(str::is_empty) {
                out.push(error(
                    "backend.endpoint",
                    "remote backend needs an endpoint",
                ));
            }
        }
    }
    for (field, message) in cfg.generation.problems() {
        out.push(error(format!("generation.{field}"), message));
    }

    if cfg.evaluation.metrics.is_empty() {
        out.push(error(
            "evaluation.metrics",
            "at least one metric is required",
        ));
    }
    if cfg.evaluation.scorer_endpoint.is_none() {
        for m in cfg.evaluation.metrics.iter().filter(|m| m.is_remote()) {
            out.push(error(
                "evaluation.scorer_endpoint",
                format!("metric {m} needs a scorer endpoint"),
            ));
        }
    }

    if cfg.concurrency.workers == 0 {
        out.push(error("concurrency.workers", "must be > 0"));
    }
    if cfg.concurrency.max_in_flight == 0 {
        out.push(error("concurrency.max_in_flight", "must be > 0"));
    }
    out
}
