use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusStats;
use crate::evaluation::AggregateReport;
use crate::generation::DocumentOutcome;
use crate::section::TargetSection;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "state")]
pub enum RunStatus {
    Complete,
    /// Finished, with some documents failed.
    Partial {
        failed_documents: usize,
    },
    /// A stage could not run; later stages were skipped.
    Failed {
        stage: String,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u64,
}

/// Input length before and after concept reduction, for one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionStats {
    pub documents: usize,
    /// Mean tokens with every selected source copied verbatim.
    pub mean_raw_tokens: f64,
    /// Mean tokens of the inputs actually sent to the generator.
    pub mean_reconstructed_tokens: f64,
    /// `mean_reconstructed_tokens / mean_raw_tokens`.
    pub ratio: f64,
    /// Documents whose reconstructed input is strictly shorter than raw.
    pub strictly_shorter: usize,
}

impl CompressionStats {
    pub fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        let n = pairs.len();
        let mean = |f: fn(&(usize, usize)) -> usize| {
            if n == 0 {
                0.0
            } else {
                pairs.iter().map(f).sum::<usize>() as f64 / n as f64
            }
        };
        let raw = mean(|p| p.0);
        let rec = mean(|p| p.1);
        CompressionStats {
            documents: n,
            mean_raw_tokens: raw,
            mean_reconstructed_tokens: rec,
            ratio: if raw > 0.0 { rec / raw } else { 1.0 },
            strictly_shorter: pairs.iter().filter(|(r, c)| c < r).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub seed: u64,
    pub backend: String,
    pub status: RunStatus,
    pub stage_timings: Vec<StageTiming>,
    pub corpus_stats: Option<CorpusStats>,
    pub compression: BTreeMap<TargetSection, CompressionStats>,
    /// One entry per `(hadm_id, target)`, sorted.
    pub outcomes: Vec<DocumentOutcome>,
    pub aggregate: Option<AggregateReport>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn failed_documents(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.is_success()).count()
    }

    /// Overall ratio of mean reconstructed to mean raw tokens, pooling both
    /// targets.
    pub fn mean_compression_ratio(&self) -> f64 {
        let raw: f64 = self
            .compression
            .values()
            .map(|c| c.mean_raw_tokens * c.documents as f64)
            .sum();
        let rec: f64 = self
            .compression
            .values()
            .map(|c| c.mean_reconstructed_tokens * c.documents as f64)
            .sum();
        if raw > 0.0 {
            rec / raw
        } else {
            1.0
        }
    }
}
