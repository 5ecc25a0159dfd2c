//! Per-sample metrics and their aggregation into one overall score.

mod aggregate;
mod bleu;
mod io;
mod meteor;
mod remote;
mod rouge;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aggregate::{aggregate, AggregateError, AggregateReport};
pub use bleu::{bleu4, clipped_matches, EPSILON as BLEU_EPSILON};
pub use io::{read_gold, write_scores, GoldError, GoldRecord};
pub use meteor::{align as meteor_alignment, chunks as meteor_chunks, meteor, stem};
pub use remote::{RemoteScorer, ScoreRequest, ScoreResponse, Scored};
pub use rouge::{lcs_len, rouge_l, rouge_n};

use crate::concepts::{extract_concepts, normalize_surface, Lexicon};
use crate::section::{SectionName, TargetSection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MetricId {
    #[serde(rename = "bleu4")]
    Bleu4,
    #[serde(rename = "rouge1")]
    Rouge1,
    #[serde(rename = "rouge2")]
    Rouge2,
    #[serde(rename = "rougeL")]
    RougeL,
    #[serde(rename = "meteor")]
    Meteor,
    #[serde(rename = "concept_f1")]
    ConceptF1,
    #[serde(rename = "bertscore")]
    BertScore,
    #[serde(rename = "alignscore")]
    AlignScore,
}

impl MetricId {
    pub const ALL: [MetricId; 8] = [
        MetricId::Bleu4,
        MetricId::Rouge1,
        MetricId::Rouge2,
        MetricId::RougeL,
        MetricId::Meteor,
        MetricId::ConceptF1,
        MetricId::BertScore,
        MetricId::AlignScore,
    ];

    /// Metrics computed in-process.
    pub const LOCAL: [MetricId; 6] = [
        MetricId::Bleu4,
        MetricId::Rouge1,
        MetricId::Rouge2,
        MetricId::RougeL,
        MetricId::Meteor,
        MetricId::ConceptF1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Bleu4 => "bleu4",
            MetricId::Rouge1 => "rouge1",
            MetricId::Rouge2 => "rouge2",
            MetricId::RougeL => "rougeL",
            MetricId::Meteor => "meteor",
            MetricId::ConceptF1 => "concept_f1",
            MetricId::BertScore => "bertscore",
            MetricId::AlignScore => "alignscore",
        }
    }

    pub fn is_remote(self) -> bool {
        matches!(self, MetricId::BertScore | MetricId::AlignScore)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

/// Lowercases, splits on whitespace and strips non-alphanumeric characters
/// from both ends of each token. Tokens that become empty are dropped.
pub fn tokenize_eval(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

fn concept_set(text: &str, lexicon: &Lexicon) -> HashSet<String> {
    let section = SectionName::Unknown(String::new());
    extract_concepts(text, &section, lexicon)
        .iter()
        .map(|c| normalize_surface(&c.text))
        .collect()
}

/// Set F1 over the lexicon concepts found in each text.
pub fn concept_f1(candidate: &str, reference: &str, lexicon: &Lexicon) -> f64 {
    let c = concept_set(candidate, lexicon);
    let r = concept_set(reference, lexicon);
    match (c.is_empty(), r.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let overlap = c.intersection(&r).count();
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / c.len() as f64;
    let r = overlap as f64 / r.len() as f64;
    2.0 * p * r / (p + r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hadm_id: String,
    pub target: TargetSection,
    pub scores: BTreeMap<MetricId, f64>,
}

/// One candidate/reference pair to score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub hadm_id: String,
    pub target: TargetSection,
    pub candidate: String,
    pub reference: String,
}

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("metric concept_f1 needs a lexicon")]
    MissingLexicon,
    #[error("metric {0} needs a scorer endpoint")]
    MissingScorer(MetricId),
}

/// Local metric values for one pair.
pub fn score_local(
    candidate: &str,
    reference: &str,
    metrics: &[MetricId],
    lexicon: Option<&Lexicon>,
) -> Result<BTreeMap<MetricId, f64>, EvaluationError> {
    let c = tokenize_eval(candidate);
    let r = tokenize_eval(reference);
    let mut out = BTreeMap::new();
    for &m in metrics {
        let v = match m {
            MetricId::Bleu4 => bleu4(&c, &r),
            MetricId::Rouge1 => rouge_n(&c, &r, 1),
            MetricId::Rouge2 => rouge_n(&c, &r, 2),
            MetricId::RougeL => rouge_l(&c, &r),
            MetricId::Meteor => meteor(&c, &r),
            MetricId::ConceptF1 => concept_f1(
                candidate,
                reference,
                lexicon.ok_or(EvaluationError::MissingLexicon)?,
            ),
            MetricId::BertScore | MetricId::AlignScore => continue,
        };
        out.insert(m, v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub reports: Vec<MetricReport>,
    /// Remote metrics whose scorer could not be reached.
    pub unavailable: BTreeSet<MetricId>,
    pub warnings: Vec<String>,
}

/// Scores every sample on every configured metric. Local metrics run in
/// parallel; remote ones go through `scorer` with bounded concurrency.
pub async fn evaluate_samples(
    samples: &[Sample],
    metrics: &[MetricId],
    lexicon: Option<&Lexicon>,
    scorer: Option<&RemoteScorer>,
    max_in_flight: usize,
) -> Result<Evaluation, EvaluationError> {
    let metrics: Vec<MetricId> = metrics
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if metrics.contains(&MetricId::ConceptF1) && lexicon.is_none() {
        return Err(EvaluationError::MissingLexicon);
    }
    let local: Vec<BTreeMap<MetricId, f64>> = samples
        .par_iter()
        .map(|s| score_local(&s.candidate, &s.reference, &metrics, lexicon))
        .collect::<Result<_, _>>()?;
    let mut reports: Vec<MetricReport> = samples
        .iter()
        .zip(local)
        .map(|(s, scores)| MetricReport {
            hadm_id: s.hadm_id.clone(),
            target: s.target,
            scores,
        })
        .collect();

    let mut unavailable = BTreeSet::new();
    let mut warnings = Vec::new();
    for &m in metrics.iter().filter(|m| m.is_remote()) {
        let scorer = scorer.ok_or(EvaluationError::MissingScorer(m))?;
        match scorer.score_many(samples, m, max_in_flight).await {
            Ok(values) => {
                for (report, scored) in reports.iter_mut().zip(values) {
                    if let Some(raw) = scored.clamped_from {
                        warnings.push(format!(
                            "{m} for {} {} was {raw}, clamped to {}",
                            report.hadm_id, report.target, scored.value
                        ));
                    }
                    report.scores.insert(m, scored.value);
                }
            }
            Err(e) => {
                warnings.push(format!("{m} unavailable: {e}"));
                unavailable.insert(m);
            }
        }
    }
    for w in &warnings {
        tracing::warn!("{w}");
    }
    Ok(Evaluation {
        reports,
        unavailable,
        warnings,
    })
}
