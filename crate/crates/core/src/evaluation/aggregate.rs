use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MetricId, MetricReport};
use crate::section::TargetSection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub per_target_means: BTreeMap<TargetSection, BTreeMap<MetricId, f64>>,
    pub cross_target_means: BTreeMap<MetricId, f64>,
    pub overall: f64,
    pub sample_counts: BTreeMap<TargetSection, usize>,
    /// Configured metrics left out of `overall` because they could not be
    /// computed.
    pub unavailable: BTreeSet<MetricId>,
}

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("no samples for target `{0}`")]
    EmptyTarget(TargetSection),
    #[error("report for {hadm_id} {target} covers {found:?}, expected {expected:?}")]
    MetricMismatch {
        hadm_id: String,
        target: TargetSection,
        expected: Vec<MetricId>,
        found: Vec<MetricId>,
    },
    #[error("no metrics to aggregate")]
    NoMetrics,
}

/// Order-independent mean: values are summed in sorted order.
fn mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean per target and metric, then the unweighted mean of the two targets
/// per metric, then the unweighted mean over metrics.
pub fn aggregate(reports: &[MetricReport]) -> Result<AggregateReport, AggregateError> {
    let expected: Vec<MetricId> = reports
        .first()
        .map(|r| r.scores.keys().copied().collect())
        .unwrap_or_default();
    let mut values: BTreeMap<TargetSection, BTreeMap<MetricId, Vec<f64>>> = BTreeMap::new();
    for r in reports {
        let found: Vec<MetricId> = r.scores.keys().copied().collect();
        if found != expected {
            return Err(AggregateError::MetricMismatch {
                hadm_id: r.hadm_id.clone(),
                target: r.target,
                expected,
                found,
            });
        }
        let per_metric = values.entry(r.target).or_default();
        for (&m, &v) in &r.scores {
            per_metric.entry(m).or_default().push(v);
        }
    }
    for t in TargetSection::ALL {
        if !values.contains_key(&t) {
            return Err(AggregateError::EmptyTarget(t));
        }
    }
    if expected.is_empty() {
        return Err(AggregateError::NoMetrics);
    }

    let sample_counts = TargetSection::ALL
        .into_iter()
        .map(|t| (t, reports.iter().filter(|r| r.target == t).count()))
        .collect();
    let per_target_means: BTreeMap<_, BTreeMap<_, _>> = values
        .into_iter()
        .map(|(t, per_metric)| {
            (
                t,
                per_metric
                    .into_iter()
                    .map(|(m, mut v)| (m, mean(&mut v)))
                    .collect(),
            )
        })
        .collect();
    let cross_target_means: BTreeMap<MetricId, f64> = expected
        .iter()
        .map(|m| {
            let mut v: Vec<f64> = TargetSection::ALL
                .iter()
                .map(|t| per_target_means[t][m])
                .collect();
            (*m, mean(&mut v))
        })
        .collect();
    let overall = mean(&mut cross_target_means.values().copied().collect::<Vec<_>>());
    Ok(AggregateReport {
        per_target_means,
        cross_target_means,
        overall,
        sample_counts,
        unavailable: BTreeSet::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: &str, target: TargetSection, scores: &[(MetricId, f64)]) -> MetricReport {
        MetricReport {
            hadm_id: id.into(),
            target,
            scores: scores.iter().copied().collect(),
        }
    }

    #[test]
    fn two_target_example() {
        let reports = [
            report(
                "1",
                TargetSection::BriefHospitalCourse,
                &[(MetricId::Rouge1, 0.4), (MetricId::Bleu4, 0.2)],
            ),
            report(
                "1",
                TargetSection::DischargeInstructions,
                &[(MetricId::Rouge1, 0.6), (MetricId::Bleu4, 0.4)],
            ),
        ];
        let agg = aggregate(&reports).unwrap();
        assert_eq!(agg.cross_target_means[&MetricId::Rouge1], 0.5);
        assert!((agg.cross_target_means[&MetricId::Bleu4] - 0.3).abs() < 1e-15);
        assert_eq!(agg.overall, 0.4);
    }

    #[test]
    fn unweighted_across_targets() {
        let mut reports = Vec::new();
        for i in 0..10 {
            reports.push(report(
                &i.to_string(),
                TargetSection::BriefHospitalCourse,
                &[(MetricId::Meteor, 1.0)],
            ));
        }
        for i in 0..20 {
            reports.push(report(
                &i.to_string(),
                TargetSection::DischargeInstructions,
                &[(MetricId::Meteor, 0.0)],
            ));
        }
        let agg = aggregate(&reports).unwrap();
        assert_eq!(agg.overall, 0.5);
        assert_eq!(agg.sample_counts[&TargetSection::DischargeInstructions], 20);
    }

    #[test]
    fn errors() {
        let only_bhc = [report(
            "1",
            TargetSection::BriefHospitalCourse,
            &[(MetricId::Meteor, 1.0)],
        )];
        assert_eq!(
            aggregate(&only_bhc).unwrap_err(),
            AggregateError::EmptyTarget(TargetSection::DischargeInstructions)
        );
        let mismatch = [
            report(
                "1",
                TargetSection::BriefHospitalCourse,
                &[(MetricId::Meteor, 1.0)],
            ),
            report(
                "1",
                TargetSection::DischargeInstructions,
                &[(MetricId::Bleu4, 1.0)],
            ),
        ];
        assert!(matches!(
            aggregate(&mismatch),
            Err(AggregateError::MetricMismatch { .. })
        ));
    }
}
