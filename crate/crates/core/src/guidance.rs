//! Guidance report assembly.
//!
//! A report has an informative half (crowd scores and milestone
//! probabilities) and a suggestive half (mentor comments and what-if
//! interventions), plus provenance and, for revised models, the deltas
//! against the report of the parent version.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::common::{Dimension, MentorId, Milestone, Timestamp, VersionRef};
use crate::feedback::{AggregatedAssessment, AssessmentDimension, CriteriaCatalog, Judgment};
use crate::learning::{MilestonePrediction, WhatIfSuggestion};
use crate::ontology::{diff, BusinessModelVersion, ChoiceChange, PatternCatalog};

#[derive(Debug, Error, PartialEq)]
pub enum GuidanceError {
    #[error("a report needs at least one milestone prediction")]
    NoPredictions,
    #[error("assessment is for {found}, report is for {expected}")]
    AssessmentMismatch { expected: VersionRef, found: VersionRef },
    #[error("parent report is for {found}, expected version {expected}")]
    ParentMismatch { expected: u32, found: VersionRef },
}

/// Label shown for an assessment dimension. Implementability is presented
/// as "feasibility".
pub fn dimension_label(dim: AssessmentDimension) -> &'static str {
    match dim {
        AssessmentDimension::Desirability => "desirability",
        AssessmentDimension::Implementability => "feasibility",
        AssessmentDimension::Scalability => "scalability",
        AssessmentDimension::Profitability => "profitability",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionScore {
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionView {
    pub criterion_id: String,
    pub display_name: String,
    pub assessment_dimension: AssessmentDimension,
    pub aggregate: f64,
    pub dispersion: f64,
    pub n: usize,
    pub contested: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrowdStatus {
    Available,
    AwaitingFeedback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Informative {
    pub crowd_status: CrowdStatus,
    /// Empty when no mentor has judged the version.
    pub dimension_scores: BTreeMap<AssessmentDimension, DimensionScore>,
    pub criteria: Vec<CriterionView>,
    pub contested: Vec<String>,
    pub predictions: Vec<MilestonePrediction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentorComment {
    pub mentor_id: MentorId,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestive {
    pub comments: BTreeMap<Dimension, Vec<MentorComment>>,
    pub interventions: Vec<WhatIfSuggestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub judge_count: usize,
    pub model_set_id: String,
    pub generated_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityDelta {
    pub milestone: Milestone,
    pub p_hybrid: f64,
    pub p_machine: Option<f64>,
    pub p_crowd: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub scores: BTreeMap<AssessmentDimension, f64>,
    pub probabilities: Vec<ProbabilityDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub parent_version: u32,
    pub changes: Vec<ChoiceChange>,
    /// `None` when no report was issued for the parent version.
    pub deltas: Option<Deltas>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceReport {
    pub version_ref: VersionRef,
    pub informative: Informative,
    pub suggestive: Suggestive,
    pub provenance: Provenance,
    pub history: Option<History>,
}

impl GuidanceReport {
    pub fn prediction(&self, milestone: Milestone) -> Option<&MilestonePrediction> {
        self.informative.predictions.iter().find(|p| p.milestone == milestone)
    }
}

/// Field-wise `current - previous` for scores and probabilities present in
/// both reports.
pub fn deltas(current: &GuidanceReport, previous: &GuidanceReport) -> Deltas {
    let scores = current
        .informative
        .dimension_scores
        .iter()
        .filter_map(|(dim, now)| {
            let before = previous.informative.dimension_scores.get(dim)?;
            Some((*dim, now.score - before.score))
        })
        .collect();
    let probabilities = current
        .informative
        .predictions
        .iter()
        .filter_map(|now| {
            let before = previous.prediction(now.milestone)?;
            let sub = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
            Some(ProbabilityDelta {
                milestone: now.milestone,
                p_hybrid: now.p_hybrid - before.p_hybrid,
                p_machine: sub(now.p_machine, before.p_machine),
                p_crowd: sub(now.p_crowd, before.p_crowd),
            })
        })
        .collect();
    Deltas { scores, probabilities }
}

/// Everything a report is assembled from.
#[derive(Debug, Clone)]
pub struct ReportInputs<'a> {
    pub version: &'a BusinessModelVersion,
    pub assessment: Option<&'a AggregatedAssessment>,
    pub predictions: &'a [MilestonePrediction],
    pub judgments: &'a [Judgment],
    pub whatif: &'a [WhatIfSuggestion],
    pub parent_version: Option<&'a BusinessModelVersion>,
    pub parent_report: Option<&'a GuidanceReport>,
    pub model_set_id: &'a str,
    pub generated_at: Timestamp,
}

pub fn build_report(
    inputs: &ReportInputs<'_>,
    patterns: &PatternCatalog,
    criteria: &CriteriaCatalog,
) -> Result<GuidanceReport, GuidanceError> {
    if inputs.predictions.is_empty() {
        return Err(GuidanceError::NoPredictions);
    }
    let version_ref = VersionRef::new(inputs.version.venture_id.clone(), inputs.version.version);
    let assessment = inputs.assessment.filter(|a| a.judge_count > 0);
    if let Some(a) = assessment {
        if a.version_ref != version_ref {
            return Err(GuidanceError::AssessmentMismatch { expected: version_ref, found: a.version_ref.clone() });
        }
    }

    let dimension_scores = assessment
        .map(|a| {
            a.dimensions
                .iter()
                .map(|(dim, score)| (*dim, DimensionScore { label: dimension_label(*dim).to_owned(), score: *score }))
                .collect()
        })
        .unwrap_or_default();
    let criteria_views = assessment
        .map(|a| {
            criteria
                .criteria
                .iter()
                .filter_map(|def| {
                    let agg = a.criteria.get(&def.criterion_id)?;
                    Some(CriterionView {
                        criterion_id: def.criterion_id.clone(),
                        display_name: def.display_name.clone(),
                        assessment_dimension: def.assessment_dimension,
                        aggregate: agg.aggregate,
                        dispersion: agg.dispersion,
                        n: agg.n,
                        contested: a.contested.contains(&def.criterion_id),
                    })
                })
                .collect()
        })
        .unwrap_or_default();

    let mut comments: BTreeMap<Dimension, Vec<MentorComment>> = BTreeMap::new();
    let mut judgments: Vec<&Judgment> = inputs.judgments.iter().filter(|j| j.version_ref == version_ref).collect();
    judgments.sort_by(|a, b| a.mentor_id.cmp(&b.mentor_id));
    for judgment in &judgments {
        for (dim, text) in &judgment.comments {
            if !text.trim().is_empty() {
                comments
                    .entry(*dim)
                    .or_default()
                    .push(MentorComment { mentor_id: judgment.mentor_id.clone(), text: text.clone() });
            }
        }
    }

    let mut predictions = inputs.predictions.to_vec();
    predictions.sort_by_key(|p| p.milestone);

    let mut report = GuidanceReport {
        version_ref,
        informative: Informative {
            crowd_status: if assessment.is_some() { CrowdStatus::Available } else { CrowdStatus::AwaitingFeedback },
            dimension_scores,
            criteria: criteria_views,
            contested: assessment.map(|a| a.contested.clone()).unwrap_or_default(),
            predictions,
        },
        suggestive: Suggestive { comments, interventions: inputs.whatif.to_vec() },
        provenance: Provenance {
            judge_count: assessment.map_or(0, |a| a.judge_count),
            model_set_id: inputs.model_set_id.to_owned(),
            generated_at: inputs.generated_at,
        },
        history: None,
    };

    if let Some(parent) = inputs.version.parent {
        if let Some(pr) = inputs.parent_report {
            if pr.version_ref.version != parent || pr.version_ref.venture_id != report.version_ref.venture_id {
                return Err(GuidanceError::ParentMismatch { expected: parent, found: pr.version_ref.clone() });
            }
        }
        let changes = inputs
            .parent_version
            .and_then(|pv| diff(pv, inputs.version, patterns).ok())
            .unwrap_or_default();
        report.history = Some(History {
            parent_version: parent,
            changes,
            deltas: inputs.parent_report.map(|pr| deltas(&report, pr)),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{aggregate, tests::uniform_judgment, AggregationConfig};
    use crate::learning::Basis;
    use crate::ontology::{BusinessModel, Metadata};

    fn version(number: u32) -> BusinessModelVersion {
        let catalog = PatternCatalog::default_catalog();
        BusinessModelVersion {
            venture_id: "acme".into(),
            version: number,
            parent: number.checked_sub(1).filter(|p| *p > 0),
            created_at: Timestamp(10),
            model: BusinessModel {
                catalog_version: catalog.catalog_version.clone(),
                choices: catalog.elements.iter().map(|e| (e.element_id.clone(), e.choices[number as usize % 2].clone())).collect(),
                metadata: Metadata { team_size: 2, venture_age_months: 3, industry: "software".into() },
                profile: BTreeMap::new(),
            },
        }
    }

    fn prediction(milestone: Milestone, p: f64) -> MilestonePrediction {
        MilestonePrediction { milestone, p_hybrid: p, p_machine: Some(p), p_crowd: None, basis: Basis::MachineOnly }
    }

    fn build(
        v: &BusinessModelVersion,
        preds: &[MilestonePrediction],
        assessment: Option<&AggregatedAssessment>,
        parent: Option<(&BusinessModelVersion, &GuidanceReport)>,
    ) -> Result<GuidanceReport, GuidanceError> {
        build_report(
            &ReportInputs {
                version: v,
                assessment,
                predictions: preds,
                judgments: &[],
                whatif: &[],
                parent_version: parent.map(|p| p.0),
                parent_report: parent.map(|p| p.1),
                model_set_id: "ms",
                generated_at: Timestamp(99),
            },
            &PatternCatalog::default_catalog(),
            &CriteriaCatalog::default_catalog(),
        )
    }

    #[test]
    fn cold_start_is_machine_only() {
        let v1 = version(1);
        let r = build(&v1, &[prediction(Milestone::Survival, 0.3)], None, None).unwrap();
        assert_eq!(r.informative.crowd_status, CrowdStatus::AwaitingFeedback);
        assert!(r.informative.dimension_scores.is_empty());
        assert!(r.suggestive.comments.is_empty());
        assert_eq!(r.informative.predictions[0].basis, Basis::MachineOnly);
        assert_eq!(r.provenance.judge_count, 0);
        assert!(r.history.is_none());
        let text = crate::canonical::to_string(&r).unwrap();
        assert!(text.contains("\"basis\":\"machine-only\""));
    }

    #[test]
    fn no_predictions_is_an_error() {
        assert_eq!(build(&version(1), &[], None, None), Err(GuidanceError::NoPredictions));
    }

    #[test]
    fn history_delta_against_parent() {
        let v1 = version(1);
        let v2 = version(2);
        let r1 = build(&v1, &[prediction(Milestone::SeriesA, 0.40)], None, None).unwrap();
        let r2 = build(&v2, &[prediction(Milestone::SeriesA, 0.55)], None, Some((&v1, &r1))).unwrap();
        let history = r2.history.as_ref().unwrap();
        assert_eq!(history.parent_version, 1);
        assert_eq!(history.changes.len(), 9);
        let d = &history.deltas.as_ref().unwrap().probabilities[0];
        assert!((d.p_hybrid - 0.15).abs() < 1e-12);
    }

    #[test]
    fn history_present_even_without_parent_report() {
        let v2 = version(2);
        let r = build(&v2, &[prediction(Milestone::SeriesA, 0.5)], None, None).unwrap();
        assert!(r.history.as_ref().unwrap().deltas.is_none());
    }

    #[test]
    fn deltas_are_antisymmetric() {
        let criteria = CriteriaCatalog::default_catalog();
        let (v1, v2) = (version(1), version(2));
        let r1_ref = VersionRef::new("acme".into(), 1);
        let r2_ref = VersionRef::new("acme".into(), 2);
        let a1 = aggregate(&r1_ref, &[uniform_judgment(&criteria, &r1_ref, "m", 4)], &criteria, &AggregationConfig::default()).unwrap();
        let a2 = aggregate(&r2_ref, &[uniform_judgment(&criteria, &r2_ref, "m", 7)], &criteria, &AggregationConfig::default()).unwrap();
        let r1 = build(&v1, &[prediction(Milestone::Survival, 0.2), prediction(Milestone::SeriesA, 0.6)], Some(&a1), None).unwrap();
        let r2 = build(&v2, &[prediction(Milestone::Survival, 0.7), prediction(Milestone::SeriesA, 0.3)], Some(&a2), None).unwrap();
        let fwd = deltas(&r2, &r1);
        let back = deltas(&r1, &r2);
        assert_eq!(fwd.scores.len(), 4);
        for (dim, d) in &fwd.scores {
            assert_eq!(*d, -back.scores[dim]);
        }
        for (f, b) in fwd.probabilities.iter().zip(&back.probabilities) {
            assert_eq!(f.p_hybrid, -b.p_hybrid);
            assert_eq!(f.p_machine.unwrap(), -b.p_machine.unwrap());
        }
    }

    #[test]
    fn implementability_is_labelled_feasibility() {
        let criteria = CriteriaCatalog::default_catalog();
        let vref = VersionRef::new("acme".into(), 1);
        let a = aggregate(&vref, &[uniform_judgment(&criteria, &vref, "m", 4)], &criteria, &AggregationConfig::default()).unwrap();
        let r = build(&version(1), &[prediction(Milestone::Survival, 0.2)], Some(&a), None).unwrap();
        assert_eq!(r.informative.dimension_scores[&AssessmentDimension::Implementability].label, "feasibility");
        assert_eq!(r.informative.criteria.len(), 21);
    }

    #[test]
    fn building_twice_is_byte_identical() {
        let v1 = version(1);
        let preds = [prediction(Milestone::Survival, 0.3), prediction(Milestone::SeriesA, 0.1)];
        let a = crate::canonical::to_string(&build(&v1, &preds, None, None).unwrap()).unwrap();
        let b = crate::canonical::to_string(&build(&v1, &preds, None, None).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
