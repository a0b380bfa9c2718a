//! Mentor judgments and crowd aggregation.
//!
//! Each judgment rates all 21 criteria on a 1..=10 scale and may carry free
//! text per value dimension. [`aggregate`] condenses a version's judgments
//! into a per-criterion robust mean plus dispersion, and flags criteria the
//! judges disagree on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::common::{Dimension, MentorId, Timestamp, VersionRef};

const DEFAULT_CRITERIA: &str = include_str!("../data/criteria_catalog.json");

pub const RATING_MIN: i32 = 1;
pub const RATING_MAX: i32 = 10;
pub const DEFAULT_CONTESTED_THRESHOLD: f64 = 2.5;

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("invalid criteria catalog: {0}")]
    InvalidCatalog(String),
    #[error("judgment `{judgment}` references {found}, expected {expected}")]
    MixedVersions { judgment: String, expected: VersionRef, found: VersionRef },
    #[error("judgment failed validation ({} problems)", .0.len())]
    Invalid(Vec<JudgmentError>),
    #[error("reading criteria catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing criteria catalog: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "snake_case")]
pub enum JudgmentError {
    OutOfRange { criterion: String, rating: i32 },
    MissingCriterion { criterion: String },
    UnknownCriterion { criterion: String },
}

impl JudgmentError {
    pub fn code(&self) -> &'static str {
        match self {
            JudgmentError::OutOfRange { .. } => "rating_out_of_range",
            JudgmentError::MissingCriterion { .. } => "missing_criterion",
            JudgmentError::UnknownCriterion { .. } => "unknown_criterion",
        }
    }

    pub fn criterion(&self) -> &str {
        match self {
            JudgmentError::OutOfRange { criterion, .. }
            | JudgmentError::MissingCriterion { criterion }
            | JudgmentError::UnknownCriterion { criterion } => criterion,
        }
    }

    pub fn message(&self) -> String {
        match self {
            JudgmentError::OutOfRange { criterion, rating } => {
                format!("rating {rating} for `{criterion}` is outside {RATING_MIN}..={RATING_MAX}")
            }
            JudgmentError::MissingCriterion { criterion } => format!("no rating for `{criterion}`"),
            JudgmentError::UnknownCriterion { criterion } => format!("`{criterion}` is not a criterion"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentDimension {
    Desirability,
    Implementability,
    Scalability,
    Profitability,
}

impl AssessmentDimension {
    pub const ALL: [AssessmentDimension; 4] = [
        AssessmentDimension::Desirability,
        AssessmentDimension::Implementability,
        AssessmentDimension::Scalability,
        AssessmentDimension::Profitability,
    ];

    /// Criteria count each dimension must have in a catalog.
    pub fn expected_count(self) -> usize {
        match self {
            AssessmentDimension::Desirability => 6,
            _ => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AssessmentDimension::Desirability => "desirability",
            AssessmentDimension::Implementability => "implementability",
            AssessmentDimension::Scalability => "scalability",
            AssessmentDimension::Profitability => "profitability",
        }
    }
}

impl fmt::Display for AssessmentDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionDef {
    pub criterion_id: String,
    pub assessment_dimension: AssessmentDimension,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriteriaCatalog {
    pub catalog_version: String,
    pub criteria: Vec<CriterionDef>,
}

impl CriteriaCatalog {
    pub const SIZE: usize = 21;

    pub fn default_catalog() -> Self {
        Self::from_json(DEFAULT_CRITERIA).expect("bundled criteria catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, FeedbackError> {
        let catalog: CriteriaCatalog = canonical::from_str(text)?;
        catalog.check()?;
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, FeedbackError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<(), FeedbackError> {
        if self.criteria.len() != Self::SIZE {
            return Err(FeedbackError::InvalidCatalog(format!(
                "expected {} criteria, found {}",
                Self::SIZE,
                self.criteria.len()
            )));
        }
        let ids: BTreeSet<_> = self.criteria.iter().map(|c| c.criterion_id.as_str()).collect();
        if ids.len() != self.criteria.len() {
            return Err(FeedbackError::InvalidCatalog("duplicate criterion id".into()));
        }
        for dim in AssessmentDimension::ALL {
            let n = self.in_dimension(dim).count();
            if n != dim.expected_count() {
                return Err(FeedbackError::InvalidCatalog(format!(
                    "{dim} has {n} criteria, expected {}",
                    dim.expected_count()
                )));
            }
        }
        Ok(())
    }

    pub fn in_dimension(&self, dim: AssessmentDimension) -> impl Iterator<Item = &CriterionDef> {
        self.criteria.iter().filter(move |c| c.assessment_dimension == dim)
    }

    pub fn contains(&self, criterion_id: &str) -> bool {
        self.criteria.iter().any(|c| c.criterion_id == criterion_id)
    }

    /// Names of the crowd-model features: each criterion aggregate in
    /// catalog order, then the four dimension means.
    pub fn crowd_feature_names(&self) -> Vec<String> {
        self.criteria
            .iter()
            .map(|c| c.criterion_id.clone())
            .chain(AssessmentDimension::ALL.iter().map(|d| format!("mean_{d}")))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub judgment_id: String,
    pub version_ref: VersionRef,
    pub mentor_id: MentorId,
    pub ratings: BTreeMap<String, i32>,
    #[serde(default)]
    pub comments: BTreeMap<Dimension, String>,
    /// Dimension the mentor was matched for, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_dimension: Option<Dimension>,
    pub submitted_at: Timestamp,
}

/// Checks a judgment against the catalog, reporting every problem.
pub fn validate_judgment(judgment: &Judgment, catalog: &CriteriaCatalog) -> Result<(), Vec<JudgmentError>> {
    let mut errors = Vec::new();
    for def in &catalog.criteria {
        match judgment.ratings.get(&def.criterion_id) {
            None => errors.push(JudgmentError::MissingCriterion { criterion: def.criterion_id.clone() }),
            Some(&r) if !(RATING_MIN..=RATING_MAX).contains(&r) => errors.push(JudgmentError::OutOfRange {
                criterion: def.criterion_id.clone(),
                rating: r,
            }),
            Some(_) => {}
        }
    }
    for id in judgment.ratings.keys() {
        if !catalog.contains(id) {
            errors.push(JudgmentError::UnknownCriterion { criterion: id.clone() });
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    /// Use the trimmed mean once five or more judges rated a criterion.
    pub trim: bool,
    pub contested_threshold: f64,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self { trim: true, contested_threshold: DEFAULT_CONTESTED_THRESHOLD }
    }
}

impl AggregationConfig {
    pub fn untrimmed() -> Self {
        Self { trim: false, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionAggregate {
    pub aggregate: f64,
    pub dispersion: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedAssessment {
    pub version_ref: VersionRef,
    pub judge_count: usize,
    pub contested_threshold: f64,
    pub criteria: BTreeMap<String, CriterionAggregate>,
    pub dimensions: BTreeMap<AssessmentDimension, f64>,
    /// Criteria whose dispersion exceeds the threshold, most disputed first.
    pub contested: Vec<String>,
}

impl AggregatedAssessment {
    /// The 25 crowd features in catalog order, or `None` when a criterion
    /// has no aggregate.
    pub fn crowd_features(&self, catalog: &CriteriaCatalog) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(catalog.criteria.len() + AssessmentDimension::ALL.len());
        for def in &catalog.criteria {
            out.push(self.criteria.get(&def.criterion_id)?.aggregate);
        }
        for dim in AssessmentDimension::ALL {
            out.push(*self.dimensions.get(&dim)?);
        }
        Some(out)
    }
}

/// Number of ratings dropped from each end before averaging.
pub fn trim_count(n: usize) -> usize {
    if n >= 5 {
        (n / 10).max(1)
    } else {
        0
    }
}

/// Trimmed (n >= 5) or plain mean of `values`; `None` when empty.
pub fn robust_mean(values: &[f64], trim: bool) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let t = if trim { trim_count(sorted.len()) } else { 0 };
    let kept = &sorted[t..sorted.len() - t];
    Some(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n <= 1 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

pub fn aggregate(
    version_ref: &VersionRef,
    judgments: &[Judgment],
    catalog: &CriteriaCatalog,
    config: &AggregationConfig,
) -> Result<AggregatedAssessment, FeedbackError> {
    for j in judgments {
        if j.version_ref != *version_ref {
            return Err(FeedbackError::MixedVersions {
                judgment: j.judgment_id.clone(),
                expected: version_ref.clone(),
                found: j.version_ref.clone(),
            });
        }
    }

    let mut criteria = BTreeMap::new();
    for def in &catalog.criteria {
        // sorted so the float sums do not depend on submission order
        let mut ratings: Vec<f64> = judgments
            .iter()
            .filter_map(|j| j.ratings.get(&def.criterion_id))
            .map(|&r| f64::from(r))
            .collect();
        ratings.sort_by(f64::total_cmp);
        if let Some(mean) = robust_mean(&ratings, config.trim) {
            criteria.insert(
                def.criterion_id.clone(),
                CriterionAggregate { aggregate: mean, dispersion: sample_std(&ratings), n: ratings.len() },
            );
        }
    }

    let mut dimensions = BTreeMap::new();
    for dim in AssessmentDimension::ALL {
        let values: Vec<f64> = catalog
            .in_dimension(dim)
            .filter_map(|c| criteria.get(&c.criterion_id))
            .map(|a: &CriterionAggregate| a.aggregate)
            .collect();
        if !values.is_empty() {
            dimensions.insert(dim, values.iter().sum::<f64>() / values.len() as f64);
        }
    }

    let mut assessment = AggregatedAssessment {
        version_ref: version_ref.clone(),
        judge_count: judgments.len(),
        contested_threshold: config.contested_threshold,
        criteria,
        dimensions,
        contested: Vec::new(),
    };
    assessment.contested = contested_criteria(&assessment);
    Ok(assessment)
}

/// Criteria with dispersion above the assessment's threshold, sorted by
/// dispersion descending (ties by criterion id).
pub fn contested_criteria(assessment: &AggregatedAssessment) -> Vec<String> {
    let mut flagged: Vec<(&String, f64)> = assessment
        .criteria
        .iter()
        .filter(|(_, a)| a.dispersion > assessment.contested_threshold)
        .map(|(id, a)| (id, a.dispersion))
        .collect();
    flagged.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    flagged.into_iter().map(|(id, _)| id.clone()).collect()
}
