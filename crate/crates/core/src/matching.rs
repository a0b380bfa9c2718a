//! Mentor recommendation per business model dimension.
//!
//! Every dimension has a primary expertise tag and a secondary one. Market
//! knowledge covers the demand side (proposition, delivery), technology the
//! supply side (creation), finance the capture side.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::common::{Dimension, MentorId, ParseEnumError};
use crate::ontology::BusinessModel;

#[derive(Debug, Error, PartialEq)]
pub enum MatchingError {
    #[error("k must be positive")]
    ZeroK,
    #[error("mentor pool is empty")]
    EmptyPool,
    #[error("mentor `{0}` has no expertise tags")]
    NoTags(MentorId),
    #[error("invalid matching weights: {0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertiseTag {
    Market,
    Technology,
    Finance,
}

impl ExpertiseTag {
    pub const ALL: [ExpertiseTag; 3] = [ExpertiseTag::Market, ExpertiseTag::Technology, ExpertiseTag::Finance];

    pub fn as_str(self) -> &'static str {
        match self {
            ExpertiseTag::Market => "market",
            ExpertiseTag::Technology => "technology",
            ExpertiseTag::Finance => "finance",
        }
    }
}

impl fmt::Display for ExpertiseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExpertiseTag {
    type Err = ParseEnumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "market" => Ok(ExpertiseTag::Market),
            "technology" => Ok(ExpertiseTag::Technology),
            "finance" => Ok(ExpertiseTag::Finance),
            _ => Err(ParseEnumError { kind: "expertise tag", value: s.to_owned() }),
        }
    }
}

/// Primary and secondary expertise tag for a dimension.
pub fn dimension_tags(dimension: Dimension) -> (ExpertiseTag, ExpertiseTag) {
    match dimension {
        Dimension::ValueProposition | Dimension::ValueDelivery => {
            (ExpertiseTag::Market, ExpertiseTag::Technology)
        }
        Dimension::ValueCreation => (ExpertiseTag::Technology, ExpertiseTag::Market),
        Dimension::ValueCapture => (ExpertiseTag::Finance, ExpertiseTag::Market),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentorProfile {
    pub mentor_id: MentorId,
    pub display_name: String,
    pub expertise: BTreeSet<ExpertiseTag>,
    pub industries: BTreeSet<String>,
}

impl MentorProfile {
    pub fn validate(&self) -> Result<(), MatchingError> {
        if self.expertise.is_empty() {
            return Err(MatchingError::NoTags(self.mentor_id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchWeights {
    pub dimension: f64,
    pub industry: f64,
    pub secondary: f64,
}

impl Default for MatchWeights {
    fn default() -> Self {
        Self { dimension: 2.0, industry: 1.0, secondary: 0.5 }
    }
}

impl MatchWeights {
    pub fn validate(&self) -> Result<(), MatchingError> {
        for (name, w) in [("dimension", self.dimension), ("industry", self.industry), ("secondary", self.secondary)] {
            if !w.is_finite() || w < 0.0 {
                return Err(MatchingError::InvalidWeights(format!("{name} weight {w} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

pub fn match_score(
    mentor: &MentorProfile,
    model: &BusinessModel,
    dimension: Dimension,
    weights: &MatchWeights,
) -> f64 {
    let (primary, secondary) = dimension_tags(dimension);
    let mut score = 0.0;
    if mentor.expertise.contains(&primary) {
        score += weights.dimension;
    }
    if mentor.industries.contains(&model.metadata.industry) {
        score += weights.industry;
    }
    if mentor.expertise.contains(&secondary) {
        score += weights.secondary;
    }
    score
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMentor {
    pub mentor_id: MentorId,
    pub score: f64,
    /// Set when the mentor has no relevant expertise or industry at all and
    /// was only included to keep the list non-empty.
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchAssignment {
    pub k: usize,
    pub dimensions: BTreeMap<Dimension, Vec<RankedMentor>>,
}

impl MatchAssignment {
    pub fn for_dimension(&self, dimension: Dimension) -> &[RankedMentor] {
        self.dimensions.get(&dimension).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn rank_order(a: &RankedMentor, b: &RankedMentor) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.mentor_id.cmp(&b.mentor_id))
}

/// Top-`k` mentors for each of the four dimensions, best score first and
/// ties broken by ascending mentor id.
pub fn recommend(
    model: &BusinessModel,
    pool: &[MentorProfile],
    k: usize,
    weights: &MatchWeights,
) -> Result<MatchAssignment, MatchingError> {
    if k == 0 {
        return Err(MatchingError::ZeroK);
    }
    if pool.is_empty() {
        return Err(MatchingError::EmptyPool);
    }
    let mut dimensions = BTreeMap::new();
    for &dimension in Dimension::ALL {
        let mut ranked: Vec<RankedMentor> = pool
            .iter()
            .map(|mentor| {
                let score = match_score(mentor, model, dimension, weights);
                RankedMentor { mentor_id: mentor.mentor_id.clone(), score, low_confidence: score <= 0.0 }
            })
            .collect();
        ranked.sort_by(rank_order);
        ranked.truncate(k);
        dimensions.insert(dimension, ranked);
    }
    Ok(MatchAssignment { k, dimensions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Metadata;

    fn mentor(id: &str, tags: &[ExpertiseTag], industries: &[&str]) -> MentorProfile {
        MentorProfile {
            mentor_id: id.into(),
            display_name: id.to_uppercase(),
            expertise: tags.iter().copied().collect(),
            industries: industries.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn model_in(industry: &str) -> BusinessModel {
        BusinessModel {
            catalog_version: "t".into(),
            choices: BTreeMap::new(),
            metadata: Metadata { team_size: 1, venture_age_months: 1, industry: industry.into() },
            profile: BTreeMap::new(),
        }
    }

    #[test]
    fn finance_mentor_on_value_capture() {
        let m = mentor("f", &[ExpertiseTag::Finance], &["fintech"]);
        let s = match_score(&m, &model_in("fintech"), Dimension::ValueCapture, &MatchWeights::default());
        assert_eq!(s, 3.0);
    }

    #[test]
    fn irrelevant_mentor_scores_zero() {
        let m = mentor("f", &[ExpertiseTag::Finance], &["energy"]);
        let s = match_score(&m, &model_in("fintech"), Dimension::ValueCreation, &MatchWeights::default());
        assert_eq!(s, 0.0);
    }

    #[test]
    fn market_technology_mentor_on_value_delivery() {
        let m = mentor("mt", &[ExpertiseTag::Market, ExpertiseTag::Technology], &["software"]);
        let s = match_score(&m, &model_in("software"), Dimension::ValueDelivery, &MatchWeights::default());
        assert_eq!(s, 2.0 + 1.0 + 0.5);
    }

    #[test]
    fn single_mentor_tops_every_dimension() {
        let pool = vec![mentor("solo", &[ExpertiseTag::Finance], &[])];
        let out = recommend(&model_in("software"), &pool, 3, &MatchWeights::default()).unwrap();
        for d in Dimension::ALL {
            let list = out.for_dimension(*d);
            assert_eq!(list.len(), 1);
            assert_eq!(list[0].mentor_id.as_str(), "solo");
        }
        // no finance dimension overlap outside value capture: last-resort entries
        assert!(out.for_dimension(Dimension::ValueCreation)[0].low_confidence);
        assert!(!out.for_dimension(Dimension::ValueCapture)[0].low_confidence);
    }

    #[test]
    fn ties_go_to_smaller_mentor_id() {
        let pool = vec![
            mentor("zed", &[ExpertiseTag::Market], &["software"]),
            mentor("amy", &[ExpertiseTag::Market], &["software"]),
        ];
        let out = recommend(&model_in("software"), &pool, 2, &MatchWeights::default()).unwrap();
        let ids: Vec<_> = out.for_dimension(Dimension::ValueProposition).iter().map(|r| r.mentor_id.as_str()).collect();
        assert_eq!(ids, ["amy", "zed"]);
    }

    #[test]
    fn zero_k_and_empty_pool_are_errors() {
        let pool = vec![mentor("a", &[ExpertiseTag::Market], &[])];
        assert_eq!(recommend(&model_in("x"), &pool, 0, &MatchWeights::default()), Err(MatchingError::ZeroK));
        assert_eq!(recommend(&model_in("x"), &[], 1, &MatchWeights::default()), Err(MatchingError::EmptyPool));
    }

    #[test]
    fn tags_parse_case_insensitively() {
        assert_eq!(" Finance ".parse::<ExpertiseTag>().unwrap(), ExpertiseTag::Finance);
        assert!("legal".parse::<ExpertiseTag>().is_err());
        assert!(mentor("x", &[], &[]).validate().is_err());
    }
}
