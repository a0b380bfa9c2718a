//! Synthetic worlds with known ground truth.
//!
//! Each venture gets a "hard" score determined by its business model
//! configuration (visible to the machine model through the encoding) and a
//! "soft" score the configuration does not reveal but mentors perceive. The
//! chance of reaching a milestone is `logistic(a·hard + b·soft)`; each judge
//! rates every criterion as `clamp(round(5.5 + 1.5·soft + noise), 1, 10)`.

use std::collections::BTreeMap;
use std::ops::Range;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::common::{Dimension, MentorId, Milestone, SignalSource, Timestamp, VentureId, VersionRef};
use crate::feedback::{aggregate, AggregationConfig, CriteriaCatalog, Judgment, RATING_MAX, RATING_MIN};
use crate::learning::{hybrid_predict, train_all, CartParams, LearningError, ModelSet};
use crate::matching::{ExpertiseTag, MentorProfile};
use crate::ontology::{BusinessModel, BusinessModelVersion, Metadata, PatternCatalog};
use crate::repository::{Catalogs, Event, EventBody, OutcomeRecord, RepoError, Repository, VentureRegistration};

/// Rating centre on the 1..=10 scale.
pub const RATING_BASELINE: f64 = 5.5;
/// How strongly the soft score moves ratings.
pub const RATING_SLOPE: f64 = 1.5;

const EPOCH: u64 = 1_700_000_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid world parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Repo(#[from] RepoError),
    #[error(transparent)]
    Learning(#[from] LearningError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldParams {
    pub seed: u64,
    pub n_ventures: usize,
    pub n_mentors: usize,
    pub hard_weight: f64,
    pub soft_weight: f64,
    pub judge_noise: f64,
    pub judges_per_venture: usize,
}

impl Default for WorldParams {
    fn default() -> Self {
        Self {
            seed: 7,
            n_ventures: 200,
            n_mentors: 30,
            hard_weight: 1.0,
            soft_weight: 1.0,
            judge_noise: 1.5,
            judges_per_venture: 5,
        }
    }
}

impl WorldParams {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, v) in [("hard_weight", self.hard_weight), ("soft_weight", self.soft_weight), ("judge_noise", self.judge_noise)] {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::InvalidParams(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        if self.judges_per_venture > 0 && self.n_mentors == 0 {
            return Err(SimError::InvalidParams("judges need a non-empty mentor pool".into()));
        }
        Ok(())
    }
}

/// Coefficients drawn once per world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenTruth {
    /// Per element, one coefficient per choice in catalog order.
    pub coefficients: BTreeMap<String, Vec<f64>>,
    /// Mean and standard deviation of the raw hard score under uniform
    /// choices; used to standardise it.
    pub hard_mean: f64,
    pub hard_std: f64,
}

impl HiddenTruth {
    pub fn hard_score(&self, model: &BusinessModel, catalog: &PatternCatalog) -> f64 {
        let raw: f64 = catalog
            .elements
            .iter()
            .filter_map(|e| {
                let idx = e.choices.iter().position(|c| Some(c.as_str()) == model.choice(&e.element_id))?;
                Some(self.coefficients[&e.element_id][idx])
            })
            .sum();
        if self.hard_std > 0.0 {
            (raw - self.hard_mean) / self.hard_std
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimVenture {
    pub version: BusinessModelVersion,
    pub hard_score: f64,
    pub soft_score: f64,
    /// True success probability.
    pub p_success: f64,
    pub outcomes: BTreeMap<Milestone, bool>,
    pub judgments: Vec<Judgment>,
}

impl SimVenture {
    pub fn venture_id(&self) -> &VentureId {
        &self.version.venture_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub params: WorldParams,
    pub truth: HiddenTruth,
    pub mentors: Vec<MentorProfile>,
    pub ventures: Vec<SimVenture>,
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn draw_truth(rng: &mut ChaCha8Rng, catalog: &PatternCatalog) -> HiddenTruth {
    let mut coefficients = BTreeMap::new();
    let mut mean = 0.0;
    let mut var = 0.0;
    for element in &catalog.elements {
        let coefs: Vec<f64> = (0..element.choices.len()).map(|_| StandardNormal.sample(rng)).collect();
        let m = coefs.iter().sum::<f64>() / coefs.len() as f64;
        var += coefs.iter().map(|c| (c - m).powi(2)).sum::<f64>() / coefs.len() as f64;
        mean += m;
        coefficients.insert(element.element_id.clone(), coefs);
    }
    HiddenTruth { coefficients, hard_mean: mean, hard_std: var.sqrt() }
}

fn draw_mentor(rng: &mut ChaCha8Rng, index: usize, catalog: &PatternCatalog) -> MentorProfile {
    let mut expertise = std::collections::BTreeSet::new();
    while expertise.is_empty() {
        for tag in ExpertiseTag::ALL {
            if rng.random_bool(0.4) {
                expertise.insert(tag);
            }
        }
    }
    let n_industries = rng.random_range(1..=2);
    let industries = sample(rng, catalog.industries.len(), n_industries.min(catalog.industries.len()))
        .into_iter()
        .map(|i| catalog.industries[i].clone())
        .collect();
    MentorProfile {
        mentor_id: MentorId(format!("mentor-{index:03}")),
        display_name: format!("Mentor {index}"),
        expertise,
        industries,
    }
}

/// Simulated rating for one criterion.
pub fn judge_rating(soft: f64, noise: f64) -> i32 {
    let raw = (RATING_BASELINE + RATING_SLOPE * soft + noise).round();
    raw.clamp(f64::from(RATING_MIN), f64::from(RATING_MAX)) as i32
}

/// Generates a world; the same parameters always produce the same world.
pub fn generate_world(
    params: &WorldParams,
    patterns: &PatternCatalog,
    criteria: &CriteriaCatalog,
) -> Result<World, SimError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let truth = draw_truth(&mut rng, patterns);
    let mentors: Vec<MentorProfile> = (0..params.n_mentors).map(|i| draw_mentor(&mut rng, i, patterns)).collect();
    let noise = Normal::new(0.0, params.judge_noise).expect("validated noise");

    let mut ventures = Vec::with_capacity(params.n_ventures);
    for i in 0..params.n_ventures {
        let venture_id = VentureId(format!("sim-{i:05}"));
        let choices = patterns
            .elements
            .iter()
            .map(|e| (e.element_id.clone(), e.choices[rng.random_range(0..e.choices.len())].clone()))
            .collect();
        let industry = if patterns.industries.is_empty() {
            String::new()
        } else {
            patterns.industries[rng.random_range(0..patterns.industries.len())].clone()
        };
        let model = BusinessModel {
            catalog_version: patterns.catalog_version.clone(),
            choices,
            metadata: Metadata {
                team_size: rng.random_range(1..=12),
                venture_age_months: rng.random_range(0..=60),
                industry,
            },
            profile: BTreeMap::from([(Dimension::ValueProposition, format!("Synthetic venture {i}"))]),
        };
        let hard = truth.hard_score(&model, patterns);
        let soft: f64 = StandardNormal.sample(&mut rng);
        let p_success = logistic(params.hard_weight * hard + params.soft_weight * soft);
        let outcomes = Milestone::ALL.iter().map(|&m| (m, rng.random_bool(p_success))).collect();

        let created_at = Timestamp(EPOCH + i as u64);
        let version_ref = VersionRef::new(venture_id.clone(), 1);
        let k = params.judges_per_venture.min(mentors.len());
        let mut judges: Vec<usize> = sample(&mut rng, mentors.len(), k).into_vec();
        judges.sort_unstable();
        let judgments = judges
            .into_iter()
            .map(|m| {
                let ratings = criteria
                    .criteria
                    .iter()
                    .map(|c| (c.criterion_id.clone(), judge_rating(soft, noise.sample(&mut rng))))
                    .collect();
                let mentor_id = mentors[m].mentor_id.clone();
                Judgment {
                    judgment_id: format!("{venture_id}-v1-{mentor_id}"),
                    version_ref: version_ref.clone(),
                    mentor_id,
                    ratings,
                    comments: BTreeMap::new(),
                    matched_dimension: None,
                    submitted_at: created_at,
                }
            })
            .collect();

        ventures.push(SimVenture {
            version: BusinessModelVersion { venture_id, version: 1, parent: None, created_at, model },
            hard_score: hard,
            soft_score: soft,
            p_success,
            outcomes,
            judgments,
        });
    }
    Ok(World { params: *params, truth, mentors, ventures })
}

impl World {
    /// Event log for the world. Only ventures with index in `labeled` get
    /// their outcomes recorded; the rest stay unlabeled for evaluation.
    pub fn to_events(&self, labeled: Range<usize>) -> Vec<Event> {
        let mut bodies = Vec::new();
        for mentor in &self.mentors {
            bodies.push((Timestamp(EPOCH), EventBody::MentorRegistered(mentor.clone())));
        }
        for (i, venture) in self.ventures.iter().enumerate() {
            let at = venture.version.created_at;
            bodies.push((
                at,
                EventBody::VentureRegistered(VentureRegistration {
                    venture_id: venture.venture_id().clone(),
                    name: format!("Synthetic venture {i}"),
                }),
            ));
            bodies.push((at, EventBody::VersionCreated(venture.version.clone())));
            for j in &venture.judgments {
                bodies.push((at, EventBody::JudgmentSubmitted(j.clone())));
            }
            if labeled.contains(&i) {
                for (&milestone, &achieved) in &venture.outcomes {
                    bodies.push((
                        at,
                        EventBody::OutcomeRecorded(OutcomeRecord {
                            venture_id: venture.venture_id().clone(),
                            version: 1,
                            milestone,
                            achieved,
                            observed_at: at,
                            horizon_months: None,
                        }),
                    ));
                }
            }
        }
        bodies
            .into_iter()
            .enumerate()
            .map(|(i, (recorded_at, body))| Event {
                seq: i as u64 + 1,
                recorded_at,
                actor: Some("simkit".into()),
                body,
            })
            .collect()
    }
}

/// Area under the ROC curve via the rank-sum statistic with mid-ranks for
/// ties. `None` when only one class is present.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len(), "scores and labels differ in length");
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k]).count() as f64 * mid_rank;
        i = j + 1;
    }
    let p = positives as f64;
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * negatives as f64))
}

pub fn brier(probabilities: &[f64], labels: &[bool]) -> Option<f64> {
    if probabilities.is_empty() {
        return None;
    }
    let total: f64 = probabilities
        .iter()
        .zip(labels)
        .map(|(p, &y)| (p - if y { 1.0 } else { 0.0 }).powi(2))
        .sum();
    Some(total / probabilities.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalMetrics {
    /// Held-out ventures this signal produced a prediction for.
    pub n: usize,
    pub auc: Option<f64>,
    pub brier: Option<f64>,
}

impl SignalMetrics {
    fn from_pairs(pairs: &[(f64, bool)]) -> Self {
        let (p, y): (Vec<f64>, Vec<bool>) = pairs.iter().copied().unzip();
        Self { n: p.len(), auc: auc(&p, &y), brier: brier(&p, &y) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestoneEvaluation {
    pub milestone: Milestone,
    pub positives: usize,
    pub machine: SignalMetrics,
    pub crowd: SignalMetrics,
    pub hybrid: SignalMetrics,
    /// The world's true success probability used as a predictor.
    pub truth: SignalMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub held_out: usize,
    pub milestones: Vec<MilestoneEvaluation>,
}

impl Evaluation {
    pub fn milestone(&self, milestone: Milestone) -> Option<&MilestoneEvaluation> {
        self.milestones.iter().find(|m| m.milestone == milestone)
    }
}

/// Scores `set` on the held-out ventures of `world`.
pub fn evaluate_guidance(
    world: &World,
    set: &ModelSet,
    held_out: Range<usize>,
    catalogs: &Catalogs,
    aggregation: &AggregationConfig,
) -> Result<Evaluation, SimError> {
    let held: Vec<&SimVenture> = world.ventures[held_out].iter().collect();
    let assessments = held
        .iter()
        .map(|v| {
            let vref = VersionRef::new(v.venture_id().clone(), 1);
            aggregate(&vref, &v.judgments, &catalogs.criteria, aggregation)
                .map_err(|e| SimError::InvalidParams(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut milestones = Vec::new();
    for &milestone in Milestone::ALL {
        let (mut machine, mut crowd, mut hybrid, mut truth) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let crowd_tree = set.model(SignalSource::Crowd, milestone);
        for (venture, assessment) in held.iter().zip(&assessments) {
            let label = venture.outcomes[&milestone];
            truth.push((venture.p_success, label));
            if let Some(tree) = crowd_tree {
                if assessment.judge_count >= set.k_min.max(1) {
                    if let Some(features) = assessment.crowd_features(&catalogs.criteria) {
                        crowd.push((tree.predict(&features)?, label));
                    }
                }
            }
            if set.model(SignalSource::Machine, milestone).is_none() {
                continue;
            }
            let p = hybrid_predict(
                set,
                &venture.version.model,
                Some(assessment),
                &catalogs.patterns,
                &catalogs.criteria,
                milestone,
            )?;
            machine.push((p.p_machine.expect("machine slot present"), label));
            hybrid.push((p.p_hybrid, label));
        }
        milestones.push(MilestoneEvaluation {
            milestone,
            positives: held.iter().filter(|v| v.outcomes[&milestone]).count(),
            machine: SignalMetrics::from_pairs(&machine),
            crowd: SignalMetrics::from_pairs(&crowd),
            hybrid: SignalMetrics::from_pairs(&hybrid),
            truth: SignalMetrics::from_pairs(&truth),
        });
    }
    Ok(Evaluation { held_out: held.len(), milestones })
}

/// Training settings for [`run_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub cart: CartParams,
    pub hybrid_weight: f64,
    pub k_min: usize,
    pub aggregation: AggregationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cart: CartParams::default(),
            hybrid_weight: crate::learning::DEFAULT_HYBRID_WEIGHT,
            k_min: crate::learning::DEFAULT_K_MIN,
            aggregation: AggregationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub params: WorldParams,
    pub n_train: usize,
    pub model_set: ModelSet,
    pub evaluation: Evaluation,
}

/// Generates a world, loads the first `n_train` ventures (with outcomes)
/// into a fresh repository, trains on it, and evaluates on the rest.
pub fn run_experiment(
    params: &WorldParams,
    n_train: usize,
    catalogs: &Catalogs,
    config: &ExperimentConfig,
) -> Result<ExperimentReport, SimError> {
    if n_train > params.n_ventures {
        return Err(SimError::InvalidParams(format!(
            "n_train {n_train} exceeds n_ventures {}",
            params.n_ventures
        )));
    }
    let world = generate_world(params, &catalogs.patterns, &catalogs.criteria)?;
    let repo = Repository::in_memory(catalogs.clone());
    repo.import(&world.to_events(0..n_train))?;
    let datasets = repo.training_datasets(&config.aggregation, config.k_min);
    let model_set = train_all(&datasets, &config.cart, config.hybrid_weight, config.k_min)?;
    let evaluation = evaluate_guidance(&world, &model_set, n_train..params.n_ventures, catalogs, &config.aggregation)?;
    Ok(ExperimentReport { params: *params, n_train, model_set, evaluation })
}
