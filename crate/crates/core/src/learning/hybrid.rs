use serde::{Deserialize, Serialize};

use super::cart::{train_cart, CartParams, TreeModel};
use super::{LabeledDataset, LearningError};
use crate::canonical;
use crate::common::{Milestone, SignalSource};
use crate::feedback::{AggregatedAssessment, CriteriaCatalog};
use crate::ontology::{encode, BusinessModel, PatternCatalog};

pub const DEFAULT_HYBRID_WEIGHT: f64 = 0.5;
pub const DEFAULT_K_MIN: usize = 3;
/// Maximum number of what-if suggestions returned.
pub const WHATIF_LIMIT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SlotStatus {
    Trained,
    /// Only one class in the training data; the model is a single leaf.
    Degenerate,
    Empty { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSlot {
    pub signal_source: SignalSource,
    pub milestone: Milestone,
    pub rows: usize,
    pub status: SlotStatus,
    pub model: Option<TreeModel>,
}

/// Trained classifiers per (signal source, milestone) plus the settings of
/// the hybrid combiner they were trained for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    /// Content digest of everything below.
    pub id: String,
    pub hybrid_weight: f64,
    pub k_min: usize,
    pub params: CartParams,
    pub slots: Vec<ModelSlot>,
}

#[derive(Serialize)]
struct ModelSetContent<'a> {
    hybrid_weight: f64,
    k_min: usize,
    params: &'a CartParams,
    slots: &'a [ModelSlot],
}

impl ModelSet {
    pub fn empty(hybrid_weight: f64, k_min: usize, params: CartParams) -> Self {
        Self::assemble(hybrid_weight, k_min, params, Vec::new())
    }

    fn assemble(hybrid_weight: f64, k_min: usize, params: CartParams, slots: Vec<ModelSlot>) -> Self {
        let content = ModelSetContent { hybrid_weight, k_min, params: &params, slots: &slots };
        let id = canonical::digest(&content).expect("model set serializes");
        Self { id, hybrid_weight, k_min, params, slots }
    }

    pub fn model(&self, source: SignalSource, milestone: Milestone) -> Option<&TreeModel> {
        self.slots
            .iter()
            .find(|s| s.signal_source == source && s.milestone == milestone)
            .and_then(|s| s.model.as_ref())
    }

    pub fn trained_count(&self) -> usize {
        self.slots.iter().filter(|s| s.model.is_some()).count()
    }

    pub fn has_any_model(&self) -> bool {
        self.trained_count() > 0
    }
}

fn validate_combiner(hybrid_weight: f64) -> Result<(), LearningError> {
    if !(0.0..=1.0).contains(&hybrid_weight) {
        return Err(LearningError::InvalidParams(format!("hybrid weight {hybrid_weight} outside [0, 1]")));
    }
    Ok(())
}

/// Trains one tree per (signal source, milestone). Slots without a usable
/// dataset stay empty and say why.
pub fn train_all(
    datasets: &[LabeledDataset],
    params: &CartParams,
    hybrid_weight: f64,
    k_min: usize,
) -> Result<ModelSet, LearningError> {
    validate_combiner(hybrid_weight)?;
    params.validate()?;
    let mut slots = Vec::new();
    for &source in SignalSource::ALL {
        for &milestone in Milestone::ALL {
            let dataset = datasets.iter().find(|d| d.signal_source == source && d.milestone == milestone);
            let slot = match dataset {
                None => ModelSlot {
                    signal_source: source,
                    milestone,
                    rows: 0,
                    status: SlotStatus::Empty { reason: "no dataset".into() },
                    model: None,
                },
                Some(data) => match train_cart(data, params) {
                    Ok(model) => ModelSlot {
                        signal_source: source,
                        milestone,
                        rows: data.rows.len(),
                        status: if model.degenerate { SlotStatus::Degenerate } else { SlotStatus::Trained },
                        model: Some(model),
                    },
                    Err(err) => ModelSlot {
                        signal_source: source,
                        milestone,
                        rows: data.rows.len(),
                        status: SlotStatus::Empty { reason: err.to_string() },
                        model: None,
                    },
                },
            };
            slots.push(slot);
        }
    }
    Ok(ModelSet::assemble(hybrid_weight, k_min, *params, slots))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Hybrid,
    MachineOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilestonePrediction {
    pub milestone: Milestone,
    pub p_hybrid: f64,
    pub p_machine: Option<f64>,
    pub p_crowd: Option<f64>,
    pub basis: Basis,
}

fn machine_probability(
    set: &ModelSet,
    model: &BusinessModel,
    catalog: &PatternCatalog,
    milestone: Milestone,
) -> Result<f64, LearningError> {
    let tree = set
        .model(SignalSource::Machine, milestone)
        .ok_or(LearningError::NoModel { signal: SignalSource::Machine, milestone })?;
    let features = encode(model, catalog).map_err(|e| LearningError::Encoding(e.to_string()))?;
    tree.predict(&features.values)
}

/// Machine prediction for `milestone`, blended with the crowd prediction when
/// enough judges rated the version.
pub fn hybrid_predict(
    set: &ModelSet,
    model: &BusinessModel,
    assessment: Option<&AggregatedAssessment>,
    patterns: &PatternCatalog,
    criteria: &CriteriaCatalog,
    milestone: Milestone,
) -> Result<MilestonePrediction, LearningError> {
    let p_machine = machine_probability(set, model, patterns, milestone)?;
    let crowd_tree = set.model(SignalSource::Crowd, milestone);
    let p_crowd = match (assessment, crowd_tree) {
        (Some(a), Some(tree)) if a.judge_count >= set.k_min && a.judge_count > 0 => {
            match a.crowd_features(criteria) {
                Some(features) => Some(tree.predict(&features)?),
                None => None,
            }
        }
        _ => None,
    };
    let w = set.hybrid_weight;
    let (p_hybrid, basis) = match p_crowd {
        Some(pc) => (w * p_machine + (1.0 - w) * pc, Basis::Hybrid),
        None => (p_machine, Basis::MachineOnly),
    };
    Ok(MilestonePrediction { milestone, p_hybrid, p_machine: Some(p_machine), p_crowd, basis })
}

/// Predictions for every milestone that has a machine model.
pub fn hybrid_predict_all(
    set: &ModelSet,
    model: &BusinessModel,
    assessment: Option<&AggregatedAssessment>,
    patterns: &PatternCatalog,
    criteria: &CriteriaCatalog,
) -> Result<Vec<MilestonePrediction>, LearningError> {
    let mut out = Vec::new();
    for &milestone in Milestone::ALL {
        if set.model(SignalSource::Machine, milestone).is_some() {
            out.push(hybrid_predict(set, model, assessment, patterns, criteria, milestone)?);
        }
    }
    if out.is_empty() {
        return Err(LearningError::NoModels);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfSuggestion {
    pub milestone: Milestone,
    pub element_id: String,
    pub current_choice: String,
    pub alternative_choice: String,
    pub p_current: f64,
    pub p_new: f64,
    pub delta: f64,
}

/// Single-element counterfactual sweep over the machine model. Returns the
/// changes that raise the predicted probability, best first, at most
/// [`WHATIF_LIMIT`] of them.
pub fn whatif_scan(
    set: &ModelSet,
    model: &BusinessModel,
    catalog: &PatternCatalog,
    milestone: Milestone,
) -> Result<Vec<WhatIfSuggestion>, LearningError> {
    let p_current = machine_probability(set, model, catalog, milestone)?;
    let mut found = Vec::new();
    for element in &catalog.elements {
        let Some(current) = model.choice(&element.element_id) else { continue };
        for alternative in element.choices.iter().filter(|c| c.as_str() != current) {
            let variant = model.with_choice(&element.element_id, alternative);
            let p_new = machine_probability(set, &variant, catalog, milestone)?;
            let delta = p_new - p_current;
            if delta > 0.0 {
                found.push(WhatIfSuggestion {
                    milestone,
                    element_id: element.element_id.clone(),
                    current_choice: current.to_owned(),
                    alternative_choice: alternative.clone(),
                    p_current,
                    p_new,
                    delta,
                });
            }
        }
    }
    // stable sort keeps catalog order among equal deltas
    found.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    found.truncate(WHATIF_LIMIT);
    Ok(found)
}
