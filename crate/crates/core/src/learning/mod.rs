//! Milestone classifiers and the hybrid combiner.

mod cart;
mod hybrid;

pub use cart::{leaf_probability, predict, train_cart, CartParams, Node, TreeModel};
pub use hybrid::{
    hybrid_predict, hybrid_predict_all, train_all, whatif_scan, Basis, MilestonePrediction, ModelSet,
    ModelSlot, SlotStatus, WhatIfSuggestion, DEFAULT_HYBRID_WEIGHT, DEFAULT_K_MIN, WHATIF_LIMIT,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::common::{Milestone, SignalSource};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearningError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset has {rows} rows, training needs at least {required}")]
    InsufficientRows { rows: usize, required: usize },
    #[error("row {row} has {found} features, expected {expected}")]
    RaggedFeatures { row: usize, expected: usize, found: usize },
    #[error("row {row} has a non-finite feature value")]
    NonFinite { row: usize },
    #[error("feature vector has {found} values, model expects {expected}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("no trained {signal} model for milestone {milestone}")]
    NoModel { signal: SignalSource, milestone: Milestone },
    #[error("no trained machine model for any milestone")]
    NoModels,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{0}")]
    Encoding(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub features: Vec<f64>,
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub schema_id: String,
    pub milestone: Milestone,
    pub signal_source: SignalSource,
    pub rows: Vec<LabeledRow>,
}

impl LabeledDataset {
    pub fn new(schema_id: impl Into<String>, signal_source: SignalSource, milestone: Milestone) -> Self {
        Self { schema_id: schema_id.into(), milestone, signal_source, rows: Vec::new() }
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, |r| r.features.len())
    }

    pub fn positives(&self) -> usize {
        self.rows.iter().filter(|r| r.label).count()
    }

    fn check(&self) -> Result<(), LearningError> {
        let expected = self.n_features();
        if self.rows.is_empty() {
            return Err(LearningError::EmptyDataset);
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.features.len() != expected {
                return Err(LearningError::RaggedFeatures { row: i, expected, found: row.features.len() });
            }
            if row.features.iter().any(|v| !v.is_finite()) {
                return Err(LearningError::NonFinite { row: i });
            }
        }
        Ok(())
    }
}
