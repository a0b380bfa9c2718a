//! Core of a hybrid intelligence decision support system for business model
//! validation.
//!
//! Entrepreneurs describe their venture as a versioned set of categorical
//! design choices ([`ontology`]). Mentors are matched to the model by
//! expertise ([`matching`]) and rate it on 21 criteria ([`feedback`]). Two
//! families of CART classifiers, one trained on aggregated crowd ratings and
//! one on the encoded configuration, predict milestone outcomes and are
//! blended into a hybrid prediction ([`learning`]). Everything is kept in an
//! append-only event log ([`repository`]) from which datasets and pattern
//! statistics are derived, and [`guidance`] assembles the report shown to the
//! entrepreneur. [`simkit`] generates synthetic worlds with known ground truth
//! for evaluation.

pub mod canonical;
pub mod common;
pub mod feedback;
pub mod guidance;
pub mod learning;
pub mod matching;
pub mod ontology;
pub mod repository;
pub mod simkit;

pub use common::{Dimension, MentorId, Milestone, SignalSource, Timestamp, VentureId, VersionRef};
