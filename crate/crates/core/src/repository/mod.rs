//! Append-only knowledge repository.
//!
//! All state is a fold over an ordered event log. Writes go through a single
//! mutex (the serialized write path): the event is checked against the
//! current state, persisted by the [`EventStore`], and only then applied.
//! Readers take a short read lock and always observe a complete prefix of
//! the log.

mod event;
mod state;
mod store;

pub use event::{Event, EventBody, OutcomeRecord, VentureRegistration};
pub use state::{fold, RepoState, VentureSnapshot};
pub use store::{read_log, write_log, EventStore, FileStore, MemoryStore};

use std::path::Path;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::common::{MentorId, Milestone, SignalSource, Timestamp, VentureId, VersionRef};
use crate::feedback::{aggregate, AggregatedAssessment, AggregationConfig, CriteriaCatalog, Judgment, JudgmentError};
use crate::learning::{LabeledDataset, LabeledRow};
use crate::matching::MentorProfile;
use crate::ontology::{encode, BusinessModelVersion, PatternCatalog, ValidationError};

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("unknown venture `{0}`")]
    UnknownVenture(VentureId),
    #[error("venture `{0}` already exists")]
    DuplicateVenture(VentureId),
    #[error("unknown version {0}")]
    UnknownVersion(VersionRef),
    #[error("venture `{venture}` expects version {expected}, got {found} (parent {parent:?})")]
    VersionOutOfOrder { venture: VentureId, expected: u32, found: u32, parent: Option<u32> },
    #[error("business model failed validation")]
    InvalidModel(Vec<ValidationError>),
    #[error("judgment failed validation")]
    InvalidJudgment(Vec<JudgmentError>),
    #[error("unknown mentor `{0}`")]
    UnknownMentor(MentorId),
    #[error("outcome for `{venture}` / {milestone} already recorded")]
    DuplicateOutcome { venture: VentureId, milestone: Milestone },
    #[error("venture `{0}` has no versions to label")]
    NoVersions(VentureId),
    #[error("outcome must label the latest version {latest}, got {found}")]
    OutcomeNotLatest { latest: u32, found: u32 },
    #[error("sequence gap: expected {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("{0}")]
    Invalid(String),
    #[error("event log line {line} is corrupt: {message}")]
    Corrupt { line: usize, message: String },
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// The catalogs events are validated against.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalogs {
    pub patterns: PatternCatalog,
    pub criteria: CriteriaCatalog,
}

impl Default for Catalogs {
    fn default() -> Self {
        Self { patterns: PatternCatalog::default_catalog(), criteria: CriteriaCatalog::default_catalog() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternStat {
    pub element_id: String,
    pub choice_id: String,
    pub n: usize,
    pub successes: usize,
    pub rate: Option<f64>,
}

struct Inner {
    state: RepoState,
    log: Vec<Event>,
}

pub struct Repository {
    catalogs: Catalogs,
    writer: Mutex<Box<dyn EventStore>>,
    inner: RwLock<Inner>,
}

impl std::fmt::Debug for Repository {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Repository").field("last_seq", &self.last_seq()).finish()
    }
}

impl Repository {
    /// Opens a repository over `store`, replaying whatever it already holds.
    pub fn open(mut store: Box<dyn EventStore>, catalogs: Catalogs) -> Result<Self, RepoError> {
        let log = store.load()?;
        let state = fold(&log, &catalogs)?;
        Ok(Self { catalogs, writer: Mutex::new(store), inner: RwLock::new(Inner { state, log }) })
    }

    pub fn in_memory(catalogs: Catalogs) -> Self {
        Self::open(Box::new(MemoryStore::new()), catalogs).expect("empty store replays")
    }

    pub fn catalogs(&self) -> &Catalogs {
        &self.catalogs
    }

    pub fn append(&self, body: EventBody, actor: Option<String>) -> Result<u64, RepoError> {
        self.append_at(body, actor, Timestamp::now())
    }

    /// Appends with an explicit timestamp. Returns the assigned sequence
    /// number.
    pub fn append_at(&self, body: EventBody, actor: Option<String>, at: Timestamp) -> Result<u64, RepoError> {
        let mut store = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let seq = {
            let inner = self.read();
            inner.state.check(&body, &self.catalogs)?;
            inner.state.last_seq + 1
        };
        let event = Event { seq, recorded_at: at, actor, body };
        store.persist(&event)?;
        let mut inner = self.inner.write().unwrap_or_else(|p| p.into_inner());
        inner.state.apply(&event, &self.catalogs)?;
        inner.log.push(event);
        Ok(seq)
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|p| p.into_inner())
    }

    pub fn last_seq(&self) -> u64 {
        self.read().state.last_seq
    }

    pub fn events(&self) -> Vec<Event> {
        self.read().log.clone()
    }

    pub fn state(&self) -> RepoState {
        self.read().state.clone()
    }

    pub fn snapshot(&self, venture: &VentureId) -> Result<VentureSnapshot, RepoError> {
        self.read().state.venture(venture).cloned()
    }

    /// Runs `f` on a venture's state under the read lock instead of cloning
    /// the whole snapshot. `f` must not call back into the repository.
    pub fn with_venture<R>(&self, venture: &VentureId, f: impl FnOnce(&VentureSnapshot) -> R) -> Result<R, RepoError> {
        let inner = self.read();
        Ok(f(inner.state.venture(venture)?))
    }

    pub fn venture_ids(&self) -> Vec<VentureId> {
        self.read().state.ventures.keys().cloned().collect()
    }

    pub fn version(&self, vref: &VersionRef) -> Result<BusinessModelVersion, RepoError> {
        let inner = self.read();
        let venture = inner.state.venture(&vref.venture_id)?;
        venture.version(vref.version).cloned().ok_or_else(|| RepoError::UnknownVersion(vref.clone()))
    }

    pub fn judgments(&self, vref: &VersionRef) -> Result<Vec<Judgment>, RepoError> {
        let inner = self.read();
        let venture = inner.state.venture(&vref.venture_id)?;
        venture.version(vref.version).ok_or_else(|| RepoError::UnknownVersion(vref.clone()))?;
        Ok(venture.judgments_for(vref.version))
    }

    pub fn mentors(&self) -> Vec<MentorProfile> {
        self.read().state.mentors.values().cloned().collect()
    }

    pub fn outcome_count(&self, milestone: Milestone) -> usize {
        self.read().state.ventures.values().filter(|v| v.outcomes.contains_key(&milestone)).count()
    }

    /// Success counts per `(element, choice)` over the labeled version of
    /// every venture with an outcome for `milestone`, in catalog order.
    /// Only observed pairs are listed.
    pub fn pattern_stats(&self, milestone: Milestone) -> Vec<PatternStat> {
        let inner = self.read();
        let patterns = &self.catalogs.patterns;
        let mut stats: Vec<PatternStat> = patterns
            .elements
            .iter()
            .flat_map(|e| {
                e.choices.iter().map(|c| PatternStat {
                    element_id: e.element_id.clone(),
                    choice_id: c.clone(),
                    n: 0,
                    successes: 0,
                    rate: None,
                })
            })
            .collect();
        for venture in inner.state.ventures.values() {
            let Some(outcome) = venture.outcomes.get(&milestone) else { continue };
            let Some(version) = venture.version(outcome.version) else { continue };
            for (element, choice) in &version.model.choices {
                if let Some(i) = patterns.indicator_index(element, choice) {
                    stats[i].n += 1;
                    if outcome.achieved {
                        stats[i].successes += 1;
                    }
                }
            }
        }
        stats.retain(|s| s.n > 0);
        for s in &mut stats {
            s.rate = Some(s.successes as f64 / s.n as f64);
        }
        stats
    }

    /// Aggregated crowd view of one version.
    pub fn assessment(&self, vref: &VersionRef, config: &AggregationConfig) -> Result<AggregatedAssessment, RepoError> {
        let judgments = self.judgments(vref)?;
        aggregate(vref, &judgments, &self.catalogs.criteria, config).map_err(|e| RepoError::Invalid(e.to_string()))
    }

    /// One row per venture with an outcome for `milestone`. Crowd rows are
    /// only emitted for labeled versions with at least `k_min` judges.
    pub fn training_dataset(
        &self,
        source: SignalSource,
        milestone: Milestone,
        config: &AggregationConfig,
        k_min: usize,
    ) -> LabeledDataset {
        let inner = self.read();
        let schema = match source {
            SignalSource::Machine => self.catalogs.patterns.catalog_version.clone(),
            SignalSource::Crowd => self.catalogs.criteria.catalog_version.clone(),
        };
        let mut data = LabeledDataset::new(schema, source, milestone);
        for venture in inner.state.ventures.values() {
            let Some(outcome) = venture.outcomes.get(&milestone) else { continue };
            let Some(version) = venture.version(outcome.version) else { continue };
            let features = match source {
                SignalSource::Machine => encode(&version.model, &self.catalogs.patterns).ok().map(|fv| fv.values),
                SignalSource::Crowd => {
                    let judgments = venture.judgments_for(outcome.version);
                    if judgments.len() < k_min.max(1) {
                        continue;
                    }
                    let vref = VersionRef::new(venture.venture_id.clone(), outcome.version);
                    aggregate(&vref, &judgments, &self.catalogs.criteria, config)
                        .ok()
                        .and_then(|a| a.crowd_features(&self.catalogs.criteria))
                }
            };
            if let Some(features) = features {
                data.rows.push(LabeledRow { features, label: outcome.achieved });
            }
        }
        data
    }

    /// Datasets for all four (signal source, milestone) pairs.
    pub fn training_datasets(&self, config: &AggregationConfig, k_min: usize) -> Vec<LabeledDataset> {
        SignalSource::ALL
            .iter()
            .flat_map(|&s| Milestone::ALL.iter().map(move |&m| (s, m)))
            .map(|(s, m)| self.training_dataset(s, m, config, k_min))
            .collect()
    }

    /// Writes the log as newline-delimited canonical documents.
    pub fn export_log(&self, path: impl AsRef<Path>) -> Result<(), RepoError> {
        write_log(path, &self.events())
    }

    /// Writes the folded state as one canonical document.
    pub fn export_snapshot(&self, path: impl AsRef<Path>) -> Result<(), RepoError> {
        std::fs::write(path, canonical::to_string_pretty(&self.state())?)?;
        Ok(())
    }

    /// Re-appends the bodies of an exported log, assigning fresh sequence
    /// numbers after whatever this repository already holds.
    pub fn import(&self, events: &[Event]) -> Result<usize, RepoError> {
        for event in events {
            self.append_at(event.body.clone(), event.actor.clone(), event.recorded_at)?;
        }
        Ok(events.len())
    }
}
