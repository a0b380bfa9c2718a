use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use hidss_core::canonical;
use hidss_core::feedback::{aggregate, AggregatedAssessment, Judgment};
use hidss_core::guidance::{build_report, GuidanceReport, ReportInputs};
use hidss_core::learning::{hybrid_predict_all, train_all, whatif_scan, MilestonePrediction, ModelSet, SlotStatus};
use hidss_core::matching::{recommend, MatchAssignment, MentorProfile};
use hidss_core::ontology::{new_version, validate_model, BusinessModelVersion, ModelDocument};
use hidss_core::repository::{
    Catalogs, EventBody, FileStore, OutcomeRecord, PatternStat, RepoError, Repository, VentureRegistration,
    VentureSnapshot,
};
use hidss_core::{Dimension, MentorId, Milestone, SignalSource, Timestamp, VentureId, VersionRef};
use serde::{Deserialize, Serialize};

use crate::config::{RetrainPolicy, ServiceConfig};
use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterVenture {
    pub venture_id: VentureId,
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateVersion {
    /// Version the revision starts from; omitted for the first version.
    #[serde(default)]
    pub base_version: Option<u32>,
    pub model: ModelDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentSubmission {
    pub mentor_id: MentorId,
    pub ratings: BTreeMap<String, i32>,
    #[serde(default)]
    pub comments: BTreeMap<Dimension, String>,
    #[serde(default)]
    pub matched_dimension: Option<Dimension>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgmentReceipt {
    pub judgment_id: String,
    pub version_ref: VersionRef,
    pub seq: u64,
    pub judge_count: usize,
    /// Present only when the service reveals predictions after judging.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Vec<MilestonePrediction>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSubmission {
    pub milestone: Milestone,
    pub achieved: bool,
    /// Defaults to the latest version; any other value is rejected.
    #[serde(default)]
    pub version: Option<u32>,
    #[serde(default)]
    pub horizon_months: Option<u32>,
    #[serde(default)]
    pub observed_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReceipt {
    pub seq: u64,
    pub outcome: OutcomeRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrain: Option<RetrainSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSummary {
    pub signal_source: SignalSource,
    pub milestone: Milestone,
    pub rows: usize,
    #[serde(flatten)]
    pub status: SlotStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainSummary {
    /// Id of the set serving requests after the retrain.
    pub model_set_id: String,
    /// Whether the freshly trained set replaced the previous one.
    pub swapped: bool,
    pub trained_slots: usize,
    pub slots: Vec<SlotSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VentureSummary {
    pub venture_id: VentureId,
    pub name: String,
    pub registered_at: Timestamp,
    pub latest_version: Option<u32>,
    /// Judge count per version number.
    pub judges: BTreeMap<u32, usize>,
    pub outcomes: Vec<OutcomeRecord>,
    pub reports: usize,
}

impl From<&VentureSnapshot> for VentureSummary {
    fn from(s: &VentureSnapshot) -> Self {
        Self {
            venture_id: s.venture_id.clone(),
            name: s.name.clone(),
            registered_at: s.registered_at,
            latest_version: s.latest_version,
            judges: s.judgments.iter().map(|(v, m)| (*v, m.len())).collect(),
            outcomes: s.outcomes.values().cloned().collect(),
            reports: s.guidance.len(),
        }
    }
}

/// The validation loop: repository, catalogs and the active model set.
pub struct Hidss {
    config: ServiceConfig,
    repo: Repository,
    models: RwLock<Arc<ModelSet>>,
    retrain_lock: Mutex<()>,
}

impl std::fmt::Debug for Hidss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hidss").field("repo", &self.repo).field("model_set", &self.models().id).finish()
    }
}

impl Hidss {
    /// Opens storage, registers configured mentors, and loads or trains the
    /// initial model set.
    pub fn start(config: ServiceConfig) -> anyhow::Result<Self> {
        config.validate()?;
        let catalogs = config.catalogs()?;
        let repo = match &config.storage {
            Some(path) => Repository::open(Box::new(FileStore::open(path, config.fsync)?), catalogs)?,
            None => Repository::in_memory(catalogs),
        };
        let app = Self::with_repository(config, repo);
        if let Some(path) = app.config.mentors.clone() {
            let mentors = crate::seed::read_mentors(&path)?;
            let added = app.register_missing_mentors(&mentors, Some("config"))?;
            tracing::info!(added, path = %path.display(), "registered mentors");
        }
        match app.config.model_set.clone() {
            Some(path) if path.exists() => {
                let set = load_model_set(&path)?;
                tracing::info!(id = %set.id, "loaded model set");
                app.install(set);
            }
            _ => {
                let summary = app.retrain()?;
                tracing::info!(id = %summary.model_set_id, trained = summary.trained_slots, "trained model set");
            }
        }
        Ok(app)
    }

    /// Wraps an open repository. The model set starts empty.
    pub fn with_repository(config: ServiceConfig, repo: Repository) -> Self {
        let empty = ModelSet::empty(config.hybrid_weight, config.k_min, config.cart);
        Self { config, repo, models: RwLock::new(Arc::new(empty)), retrain_lock: Mutex::new(()) }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn repository(&self) -> &Repository {
        &self.repo
    }

    pub fn catalogs(&self) -> &Catalogs {
        self.repo.catalogs()
    }

    /// The active model set. Callers keep using the returned set even if a
    /// retrain swaps in a new one meanwhile.
    pub fn models(&self) -> Arc<ModelSet> {
        self.models.read().unwrap_or_else(|p| p.into_inner()).clone()
    }

    /// Replaces the active model set.
    pub fn install(&self, set: ModelSet) {
        *self.models.write().unwrap_or_else(|p| p.into_inner()) = Arc::new(set);
    }

    pub fn register_venture(&self, req: RegisterVenture, actor: Option<&str>) -> Result<VentureSummary, ApiError> {
        let id = req.venture_id.clone();
        self.repo.append(
            EventBody::VentureRegistered(VentureRegistration { venture_id: req.venture_id, name: req.name }),
            actor.map(str::to_owned),
        )?;
        self.venture(&id)
    }

    pub fn venture(&self, id: &VentureId) -> Result<VentureSummary, ApiError> {
        Ok(self.repo.with_venture(id, |s| VentureSummary::from(s))?)
    }

    fn latest_version(&self, venture: &VentureId) -> Result<u32, ApiError> {
        self.repo.with_venture(venture, |s| s.latest_version)?.ok_or_else(|| RepoError::NoVersions(venture.clone()).into())
    }

    pub fn create_version(
        &self,
        venture: &VentureId,
        req: CreateVersion,
        actor: Option<&str>,
    ) -> Result<BusinessModelVersion, ApiError> {
        let (base, latest) = self.repo.with_venture(venture, |s| {
            (req.base_version.map(|n| s.version(n).cloned().ok_or(n)), s.latest_version)
        })?;
        let base = base
            .transpose()
            .map_err(|n| RepoError::UnknownVersion(VersionRef::new(venture.clone(), n)))?;
        let model = validate_model(&req.model, &self.catalogs().patterns).map_err(RepoError::InvalidModel)?;
        let version = new_version(venture, base.as_ref(), latest, model, Timestamp::now())?;
        // a concurrent revision makes this append fail with stale_base
        self.repo.append(EventBody::VersionCreated(version.clone()), actor.map(str::to_owned))?;
        Ok(version)
    }

    pub fn version(&self, vref: &VersionRef) -> Result<BusinessModelVersion, ApiError> {
        Ok(self.repo.version(vref)?)
    }

    /// Top-`k` mentors per value dimension for the latest version.
    pub fn matches(&self, venture: &VentureId, k: usize) -> Result<MatchAssignment, ApiError> {
        let latest = self.latest_version(venture)?;
        let version = self.repo.version(&VersionRef::new(venture.clone(), latest))?;
        Ok(recommend(&version.model, &self.repo.mentors(), k, &self.config.match_weights)?)
    }

    pub fn submit_judgment(
        &self,
        vref: &VersionRef,
        req: JudgmentSubmission,
        actor: Option<&str>,
    ) -> Result<JudgmentReceipt, ApiError> {
        let submitted_at = Timestamp::now();
        let judgment = Judgment {
            judgment_id: format!("{vref}/{}@{}", req.mentor_id, submitted_at.0),
            version_ref: vref.clone(),
            mentor_id: req.mentor_id,
            ratings: req.ratings,
            comments: req.comments,
            matched_dimension: req.matched_dimension,
            submitted_at,
        };
        let judgment_id = judgment.judgment_id.clone();
        let seq = self.repo.append_at(EventBody::JudgmentSubmitted(judgment), actor.map(str::to_owned), submitted_at)?;
        let judgments = self.repo.judgments(vref)?;
        let predictions = if self.config.reveal_predictions_after_judging {
            self.predictions(vref, &judgments).ok()
        } else {
            None
        };
        Ok(JudgmentReceipt { judgment_id, version_ref: vref.clone(), seq, judge_count: judgments.len(), predictions })
    }

    fn assessment(&self, vref: &VersionRef, judgments: &[Judgment]) -> Result<Option<AggregatedAssessment>, ApiError> {
        if judgments.is_empty() {
            return Ok(None);
        }
        aggregate(vref, judgments, &self.catalogs().criteria, &self.config.aggregation())
            .map(Some)
            .map_err(|e| ApiError::internal(e.to_string()))
    }

    fn predictions(&self, vref: &VersionRef, judgments: &[Judgment]) -> Result<Vec<MilestonePrediction>, ApiError> {
        let version = self.repo.version(vref)?;
        let assessment = self.assessment(vref, judgments)?;
        let c = self.catalogs();
        Ok(hybrid_predict_all(&self.models(), &version.model, assessment.as_ref(), &c.patterns, &c.criteria)?)
    }

    /// Aggregates, predicts, scans alternatives, builds the report and
    /// archives it as a `GuidanceIssued` event.
    pub fn guidance(&self, vref: &VersionRef, actor: Option<&str>) -> Result<GuidanceReport, ApiError> {
        let (version, judgments, parent_version, parent_report) = self
            .repo
            .with_venture(&vref.venture_id, |s| {
                let version = s.version(vref.version)?.clone();
                let parent_version = version.parent.and_then(|n| s.version(n)).cloned();
                let parent_report = version.parent.and_then(|n| s.latest_report_for(n)).cloned();
                Some((version, s.judgments_for(vref.version), parent_version, parent_report))
            })?
            .ok_or_else(|| RepoError::UnknownVersion(vref.clone()))?;
        let models = self.models();
        let c = self.catalogs();
        let assessment = self.assessment(vref, &judgments)?;
        let predictions = hybrid_predict_all(&models, &version.model, assessment.as_ref(), &c.patterns, &c.criteria)?;
        let mut whatif = Vec::new();
        for p in &predictions {
            whatif.extend(whatif_scan(&models, &version.model, &c.patterns, p.milestone)?);
        }
        let inputs = ReportInputs {
            version: &version,
            assessment: assessment.as_ref(),
            predictions: &predictions,
            judgments: &judgments,
            whatif: &whatif,
            parent_version: parent_version.as_ref(),
            parent_report: parent_report.as_ref(),
            model_set_id: &models.id,
            generated_at: Timestamp::now(),
        };
        let report = build_report(&inputs, &c.patterns, &c.criteria)?;
        self.repo.append_at(
            EventBody::GuidanceIssued(Box::new(report.clone())),
            actor.map(str::to_owned),
            report.provenance.generated_at,
        )?;
        Ok(report)
    }

    /// Guidance for the venture's latest version.
    pub fn process_validation_round(&self, venture: &VentureId, actor: Option<&str>) -> Result<GuidanceReport, ApiError> {
        let latest = self.latest_version(venture)?;
        self.guidance(&VersionRef::new(venture.clone(), latest), actor)
    }

    pub fn record_outcome(
        &self,
        venture: &VentureId,
        req: OutcomeSubmission,
        actor: Option<&str>,
    ) -> Result<OutcomeReceipt, ApiError> {
        let latest = self.latest_version(venture)?;
        let outcome = OutcomeRecord {
            venture_id: venture.clone(),
            version: req.version.unwrap_or(latest),
            milestone: req.milestone,
            achieved: req.achieved,
            observed_at: req.observed_at.unwrap_or_else(Timestamp::now),
            horizon_months: req.horizon_months,
        };
        let seq = self.repo.append(EventBody::OutcomeRecorded(outcome.clone()), actor.map(str::to_owned))?;
        let retrain = match self.config.retrain_policy {
            RetrainPolicy::OnOutcome => Some(self.retrain()?),
            RetrainPolicy::Manual => None,
        };
        Ok(OutcomeReceipt { seq, outcome, retrain })
    }

    /// Trains a fresh set from the repository. The new set replaces the
    /// active one unless it has no models at all while the active one does.
    pub fn retrain(&self) -> Result<RetrainSummary, ApiError> {
        let _guard = self.retrain_lock.lock().unwrap_or_else(|p| p.into_inner());
        let datasets = self.repo.training_datasets(&self.config.aggregation(), self.config.k_min);
        let fresh = train_all(&datasets, &self.config.cart, self.config.hybrid_weight, self.config.k_min)?;
        let slots = fresh
            .slots
            .iter()
            .map(|s| SlotSummary {
                signal_source: s.signal_source,
                milestone: s.milestone,
                rows: s.rows,
                status: s.status.clone(),
            })
            .collect();
        let trained_slots = fresh.trained_count();
        let keep_previous = !fresh.has_any_model() && self.models().has_any_model();
        if !keep_previous {
            self.install(fresh);
        }
        Ok(RetrainSummary { model_set_id: self.models().id.clone(), swapped: !keep_previous, trained_slots, slots })
    }

    pub fn pattern_stats(&self, milestone: Milestone) -> Vec<PatternStat> {
        self.repo.pattern_stats(milestone)
    }

    pub fn mentors(&self) -> Vec<MentorProfile> {
        self.repo.mentors()
    }

    pub fn register_mentor(&self, profile: MentorProfile, actor: Option<&str>) -> Result<MentorProfile, ApiError> {
        profile.validate()?;
        self.repo.append(EventBody::MentorRegistered(profile.clone()), actor.map(str::to_owned))?;
        Ok(profile)
    }

    /// Registers the mentors not already known. Returns how many were added.
    pub fn register_missing_mentors(&self, mentors: &[MentorProfile], actor: Option<&str>) -> Result<usize, ApiError> {
        let known: Vec<MentorId> = self.repo.mentors().into_iter().map(|m| m.mentor_id).collect();
        let mut added = 0;
        for m in mentors.iter().filter(|m| !known.contains(&m.mentor_id)) {
            self.register_mentor(m.clone(), actor)?;
            added += 1;
        }
        Ok(added)
    }
}

pub fn load_model_set(path: &Path) -> anyhow::Result<ModelSet> {
    let text = std::fs::read_to_string(path)?;
    Ok(canonical::from_str(&text)?)
}

pub fn save_model_set(path: &Path, set: &ModelSet) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, canonical::to_string_pretty(set)?)?;
    Ok(())
}
