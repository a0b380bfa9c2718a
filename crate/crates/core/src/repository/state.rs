use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Catalogs, Event, EventBody, OutcomeRecord, RepoError};
use crate::common::{MentorId, Milestone, Timestamp, VentureId, VersionRef};
use crate::feedback::{validate_judgment, Judgment};
use crate::guidance::GuidanceReport;
use crate::matching::MentorProfile;
use crate::ontology::{validate_model, BusinessModelVersion};

/// Everything known about one venture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VentureSnapshot {
    pub venture_id: VentureId,
    pub name: String,
    pub registered_at: Timestamp,
    pub latest_version: Option<u32>,
    pub versions: Vec<BusinessModelVersion>,
    /// Current judgment per mentor, per version number.
    pub judgments: BTreeMap<u32, BTreeMap<MentorId, Judgment>>,
    pub outcomes: BTreeMap<Milestone, OutcomeRecord>,
    pub guidance: Vec<GuidanceReport>,
}

impl VentureSnapshot {
    pub fn latest(&self) -> Option<&BusinessModelVersion> {
        self.versions.last()
    }

    pub fn version(&self, number: u32) -> Option<&BusinessModelVersion> {
        number.checked_sub(1).and_then(|i| self.versions.get(i as usize))
    }

    pub fn judgments_for(&self, number: u32) -> Vec<Judgment> {
        self.judgments.get(&number).map(|m| m.values().cloned().collect()).unwrap_or_default()
    }

    pub fn judgment_count(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    /// Most recent report issued for `number`.
    pub fn latest_report_for(&self, number: u32) -> Option<&GuidanceReport> {
        self.guidance.iter().rev().find(|g| g.version_ref.version == number)
    }
}

/// Left fold of the event log.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepoState {
    pub last_seq: u64,
    pub ventures: BTreeMap<VentureId, VentureSnapshot>,
    pub mentors: BTreeMap<MentorId, MentorProfile>,
}

impl RepoState {
    pub fn venture(&self, id: &VentureId) -> Result<&VentureSnapshot, RepoError> {
        self.ventures.get(id).ok_or_else(|| RepoError::UnknownVenture(id.clone()))
    }

    fn version_exists(&self, vref: &VersionRef) -> Result<&VentureSnapshot, RepoError> {
        let venture = self.venture(&vref.venture_id)?;
        venture.version(vref.version).ok_or_else(|| RepoError::UnknownVersion(vref.clone()))?;
        Ok(venture)
    }

    /// Checks that `body` may be appended to the current state.
    pub fn check(&self, body: &EventBody, catalogs: &Catalogs) -> Result<(), RepoError> {
        match body {
            EventBody::VentureRegistered(r) => {
                if self.ventures.contains_key(&r.venture_id) {
                    return Err(RepoError::DuplicateVenture(r.venture_id.clone()));
                }
                if r.venture_id.as_str().is_empty() {
                    return Err(RepoError::Invalid("venture id must not be empty".into()));
                }
            }
            EventBody::VersionCreated(v) => {
                let venture = self.venture(&v.venture_id)?;
                let latest = venture.latest_version;
                let expected = latest.unwrap_or(0) + 1;
                if v.version != expected || v.parent != latest {
                    return Err(RepoError::VersionOutOfOrder {
                        venture: v.venture_id.clone(),
                        expected,
                        found: v.version,
                        parent: v.parent,
                    });
                }
                validate_model(&v.model.to_document(), &catalogs.patterns).map_err(RepoError::InvalidModel)?;
            }
            EventBody::JudgmentSubmitted(j) => {
                self.version_exists(&j.version_ref)?;
                if !self.mentors.contains_key(&j.mentor_id) {
                    return Err(RepoError::UnknownMentor(j.mentor_id.clone()));
                }
                validate_judgment(j, &catalogs.criteria).map_err(RepoError::InvalidJudgment)?;
            }
            EventBody::GuidanceIssued(g) => {
                self.version_exists(&g.version_ref)?;
            }
            EventBody::OutcomeRecorded(o) => {
                let venture = self.venture(&o.venture_id)?;
                if venture.outcomes.contains_key(&o.milestone) {
                    return Err(RepoError::DuplicateOutcome { venture: o.venture_id.clone(), milestone: o.milestone });
                }
                match venture.latest_version {
                    None => return Err(RepoError::NoVersions(o.venture_id.clone())),
                    Some(latest) if latest != o.version => {
                        return Err(RepoError::OutcomeNotLatest { latest, found: o.version })
                    }
                    Some(_) => {}
                }
            }
            EventBody::MentorRegistered(m) => {
                m.validate().map_err(|e| RepoError::Invalid(e.to_string()))?;
                if m.mentor_id.as_str().is_empty() {
                    return Err(RepoError::Invalid("mentor id must not be empty".into()));
                }
            }
        }
        Ok(())
    }

    /// Validates and applies one event.
    pub fn apply(&mut self, event: &Event, catalogs: &Catalogs) -> Result<(), RepoError> {
        let expected = self.last_seq + 1;
        if event.seq != expected {
            return Err(RepoError::SequenceGap { expected, found: event.seq });
        }
        self.check(&event.body, catalogs)?;
        self.apply_checked(event);
        Ok(())
    }

    fn apply_checked(&mut self, event: &Event) {
        self.last_seq = event.seq;
        match &event.body {
            EventBody::VentureRegistered(r) => {
                self.ventures.insert(
                    r.venture_id.clone(),
                    VentureSnapshot {
                        venture_id: r.venture_id.clone(),
                        name: r.name.clone(),
                        registered_at: event.recorded_at,
                        latest_version: None,
                        versions: Vec::new(),
                        judgments: BTreeMap::new(),
                        outcomes: BTreeMap::new(),
                        guidance: Vec::new(),
                    },
                );
            }
            EventBody::VersionCreated(v) => {
                let venture = self.ventures.get_mut(&v.venture_id).expect("checked");
                venture.latest_version = Some(v.version);
                venture.versions.push(v.clone());
            }
            EventBody::JudgmentSubmitted(j) => {
                let venture = self.ventures.get_mut(&j.version_ref.venture_id).expect("checked");
                venture
                    .judgments
                    .entry(j.version_ref.version)
                    .or_default()
                    .insert(j.mentor_id.clone(), j.clone());
            }
            EventBody::GuidanceIssued(g) => {
                let venture = self.ventures.get_mut(&g.version_ref.venture_id).expect("checked");
                venture.guidance.push((**g).clone());
            }
            EventBody::OutcomeRecorded(o) => {
                let venture = self.ventures.get_mut(&o.venture_id).expect("checked");
                venture.outcomes.insert(o.milestone, o.clone());
            }
            EventBody::MentorRegistered(m) => {
                self.mentors.insert(m.mentor_id.clone(), m.clone());
            }
        }
    }
}

/// Replays a log from the empty state.
pub fn fold(events: &[Event], catalogs: &Catalogs) -> Result<RepoState, RepoError> {
    let mut state = RepoState::default();
    for event in events {
        state.apply(event, catalogs)?;
    }
    Ok(state)
}
