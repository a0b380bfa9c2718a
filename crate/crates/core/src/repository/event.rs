use serde::{Deserialize, Serialize};

use crate::common::{Milestone, Timestamp, VentureId};
use crate::feedback::Judgment;
use crate::guidance::GuidanceReport;
use crate::matching::MentorProfile;
use crate::ontology::BusinessModelVersion;

/// One entry of the append-only log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub recorded_at: Timestamp,
    /// Declared identity of the caller that caused the event.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<String>,
    pub body: EventBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    VentureRegistered(VentureRegistration),
    VersionCreated(BusinessModelVersion),
    JudgmentSubmitted(Judgment),
    GuidanceIssued(Box<GuidanceReport>),
    OutcomeRecorded(OutcomeRecord),
    MentorRegistered(MentorProfile),
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::VentureRegistered(_) => "VentureRegistered",
            EventBody::VersionCreated(_) => "VersionCreated",
            EventBody::JudgmentSubmitted(_) => "JudgmentSubmitted",
            EventBody::GuidanceIssued(_) => "GuidanceIssued",
            EventBody::OutcomeRecorded(_) => "OutcomeRecorded",
            EventBody::MentorRegistered(_) => "MentorRegistered",
        }
    }

    /// Venture the event belongs to, if any.
    pub fn venture_id(&self) -> Option<&VentureId> {
        match self {
            EventBody::VentureRegistered(r) => Some(&r.venture_id),
            EventBody::VersionCreated(v) => Some(&v.venture_id),
            EventBody::JudgmentSubmitted(j) => Some(&j.version_ref.venture_id),
            EventBody::GuidanceIssued(g) => Some(&g.version_ref.venture_id),
            EventBody::OutcomeRecorded(o) => Some(&o.venture_id),
            EventBody::MentorRegistered(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VentureRegistration {
    pub venture_id: VentureId,
    pub name: String,
}

/// A milestone observation. It labels the venture's latest version at the
/// time it is recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub venture_id: VentureId,
    pub version: u32,
    pub milestone: Milestone,
    pub achieved: bool,
    pub observed_at: Timestamp,
    /// Observation horizon, e.g. months after founding for survival.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_months: Option<u32>,
}
