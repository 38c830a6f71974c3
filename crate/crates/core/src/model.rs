//! Core domain types: identifiers, participants, tasks, candidates, votes
//! and submission outcomes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ledger::PointLedgerEntry;
use crate::time::Timestamp;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }

        impl From<u64> for $name {
            fn from(raw: u64) -> Self {
                $name(raw)
            }
        }
    };
}

id_type!(
    /// Identifier of a registered participant.
    ParticipantId
);
id_type!(
    /// Identifier of a task (one informal sentence).
    TaskId
);
id_type!(
    /// Identifier of a candidate (one proposed formal rendering).
    CandidateId
);
id_type!(
    /// Identifier of a single vote submission.
    VoteId
);

/// A registered crowd participant.
///
/// Point totals and levels are never stored here; they are derived from the
/// ledger on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub id: ParticipantId,
    pub display_name: String,
    /// Opaque gateway address (e.g. a messenger chat id rendered as text).
    pub chat_ref: String,
    pub registered_at: Timestamp,
    /// Ids of achievements this participant holds.
    pub achievements: std::collections::BTreeSet<String>,
    /// Optional free-form profile fields (age band, gender, ...).
    #[serde(default)]
    pub profile: std::collections::BTreeMap<String, String>,
}

/// One task: an informal sentence waiting for formal renderings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    /// Normalized informal text; unique within the project.
    pub informal_text: String,
    /// All candidates ever submitted for this task, in submission order.
    pub candidate_ids: Vec<CandidateId>,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidateStatus {
    Active,
    Eliminated,
}

/// A proposed formal rendering of a task sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: CandidateId,
    pub task_id: TaskId,
    pub author_id: ParticipantId,
    /// Normalized candidate text; unique among the task's candidates.
    pub text: String,
    /// Current non-superseded upvote count.
    pub upvotes: u32,
    /// Current non-superseded downvote count.
    pub downvotes: u32,
    /// Net point, always `upvotes - downvotes`.
    pub point: i64,
    pub status: CandidateStatus,
    /// Latched once the low-quality agreement trigger has fired.
    pub low_trigger_fired: bool,
    /// Latched once the high-quality agreement trigger has fired.
    pub high_trigger_fired: bool,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteDirection {
    Up,
    Down,
}

/// One vote submission. A changed vote supersedes the earlier one; the
/// superseded record stays in the log and in the EM vote matrix history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vote {
    pub id: VoteId,
    pub candidate_id: CandidateId,
    pub voter_id: ParticipantId,
    pub direction: VoteDirection,
    pub at: Timestamp,
    pub superseded: bool,
}

/// Why a candidate or vote submission was turned away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    /// The task's visible candidate list already holds `alpha` entries.
    ListFull,
    /// The participant used up their `gamma` submissions on this target.
    QuotaExhausted,
    /// Normalized text already exists among the task's candidates.
    Duplicate,
    /// Participants may not vote on their own candidates.
    SelfVote,
    /// The candidate was eliminated and no longer accepts votes.
    EliminatedTarget,
    /// Candidate text was empty after normalization.
    EmptyText,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RejectReason::ListFull => "candidate list is full",
            RejectReason::QuotaExhausted => "submission quota exhausted",
            RejectReason::Duplicate => "duplicate candidate text",
            RejectReason::SelfVote => "cannot vote on own candidate",
            RejectReason::EliminatedTarget => "candidate was eliminated",
            RejectReason::EmptyText => "text is empty",
        };
        f.write_str(s)
    }
}

/// Which one-time agreement trigger fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerKind {
    Low,
    High,
}

/// Result of a candidate or vote submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionOutcome {
    pub accepted: bool,
    pub rejection: Option<RejectReason>,
    /// Ledger entries written by this transaction, in order.
    pub ledger_entries: Vec<PointLedgerEntry>,
    /// Candidates eliminated by this transaction.
    pub eliminations: Vec<CandidateId>,
    /// Agreement triggers fired by this transaction.
    pub triggers_fired: Vec<TriggerKind>,
    /// The candidate created or voted on, when the submission was accepted.
    pub candidate_id: Option<CandidateId>,
    /// Achievements newly awarded by this transaction.
    pub achievements_awarded: Vec<String>,
}

impl SubmissionOutcome {
    pub fn rejected(reason: RejectReason) -> Self {
        SubmissionOutcome {
            accepted: false,
            rejection: Some(reason),
            ledger_entries: Vec::new(),
            eliminations: Vec::new(),
            triggers_fired: Vec::new(),
            candidate_id: None,
            achievements_awarded: Vec::new(),
        }
    }

    pub fn accepted(candidate_id: CandidateId) -> Self {
        SubmissionOutcome {
            accepted: true,
            rejection: None,
            ledger_entries: Vec::new(),
            eliminations: Vec::new(),
            triggers_fired: Vec::new(),
            candidate_id: Some(candidate_id),
            achievements_awarded: Vec::new(),
        }
    }
}
