//! Event-sourced gamified crowdsourcing engine for building
//! informal-to-formal parallel text corpora.
//!
//! A project dispatches sentence tasks to participants, manages candidate
//! submissions and votes under configurable thresholds, scores participants
//! with points, levels and achievements, infers candidate correctness and
//! worker quality with EM, and exports a best-candidate parallel corpus
//! evaluated with corpus-level BLEU. All state is a deterministic fold over
//! an append-only event log; a seeded crowd simulator drives the whole
//! pipeline end to end.

pub mod achievements;
pub mod catalog;
pub mod config;
pub mod corpus;
pub mod dispatch;
pub mod engine;
pub mod eval;
pub mod event;
pub mod gateway;
pub mod inference;
pub mod ledger;
pub mod model;
pub mod points;
pub mod sim;
pub mod stats;
pub mod text;
pub mod time;

pub use config::{EmConfig, ProjectConfig};
pub use engine::{EngineError, Project};
pub use model::{
    Candidate, CandidateId, CandidateStatus, Participant, ParticipantId, RejectReason,
    SubmissionOutcome, Task, TaskId, TriggerKind, Vote, VoteDirection, VoteId,
};
pub use points::{candidate_point, default_level, level_for_points, LevelCurve};
pub use time::Timestamp;
