//! The append-only event log. Every accepted action produces exactly one
//! record; all project state is a deterministic fold over the records.
//!
//! Records serialize one-per-line as self-describing JSON with an explicit
//! version field, which keeps logs diffable and replay-testable.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ProjectConfig;
use crate::ledger::PointLedgerEntry;
use crate::model::{CandidateId, ParticipantId, TaskId, TriggerKind, VoteDirection, VoteId};
use crate::time::Timestamp;

pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EventKind {
    /// First record of every log; carries the full project configuration so
    /// a log replays without external inputs.
    ProjectCreated { config: ProjectConfig },
    TaskImported {
        task_id: TaskId,
        informal_text: String,
    },
    ParticipantRegistered {
        participant_id: ParticipantId,
        display_name: String,
        chat_ref: String,
    },
    CandidateSubmitted {
        candidate_id: CandidateId,
        task_id: TaskId,
        author_id: ParticipantId,
        text: String,
    },
    VoteSubmitted {
        vote_id: VoteId,
        candidate_id: CandidateId,
        voter_id: ParticipantId,
        direction: VoteDirection,
        /// The vote this submission replaces, when the voter changed sides.
        supersedes: Option<VoteId>,
    },
    VoteSuperseded { vote_id: VoteId },
    CandidateEliminated { candidate_id: CandidateId },
    TriggerFired {
        candidate_id: CandidateId,
        trigger: TriggerKind,
    },
    LedgerAppended { entry: PointLedgerEntry },
    TaskSkipped {
        participant_id: ParticipantId,
        task_id: TaskId,
    },
    AchievementAwarded {
        participant_id: ParticipantId,
        achievement_id: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub v: u32,
    /// Gapless 1-based sequence number.
    pub seq: u64,
    pub at: Timestamp,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("corrupt log at seq {seq}: {reason}")]
    Corrupt { seq: u64, reason: String },
    #[error("log i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl LogError {
    pub fn corrupt(seq: u64, reason: impl Into<String>) -> Self {
        LogError::Corrupt {
            seq,
            reason: reason.into(),
        }
    }
}

/// Serialize one record as its canonical log line (no trailing newline).
pub fn encode_line(record: &EventRecord) -> String {
    serde_json::to_string(record).expect("event records always serialize")
}

/// Write records as JSON lines.
pub fn write_log<W: Write>(mut w: W, records: &[EventRecord]) -> Result<(), LogError> {
    for record in records {
        writeln!(w, "{}", encode_line(record))?;
    }
    Ok(())
}

/// Read a JSON-lines log and enforce the gapless-sequence contract.
/// The reported seq on corruption is the position the offending line
/// should have occupied.
pub fn read_log<R: BufRead>(r: R) -> Result<Vec<EventRecord>, LogError> {
    let mut records = Vec::new();
    let mut expected_seq = 1u64;
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EventRecord = serde_json::from_str(&line)
            .map_err(|e| LogError::corrupt(expected_seq, format!("unparseable record: {e}")))?;
        if record.v != LOG_VERSION {
            return Err(LogError::corrupt(
                record.seq,
                format!("unsupported log version {}", record.v),
            ));
        }
        if record.seq != expected_seq {
            return Err(LogError::corrupt(
                record.seq,
                format!("sequence gap: expected {expected_seq}"),
            ));
        }
        expected_seq += 1;
        records.push(record);
    }
    Ok(records)
}
