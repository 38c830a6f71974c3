//! Append-only point ledger. A participant's score is always the sum of
//! their entry deltas; nothing else is authoritative.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ParticipantId;
use crate::time::Timestamp;

/// Cause of a point award or penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LedgerReason {
    /// First accepted candidate/vote on a target (worth theta).
    FirstSubmission,
    /// Second accepted candidate/vote on a target (worth mu).
    SecondSubmission,
    /// Voter bonus when the low-quality agreement trigger fires.
    AgreementLowQuality,
    /// Voter bonus when the high-quality agreement trigger fires.
    AgreementHighQuality,
    /// Author penalty from the low-quality trigger (rho per downvoter).
    AuthorPenalty,
    /// Author reward from the high-quality trigger (|rho| per upvoter).
    AuthorReward,
    /// Optional configured bonus attached to an achievement.
    AchievementBonus,
}

/// One append-only ledger record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointLedgerEntry {
    /// 1-based ordinal, strictly increasing across the ledger.
    pub seq: u64,
    pub participant_id: ParticipantId,
    pub delta: i64,
    pub reason: LedgerReason,
    /// Sequence number of the event-log record that caused this entry.
    pub cause_event: u64,
    pub at: Timestamp,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("non-monotone ledger seq: expected {expected}, got {got}")]
    NonMonotoneSeq { expected: u64, got: u64 },
}

/// The ledger plus a running total per participant. Totals are a pure cache;
/// `recompute_total` re-derives them from the entries for consistency checks.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Ledger {
    entries: Vec<PointLedgerEntry>,
    totals: BTreeMap<ParticipantId, i64>,
}

impl Ledger {
    pub fn new() -> Self {
        Ledger::default()
    }

    /// Next valid entry ordinal.
    pub fn next_seq(&self) -> u64 {
        self.entries.len() as u64 + 1
    }

    /// Append an entry and return the participant's updated total.
    pub fn append(&mut self, entry: PointLedgerEntry) -> Result<i64, LedgerError> {
        let expected = self.next_seq();
        if entry.seq != expected {
            return Err(LedgerError::NonMonotoneSeq {
                expected,
                got: entry.seq,
            });
        }
        let total = self.totals.entry(entry.participant_id).or_insert(0);
        *total += entry.delta;
        let new_total = *total;
        self.entries.push(entry);
        Ok(new_total)
    }

    pub fn entries(&self) -> &[PointLedgerEntry] {
        &self.entries
    }

    /// Cached point total for a participant (0 when they have no entries).
    pub fn total(&self, participant: ParticipantId) -> i64 {
        self.totals.get(&participant).copied().unwrap_or(0)
    }

    /// Recompute a participant's total from scratch.
    pub fn recompute_total(&self, participant: ParticipantId) -> i64 {
        self.entries
            .iter()
            .filter(|e| e.participant_id == participant)
            .map(|e| e.delta)
            .sum()
    }

    /// Sum of all deltas in the ledger.
    pub fn grand_total(&self) -> i64 {
        self.entries.iter().map(|e| e.delta).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(seq: u64, participant: u64, delta: i64, reason: LedgerReason) -> PointLedgerEntry {
        PointLedgerEntry {
            seq,
            participant_id: ParticipantId(participant),
            delta,
            reason,
            cause_event: seq,
            at: Timestamp::from_millis(0),
        }
    }

    #[test]
    fn totals_follow_appends() {
        let mut ledger = Ledger::new();
        // theta = 10 for a first submission.
        let total = ledger
            .append(entry(1, 7, 10, LedgerReason::FirstSubmission))
            .unwrap();
        assert_eq!(total, 10);
        // rho * 3 = -15 author penalty drives the total negative.
        let total = ledger
            .append(entry(2, 7, -15, LedgerReason::AuthorPenalty))
            .unwrap();
        assert_eq!(total, -5);
        // zero delta is the identity.
        let total = ledger
            .append(entry(3, 7, 0, LedgerReason::AchievementBonus))
            .unwrap();
        assert_eq!(total, -5);
        assert_eq!(ledger.recompute_total(ParticipantId(7)), -5);
    }

    #[test]
    fn rejects_non_monotone_seq() {
        let mut ledger = Ledger::new();
        ledger
            .append(entry(1, 1, 5, LedgerReason::FirstSubmission))
            .unwrap();
        let err = ledger
            .append(entry(3, 1, 5, LedgerReason::FirstSubmission))
            .unwrap_err();
        assert_eq!(err, LedgerError::NonMonotoneSeq { expected: 2, got: 3 });
    }

    #[test]
    fn totals_match_recomputation_across_participants() {
        let mut ledger = Ledger::new();
        for i in 0..20u64 {
            ledger
                .append(entry(
                    i + 1,
                    i % 3,
                    (i as i64) - 7,
                    LedgerReason::SecondSubmission,
                ))
                .unwrap();
        }
        for p in 0..3u64 {
            assert_eq!(
                ledger.total(ParticipantId(p)),
                ledger.recompute_total(ParticipantId(p))
            );
        }
    }
}
