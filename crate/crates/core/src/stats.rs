//! Project statistics in the style of the collected-dataset summary table.
//! Counters are folded from the event log; averages are exact rationals
//! rendered to two decimals.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::Project;
use crate::event::EventKind;
use crate::model::{TriggerKind, VoteDirection};

/// Round `num / den` half-up to `places` decimals, in integer arithmetic.
pub fn ratio_decimals(num: u64, den: u64, places: u32) -> String {
    if den == 0 {
        return format!("0.{}", "0".repeat(places as usize));
    }
    let scale = 10u128.pow(places);
    let scaled = (2 * num as u128 * scale + den as u128) / (2 * den as u128);
    let int = scaled / scale;
    let frac = scaled % scale;
    format!("{int}.{frac:0width$}", width = places as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub task_count: u64,
    pub participant_count: u64,
    /// Candidate submissions (candidates are never retracted).
    pub total_candidates: u64,
    /// Vote submissions, superseded ones included.
    pub total_votes: u64,
    pub total_upvotes: u64,
    pub total_downvotes: u64,
    pub total_skips: u64,
    pub eliminated_candidates: u64,
    pub low_triggers: u64,
    pub high_triggers: u64,
    pub achievements_awarded: u64,
    /// Exact per-task averages, two decimals.
    pub avg_candidates_per_task: String,
    pub avg_votes_per_task: String,
    pub avg_upvotes_per_task: String,
    pub avg_downvotes_per_task: String,
    /// Share of vote submissions per direction, four decimals.
    pub upvote_share: String,
    pub downvote_share: String,
    /// candidates-per-task -> number of tasks.
    pub candidate_count_histogram: BTreeMap<u32, u64>,
}

/// Fold the event log into a [`StatsReport`].
pub fn project_stats(project: &Project) -> StatsReport {
    let mut total_candidates = 0u64;
    let mut total_upvotes = 0u64;
    let mut total_downvotes = 0u64;
    let mut total_skips = 0u64;
    let mut eliminated = 0u64;
    let mut low_triggers = 0u64;
    let mut high_triggers = 0u64;
    let mut achievements = 0u64;
    let mut task_count = 0u64;
    let mut participant_count = 0u64;
    let mut candidates_per_task: BTreeMap<u64, u32> = BTreeMap::new();

    for record in project.log() {
        match &record.kind {
            EventKind::TaskImported { .. } => task_count += 1,
            EventKind::ParticipantRegistered { .. } => participant_count += 1,
            EventKind::CandidateSubmitted { task_id, .. } => {
                total_candidates += 1;
                *candidates_per_task.entry(task_id.0).or_insert(0) += 1;
            }
            EventKind::VoteSubmitted { direction, .. } => match direction {
                VoteDirection::Up => total_upvotes += 1,
                VoteDirection::Down => total_downvotes += 1,
            },
            EventKind::CandidateEliminated { .. } => eliminated += 1,
            EventKind::TriggerFired { trigger, .. } => match trigger {
                TriggerKind::Low => low_triggers += 1,
                TriggerKind::High => high_triggers += 1,
            },
            EventKind::TaskSkipped { .. } => total_skips += 1,
            EventKind::AchievementAwarded { .. } => achievements += 1,
            EventKind::ProjectCreated { .. }
            | EventKind::VoteSuperseded { .. }
            | EventKind::LedgerAppended { .. } => {}
        }
    }

    let total_votes = total_upvotes + total_downvotes;
    let mut histogram: BTreeMap<u32, u64> = BTreeMap::new();
    for task in project.tasks().keys() {
        let count = candidates_per_task.get(&task.0).copied().unwrap_or(0);
        *histogram.entry(count).or_insert(0) += 1;
    }

    StatsReport {
        task_count,
        participant_count,
        total_candidates,
        total_votes,
        total_upvotes,
        total_downvotes,
        total_skips,
        eliminated_candidates: eliminated,
        low_triggers,
        high_triggers,
        achievements_awarded: achievements,
        avg_candidates_per_task: ratio_decimals(total_candidates, task_count, 2),
        avg_votes_per_task: ratio_decimals(total_votes, task_count, 2),
        avg_upvotes_per_task: ratio_decimals(total_upvotes, task_count, 2),
        avg_downvotes_per_task: ratio_decimals(total_downvotes, task_count, 2),
        upvote_share: ratio_decimals(total_upvotes, total_votes, 4),
        downvote_share: ratio_decimals(total_downvotes, total_votes, 4),
        candidate_count_histogram: histogram,
    }
}
