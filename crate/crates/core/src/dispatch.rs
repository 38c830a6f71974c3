//! Task dispatch, leaderboard, progress and reminders.
//!
//! The dispatcher hands out the least-labeled eligible task, serving
//! zero-candidate tasks first so there is always something to vote on.
//! Skipped tasks re-enter a participant's pool (in skip order) only after
//! every never-seen task is consumed; a task re-skipped from that fallback
//! pass leaves the pool for good.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::catalog::MessageCatalog;
use crate::engine::{EngineError, Project};
use crate::model::{ParticipantId, TaskId};
use crate::time::Timestamp;

/// Per-participant dispatch bookkeeping, rebuilt entirely from the log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DispatchState {
    pub participant_id: ParticipantId,
    /// Tasks with at least one accepted submission by this participant.
    pub acted_tasks: BTreeSet<TaskId>,
    /// Tasks skipped at least once, in first-skip order.
    pub skipped_tasks: Vec<TaskId>,
    /// Position in `skipped_tasks` for the fallback re-serving pass.
    pub served_cursor: usize,
}

impl DispatchState {
    pub fn new(participant_id: ParticipantId) -> Self {
        DispatchState {
            participant_id,
            acted_tasks: BTreeSet::new(),
            skipped_tasks: Vec::new(),
            served_cursor: 0,
        }
    }

    /// Fold one accepted skip into the state. First skip of a task defers
    /// it; re-skipping the task currently re-served advances the cursor;
    /// anything else is a no-op for ordering.
    pub(crate) fn note_skip(&mut self, task: TaskId) {
        if self.acted_tasks.contains(&task) {
            return;
        }
        match self.skipped_tasks.iter().position(|t| *t == task) {
            None => self.skipped_tasks.push(task),
            Some(i) if i == self.served_cursor => self.served_cursor += 1,
            Some(_) => {}
        }
    }
}

/// Next task for a participant, or `None` when their pool is exhausted.
///
/// Among never-seen tasks the key `(has any visible candidate, label count,
/// task id)` is minimized, which keeps labels uniform across tasks and
/// serves candidate-less tasks first.
pub fn next_task(project: &Project, participant: ParticipantId) -> Result<Option<TaskId>, EngineError> {
    let state = project
        .dispatch_state(participant)
        .ok_or(EngineError::UnknownParticipant(participant))?;

    let never_seen = project
        .tasks()
        .keys()
        .filter(|t| !state.acted_tasks.contains(t) && !state.skipped_tasks.contains(t))
        .min_by_key(|t| {
            let has_candidates = if project.active_count(**t) == 0 { 0u8 } else { 1u8 };
            (has_candidates, project.interaction_count(**t), t.0)
        });
    if let Some(task) = never_seen {
        return Ok(Some(*task));
    }

    Ok(state.skipped_tasks[state.served_cursor.min(state.skipped_tasks.len())..]
        .iter()
        .find(|t| !state.acted_tasks.contains(t))
        .copied())
}

/// Fraction of tasks the participant has acted on.
pub fn progress(project: &Project, participant: ParticipantId) -> Result<f64, EngineError> {
    if project.tasks().is_empty() {
        return Err(EngineError::EmptyProject);
    }
    let state = project
        .dispatch_state(participant)
        .ok_or(EngineError::UnknownParticipant(participant))?;
    Ok(state.acted_tasks.len() as f64 / project.tasks().len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardEntry {
    /// 1-based dense rank; equal points share a rank.
    pub rank: u32,
    pub participant_id: ParticipantId,
    pub points: i64,
    /// Distance to the nearest strictly higher score; 0 at rank 1.
    pub gap_to_next: i64,
}

/// Ranked point standings, best first. Ties share a dense rank and are
/// ordered by participant id for determinism.
pub fn leaderboard(project: &Project, top_n: usize) -> Vec<LeaderboardEntry> {
    let mut rows: Vec<(ParticipantId, i64)> = project
        .participants()
        .keys()
        .map(|p| (*p, project.total_points(*p)))
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut entries = Vec::with_capacity(rows.len().min(top_n));
    let mut rank = 0u32;
    let mut prev_points = None;
    let mut higher_points = None;
    for (participant_id, points) in rows {
        if prev_points != Some(points) {
            rank += 1;
            higher_points = prev_points;
            prev_points = Some(points);
        }
        if entries.len() >= top_n {
            break;
        }
        entries.push(LeaderboardEntry {
            rank,
            participant_id,
            points,
            gap_to_next: higher_points.map_or(0, |h| h - points),
        });
    }
    entries
}

/// Daily-reminder text: current rank plus the gap to the next competitor,
/// or the leader variant at rank 1.
pub fn reminder_message(
    project: &Project,
    participant: ParticipantId,
    catalog: &MessageCatalog,
) -> Result<String, EngineError> {
    let board = leaderboard(project, usize::MAX);
    let entry = board
        .iter()
        .find(|e| e.participant_id == participant)
        .ok_or(EngineError::UnknownParticipant(participant))?;
    let points = entry.points.to_string();
    if entry.rank == 1 {
        Ok(catalog.render("reminder_leader", &[("points", points.as_str())]))
    } else {
        let rank = entry.rank.to_string();
        let gap = entry.gap_to_next.to_string();
        Ok(catalog.render(
            "reminder_rank",
            &[
                ("rank", rank.as_str()),
                ("gap", gap.as_str()),
                ("points", points.as_str()),
            ],
        ))
    }
}

/// Emits at most one reminder per participant per cadence window.
#[derive(Debug, Clone, Default)]
pub struct ReminderScheduler {
    last_sent: std::collections::BTreeMap<ParticipantId, Timestamp>,
}

impl ReminderScheduler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Participants due for a reminder at `now`; marks them sent.
    pub fn due(
        &mut self,
        project: &Project,
        now: Timestamp,
        cadence_ms: i64,
    ) -> Vec<ParticipantId> {
        let mut out = Vec::new();
        for participant in project.participants().keys() {
            let due = self
                .last_sent
                .get(participant)
                .is_none_or(|last| now.as_millis() - last.as_millis() >= cadence_ms);
            if due {
                self.last_sent.insert(*participant, now);
                out.push(*participant);
            }
        }
        out
    }
}
