//! Project state and the submission state machine.
//!
//! Commands (register, import, submit, vote, skip) validate against current
//! state, emit event records, and mutate state exclusively through
//! [`Project::apply`] — the same fold used by replay. Replaying a log
//! therefore reproduces a live project's state field for field.
//!
//! Concurrency contract: one writer per project. All mutating calls happen
//! in a serialized total order; reads may run on cloned snapshots.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::achievements::{Achievement, AchievementRule};
use crate::config::{ConfigError, ProjectConfig};
use crate::dispatch::DispatchState;
use crate::event::{EventKind, EventRecord, LOG_VERSION};
use crate::ledger::{Ledger, LedgerReason, PointLedgerEntry};
use crate::model::{
    Candidate, CandidateId, CandidateStatus, Participant, ParticipantId, RejectReason,
    SubmissionOutcome, Task, TaskId, TriggerKind, Vote, VoteDirection, VoteId,
};
use crate::points::{candidate_point, level_for_points};
use crate::text::normalize;
use crate::time::Timestamp;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("unknown participant {0}")]
    UnknownParticipant(ParticipantId),
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("unknown candidate {0}")]
    UnknownCandidate(CandidateId),
    #[error("project has no tasks")]
    EmptyProject,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("corrupt log at seq {seq}: {reason}")]
    CorruptLog { seq: u64, reason: String },
}

/// Full project state. Every field is reproduced exactly by folding the
/// event log, so the struct derives `PartialEq` for replay checks and
/// `Serialize` for byte-stable snapshots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Project {
    initialized: bool,
    config: ProjectConfig,
    participants: BTreeMap<ParticipantId, Participant>,
    chat_index: BTreeMap<String, ParticipantId>,
    tasks: BTreeMap<TaskId, Task>,
    task_text_index: BTreeMap<String, TaskId>,
    candidates: BTreeMap<CandidateId, Candidate>,
    candidate_texts: BTreeMap<TaskId, BTreeSet<String>>,
    active_counts: BTreeMap<TaskId, u32>,
    votes: BTreeMap<VoteId, Vote>,
    candidate_votes: BTreeMap<CandidateId, Vec<VoteId>>,
    current_votes: BTreeMap<CandidateId, BTreeMap<ParticipantId, VoteId>>,
    vote_submissions: BTreeMap<CandidateId, BTreeMap<ParticipantId, u32>>,
    authored_per_task: BTreeMap<ParticipantId, BTreeMap<TaskId, u32>>,
    authored_total: BTreeMap<ParticipantId, u32>,
    downvotes_cast: BTreeMap<ParticipantId, u32>,
    ledger: Ledger,
    dispatch: BTreeMap<ParticipantId, DispatchState>,
    task_interactions: BTreeMap<TaskId, u64>,
    log: Vec<EventRecord>,
    next_participant_id: u64,
    next_task_id: u64,
    next_candidate_id: u64,
    next_vote_id: u64,
}

impl Project {
    fn empty() -> Self {
        Project {
            initialized: false,
            config: ProjectConfig::default(),
            participants: BTreeMap::new(),
            chat_index: BTreeMap::new(),
            tasks: BTreeMap::new(),
            task_text_index: BTreeMap::new(),
            candidates: BTreeMap::new(),
            candidate_texts: BTreeMap::new(),
            active_counts: BTreeMap::new(),
            votes: BTreeMap::new(),
            candidate_votes: BTreeMap::new(),
            current_votes: BTreeMap::new(),
            vote_submissions: BTreeMap::new(),
            authored_per_task: BTreeMap::new(),
            authored_total: BTreeMap::new(),
            downvotes_cast: BTreeMap::new(),
            ledger: Ledger::new(),
            dispatch: BTreeMap::new(),
            task_interactions: BTreeMap::new(),
            log: Vec::new(),
            next_participant_id: 1,
            next_task_id: 1,
            next_candidate_id: 1,
            next_vote_id: 1,
        }
    }

    /// Create a fresh project; the config becomes the log's first record.
    pub fn new(config: ProjectConfig, at: Timestamp) -> Result<Self, EngineError> {
        config.validate()?;
        let mut project = Project::empty();
        project.append_event(at, EventKind::ProjectCreated { config });
        Ok(project)
    }

    /// Rebuild a project by folding an event log.
    pub fn replay(records: &[EventRecord]) -> Result<Self, EngineError> {
        if records.is_empty() {
            return Err(EngineError::CorruptLog {
                seq: 0,
                reason: "empty log".to_owned(),
            });
        }
        let mut project = Project::empty();
        for (expected, record) in (1u64..).zip(records.iter()) {
            if record.v != LOG_VERSION {
                return Err(EngineError::CorruptLog {
                    seq: record.seq,
                    reason: format!("unsupported log version {}", record.v),
                });
            }
            if record.seq != expected {
                return Err(EngineError::CorruptLog {
                    seq: record.seq,
                    reason: format!("sequence gap: expected {expected}"),
                });
            }
            project
                .apply(record)
                .map_err(|reason| EngineError::CorruptLog {
                    seq: record.seq,
                    reason,
                })?;
            project.log.push(record.clone());
        }
        if !project.initialized {
            return Err(EngineError::CorruptLog {
                seq: 1,
                reason: "log does not start with project-created".to_owned(),
            });
        }
        Ok(project)
    }

    // ------------------------------------------------------------------
    // Commands
    // ------------------------------------------------------------------

    /// Register a participant; registering an already-known chat_ref is
    /// idempotent and returns the existing id.
    pub fn register_participant(
        &mut self,
        display_name: &str,
        chat_ref: &str,
        at: Timestamp,
    ) -> ParticipantId {
        if let Some(&existing) = self.chat_index.get(chat_ref) {
            return existing;
        }
        let id = ParticipantId(self.next_participant_id);
        self.append_event(
            at,
            EventKind::ParticipantRegistered {
                participant_id: id,
                display_name: display_name.to_owned(),
                chat_ref: chat_ref.to_owned(),
            },
        );
        id
    }

    /// Create a task from an informal sentence. Returns `None` when the
    /// normalized text is blank or duplicates an existing task.
    pub fn import_task(&mut self, informal_text: &str, at: Timestamp) -> Option<TaskId> {
        let normalized = normalize(informal_text);
        if normalized.is_empty() || self.task_text_index.contains_key(&normalized) {
            return None;
        }
        let id = TaskId(self.next_task_id);
        self.append_event(
            at,
            EventKind::TaskImported {
                task_id: id,
                informal_text: normalized,
            },
        );
        Some(id)
    }

    /// Submit a candidate rendering for a task.
    pub fn submit_candidate(
        &mut self,
        participant: ParticipantId,
        task: TaskId,
        text: &str,
        at: Timestamp,
    ) -> Result<SubmissionOutcome, EngineError> {
        self.ensure_participant(participant)?;
        self.ensure_task(task)?;

        let normalized = normalize(text);
        if normalized.is_empty() {
            return Ok(SubmissionOutcome::rejected(RejectReason::EmptyText));
        }
        if self.active_count(task) >= self.config.alpha {
            return Ok(SubmissionOutcome::rejected(RejectReason::ListFull));
        }
        let authored = self.authored_on_task(participant, task);
        if authored >= self.config.gamma {
            return Ok(SubmissionOutcome::rejected(RejectReason::QuotaExhausted));
        }
        if self
            .candidate_texts
            .get(&task)
            .is_some_and(|texts| texts.contains(&normalized))
        {
            return Ok(SubmissionOutcome::rejected(RejectReason::Duplicate));
        }

        let candidate_id = CandidateId(self.next_candidate_id);
        let cause = self.append_event(
            at,
            EventKind::CandidateSubmitted {
                candidate_id,
                task_id: task,
                author_id: participant,
                text: normalized,
            },
        );

        let mut outcome = SubmissionOutcome::accepted(candidate_id);
        let (delta, reason) = if authored == 0 {
            (self.config.theta, LedgerReason::FirstSubmission)
        } else {
            (self.config.mu, LedgerReason::SecondSubmission)
        };
        self.push_ledger(participant, delta, reason, cause, at, &mut outcome);
        self.award_achievements(participant, at, &mut outcome);
        Ok(outcome)
    }

    /// Submit or change a vote on a candidate. Elimination and agreement
    /// triggers run inside the same transaction, in that order.
    pub fn submit_vote(
        &mut self,
        participant: ParticipantId,
        candidate: CandidateId,
        direction: VoteDirection,
        at: Timestamp,
    ) -> Result<SubmissionOutcome, EngineError> {
        self.ensure_participant(participant)?;
        let cand = self
            .candidates
            .get(&candidate)
            .ok_or(EngineError::UnknownCandidate(candidate))?;
        if cand.status == CandidateStatus::Eliminated {
            return Ok(SubmissionOutcome::rejected(RejectReason::EliminatedTarget));
        }
        if cand.author_id == participant {
            return Ok(SubmissionOutcome::rejected(RejectReason::SelfVote));
        }
        let submissions = self.vote_submission_count(participant, candidate);
        if submissions >= self.config.gamma {
            return Ok(SubmissionOutcome::rejected(RejectReason::QuotaExhausted));
        }
        let current = self
            .current_votes
            .get(&candidate)
            .and_then(|m| m.get(&participant))
            .copied();
        if let Some(existing) = current {
            // A repeat submission may only change sides; re-sending the same
            // direction burns nothing and is turned away.
            if self.votes[&existing].direction == direction {
                return Ok(SubmissionOutcome::rejected(RejectReason::QuotaExhausted));
            }
        }

        if let Some(existing) = current {
            self.append_event(at, EventKind::VoteSuperseded { vote_id: existing });
        }
        let vote_id = VoteId(self.next_vote_id);
        let cause = self.append_event(
            at,
            EventKind::VoteSubmitted {
                vote_id,
                candidate_id: candidate,
                voter_id: participant,
                direction,
                supersedes: current,
            },
        );

        let mut outcome = SubmissionOutcome::accepted(candidate);
        let (delta, reason) = if submissions == 0 {
            (self.config.theta, LedgerReason::FirstSubmission)
        } else {
            (self.config.mu, LedgerReason::SecondSubmission)
        };
        self.push_ledger(participant, delta, reason, cause, at, &mut outcome);

        self.check_elimination(candidate, at, &mut outcome);
        self.check_triggers(candidate, at, &mut outcome);
        self.award_achievements(participant, at, &mut outcome);
        Ok(outcome)
    }

    /// Record a skip: the task re-enters this participant's pool only after
    /// every never-seen task is consumed.
    pub fn skip_task(
        &mut self,
        participant: ParticipantId,
        task: TaskId,
        at: Timestamp,
    ) -> Result<(), EngineError> {
        self.ensure_participant(participant)?;
        self.ensure_task(task)?;
        self.append_event(
            at,
            EventKind::TaskSkipped {
                participant_id: participant,
                task_id: task,
            },
        );
        Ok(())
    }

    // ------------------------------------------------------------------
    // Transaction internals
    // ------------------------------------------------------------------

    fn push_ledger(
        &mut self,
        participant: ParticipantId,
        delta: i64,
        reason: LedgerReason,
        cause_event: u64,
        at: Timestamp,
        outcome: &mut SubmissionOutcome,
    ) {
        let entry = PointLedgerEntry {
            seq: self.ledger.next_seq(),
            participant_id: participant,
            delta,
            reason,
            cause_event,
            at,
        };
        self.append_event(at, EventKind::LedgerAppended { entry: entry.clone() });
        outcome.ledger_entries.push(entry);
    }

    fn check_elimination(
        &mut self,
        candidate: CandidateId,
        at: Timestamp,
        outcome: &mut SubmissionOutcome,
    ) {
        let cand = &self.candidates[&candidate];
        if cand.status == CandidateStatus::Active && cand.point < self.config.beta {
            self.append_event(at, EventKind::CandidateEliminated { candidate_id: candidate });
            outcome.eliminations.push(candidate);
        }
    }

    fn check_triggers(
        &mut self,
        candidate: CandidateId,
        at: Timestamp,
        outcome: &mut SubmissionOutcome,
    ) {
        let cand = &self.candidates[&candidate];
        let author = cand.author_id;
        let point = cand.point;
        let (low_fired, high_fired) = (cand.low_trigger_fired, cand.high_trigger_fired);

        if point <= self.config.delta && !low_fired {
            let cause = self.append_event(
                at,
                EventKind::TriggerFired {
                    candidate_id: candidate,
                    trigger: TriggerKind::Low,
                },
            );
            outcome.triggers_fired.push(TriggerKind::Low);
            let downvoters = self.current_voters(candidate, VoteDirection::Down);
            for voter in &downvoters {
                self.push_ledger(
                    *voter,
                    self.config.mu,
                    LedgerReason::AgreementLowQuality,
                    cause,
                    at,
                    outcome,
                );
            }
            let penalty = self.config.rho * downvoters.len() as i64;
            self.push_ledger(author, penalty, LedgerReason::AuthorPenalty, cause, at, outcome);
        }

        if point >= self.config.eta && !high_fired {
            let cause = self.append_event(
                at,
                EventKind::TriggerFired {
                    candidate_id: candidate,
                    trigger: TriggerKind::High,
                },
            );
            outcome.triggers_fired.push(TriggerKind::High);
            let upvoters = self.current_voters(candidate, VoteDirection::Up);
            for voter in &upvoters {
                self.push_ledger(
                    *voter,
                    self.config.mu,
                    LedgerReason::AgreementHighQuality,
                    cause,
                    at,
                    outcome,
                );
            }
            let reward = self.config.rho.abs() * upvoters.len() as i64;
            self.push_ledger(author, reward, LedgerReason::AuthorReward, cause, at, outcome);
        }
    }

    /// Participants whose current (non-superseded) vote on the candidate has
    /// the given direction, in ascending id order.
    fn current_voters(&self, candidate: CandidateId, direction: VoteDirection) -> Vec<ParticipantId> {
        self.current_votes
            .get(&candidate)
            .map(|m| {
                m.iter()
                    .filter(|(_, vid)| self.votes[vid].direction == direction)
                    .map(|(p, _)| *p)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Achievements whose rule is satisfied and which the participant does
    /// not already hold.
    pub fn evaluate_achievements(&self, participant: ParticipantId) -> Vec<&Achievement> {
        let Some(p) = self.participants.get(&participant) else {
            return Vec::new();
        };
        self.config
            .achievements
            .iter()
            .filter(|a| !p.achievements.contains(&a.id) && self.rule_satisfied(&a.rule, participant))
            .collect()
    }

    fn rule_satisfied(&self, rule: &AchievementRule, participant: ParticipantId) -> bool {
        match rule {
            AchievementRule::DownvotesAtLeast { threshold } => {
                self.downvotes_cast.get(&participant).copied().unwrap_or(0) >= *threshold
            }
            AchievementRule::FirstAuthoredCandidate => {
                self.authored_total.get(&participant).copied().unwrap_or(0) >= 1
            }
            AchievementRule::ProgressComplete => {
                !self.tasks.is_empty()
                    && self
                        .dispatch
                        .get(&participant)
                        .is_some_and(|d| d.acted_tasks.len() == self.tasks.len())
            }
        }
    }

    fn award_achievements(
        &mut self,
        participant: ParticipantId,
        at: Timestamp,
        outcome: &mut SubmissionOutcome,
    ) {
        let newly: Vec<String> = self
            .evaluate_achievements(participant)
            .into_iter()
            .map(|a| a.id.clone())
            .collect();
        for id in newly {
            let cause = self.append_event(
                at,
                EventKind::AchievementAwarded {
                    participant_id: participant,
                    achievement_id: id.clone(),
                },
            );
            if self.config.achievement_bonus != 0 {
                self.push_ledger(
                    participant,
                    self.config.achievement_bonus,
                    LedgerReason::AchievementBonus,
                    cause,
                    at,
                    outcome,
                );
            }
            outcome.achievements_awarded.push(id);
        }
    }

    // ------------------------------------------------------------------
    // Event application (shared by commands and replay)
    // ------------------------------------------------------------------

    fn append_event(&mut self, at: Timestamp, kind: EventKind) -> u64 {
        let seq = self.log.len() as u64 + 1;
        let record = EventRecord {
            v: LOG_VERSION,
            seq,
            at,
            kind,
        };
        self.apply(&record)
            .expect("validated command emitted an inapplicable event");
        self.log.push(record);
        seq
    }

    fn apply(&mut self, record: &EventRecord) -> Result<(), String> {
        if !self.initialized && !matches!(record.kind, EventKind::ProjectCreated { .. }) {
            return Err("first record must be project-created".to_owned());
        }
        match &record.kind {
            EventKind::ProjectCreated { config } => {
                if self.initialized {
                    return Err("duplicate project-created".to_owned());
                }
                config.validate().map_err(|e| e.to_string())?;
                self.config = config.clone();
                self.initialized = true;
            }
            EventKind::TaskImported {
                task_id,
                informal_text,
            } => {
                if task_id.0 != self.next_task_id {
                    return Err(format!("unexpected task id {task_id}"));
                }
                if informal_text.is_empty() {
                    return Err("empty task text".to_owned());
                }
                if self.task_text_index.contains_key(informal_text) {
                    return Err("duplicate task text".to_owned());
                }
                self.tasks.insert(
                    *task_id,
                    Task {
                        id: *task_id,
                        informal_text: informal_text.clone(),
                        candidate_ids: Vec::new(),
                        created_at: record.at,
                    },
                );
                self.task_text_index.insert(informal_text.clone(), *task_id);
                self.active_counts.insert(*task_id, 0);
                self.task_interactions.insert(*task_id, 0);
                self.next_task_id += 1;
            }
            EventKind::ParticipantRegistered {
                participant_id,
                display_name,
                chat_ref,
            } => {
                if participant_id.0 != self.next_participant_id {
                    return Err(format!("unexpected participant id {participant_id}"));
                }
                if self.chat_index.contains_key(chat_ref) {
                    return Err("chat_ref already registered".to_owned());
                }
                self.participants.insert(
                    *participant_id,
                    Participant {
                        id: *participant_id,
                        display_name: display_name.clone(),
                        chat_ref: chat_ref.clone(),
                        registered_at: record.at,
                        achievements: BTreeSet::new(),
                        profile: BTreeMap::new(),
                    },
                );
                self.chat_index.insert(chat_ref.clone(), *participant_id);
                self.dispatch
                    .insert(*participant_id, DispatchState::new(*participant_id));
                self.next_participant_id += 1;
            }
            EventKind::CandidateSubmitted {
                candidate_id,
                task_id,
                author_id,
                text,
            } => {
                if candidate_id.0 != self.next_candidate_id {
                    return Err(format!("unexpected candidate id {candidate_id}"));
                }
                if !self.participants.contains_key(author_id) {
                    return Err(format!("unknown author {author_id}"));
                }
                if text.is_empty() {
                    return Err("empty candidate text".to_owned());
                }
                let alpha = self.config.alpha;
                let gamma = self.config.gamma;
                {
                    let task = self
                        .tasks
                        .get(task_id)
                        .ok_or_else(|| format!("unknown task {task_id}"))?;
                    if self.active_counts[&task.id] >= alpha {
                        return Err("visible candidate list already full".to_owned());
                    }
                }
                if self.authored_on_task(*author_id, *task_id) >= gamma {
                    return Err("author exceeded per-task candidate quota".to_owned());
                }
                let texts = self.candidate_texts.entry(*task_id).or_default();
                if !texts.insert(text.clone()) {
                    return Err("duplicate candidate text for task".to_owned());
                }
                self.candidates.insert(
                    *candidate_id,
                    Candidate {
                        id: *candidate_id,
                        task_id: *task_id,
                        author_id: *author_id,
                        text: text.clone(),
                        upvotes: 0,
                        downvotes: 0,
                        point: 0,
                        status: CandidateStatus::Active,
                        low_trigger_fired: false,
                        high_trigger_fired: false,
                        created_at: record.at,
                    },
                );
                self.tasks
                    .get_mut(task_id)
                    .expect("task checked above")
                    .candidate_ids
                    .push(*candidate_id);
                *self.active_counts.get_mut(task_id).expect("task counted") += 1;
                *self
                    .authored_per_task
                    .entry(*author_id)
                    .or_default()
                    .entry(*task_id)
                    .or_insert(0) += 1;
                *self.authored_total.entry(*author_id).or_insert(0) += 1;
                self.note_interaction(*author_id, *task_id);
                self.next_candidate_id += 1;
            }
            EventKind::VoteSuperseded { vote_id } => {
                let vote = self
                    .votes
                    .get_mut(vote_id)
                    .ok_or_else(|| format!("unknown vote {vote_id}"))?;
                if vote.superseded {
                    return Err(format!("vote {vote_id} already superseded"));
                }
                vote.superseded = true;
                let (candidate_id, voter_id, direction) =
                    (vote.candidate_id, vote.voter_id, vote.direction);
                self.adjust_tally(candidate_id, direction, -1)?;
                self.current_votes
                    .get_mut(&candidate_id)
                    .and_then(|m| m.remove(&voter_id));
            }
            EventKind::VoteSubmitted {
                vote_id,
                candidate_id,
                voter_id,
                direction,
                supersedes: _,
            } => {
                if vote_id.0 != self.next_vote_id {
                    return Err(format!("unexpected vote id {vote_id}"));
                }
                if !self.participants.contains_key(voter_id) {
                    return Err(format!("unknown voter {voter_id}"));
                }
                let gamma = self.config.gamma;
                let task_id = {
                    let cand = self
                        .candidates
                        .get(candidate_id)
                        .ok_or_else(|| format!("unknown candidate {candidate_id}"))?;
                    if cand.author_id == *voter_id {
                        return Err("self-vote".to_owned());
                    }
                    cand.task_id
                };
                if self.vote_submission_count(*voter_id, *candidate_id) >= gamma {
                    return Err("vote submission quota exceeded".to_owned());
                }
                self.votes.insert(
                    *vote_id,
                    Vote {
                        id: *vote_id,
                        candidate_id: *candidate_id,
                        voter_id: *voter_id,
                        direction: *direction,
                        at: record.at,
                        superseded: false,
                    },
                );
                self.candidate_votes
                    .entry(*candidate_id)
                    .or_default()
                    .push(*vote_id);
                self.current_votes
                    .entry(*candidate_id)
                    .or_default()
                    .insert(*voter_id, *vote_id);
                *self
                    .vote_submissions
                    .entry(*candidate_id)
                    .or_default()
                    .entry(*voter_id)
                    .or_insert(0) += 1;
                if *direction == VoteDirection::Down {
                    *self.downvotes_cast.entry(*voter_id).or_insert(0) += 1;
                }
                self.adjust_tally(*candidate_id, *direction, 1)?;
                self.note_interaction(*voter_id, task_id);
                self.next_vote_id += 1;
            }
            EventKind::CandidateEliminated { candidate_id } => {
                let beta = self.config.beta;
                let cand = self
                    .candidates
                    .get_mut(candidate_id)
                    .ok_or_else(|| format!("unknown candidate {candidate_id}"))?;
                if cand.status == CandidateStatus::Eliminated {
                    return Err(format!("candidate {candidate_id} already eliminated"));
                }
                if cand.point >= beta {
                    return Err("elimination without point below beta".to_owned());
                }
                cand.status = CandidateStatus::Eliminated;
                let task_id = cand.task_id;
                *self.active_counts.get_mut(&task_id).expect("task counted") -= 1;
            }
            EventKind::TriggerFired {
                candidate_id,
                trigger,
            } => {
                let (delta, eta) = (self.config.delta, self.config.eta);
                let cand = self
                    .candidates
                    .get_mut(candidate_id)
                    .ok_or_else(|| format!("unknown candidate {candidate_id}"))?;
                match trigger {
                    TriggerKind::Low => {
                        if cand.low_trigger_fired {
                            return Err("low trigger already latched".to_owned());
                        }
                        if cand.point > delta {
                            return Err("low trigger without point at or below delta".to_owned());
                        }
                        cand.low_trigger_fired = true;
                    }
                    TriggerKind::High => {
                        if cand.high_trigger_fired {
                            return Err("high trigger already latched".to_owned());
                        }
                        if cand.point < eta {
                            return Err("high trigger without point at or above eta".to_owned());
                        }
                        cand.high_trigger_fired = true;
                    }
                }
            }
            EventKind::LedgerAppended { entry } => {
                if !self.participants.contains_key(&entry.participant_id) {
                    return Err(format!("ledger entry for unknown participant {}", entry.participant_id));
                }
                self.ledger
                    .append(entry.clone())
                    .map_err(|e| e.to_string())?;
            }
            EventKind::TaskSkipped {
                participant_id,
                task_id,
            } => {
                if !self.tasks.contains_key(task_id) {
                    return Err(format!("unknown task {task_id}"));
                }
                let state = self
                    .dispatch
                    .get_mut(participant_id)
                    .ok_or_else(|| format!("unknown participant {participant_id}"))?;
                state.note_skip(*task_id);
            }
            EventKind::AchievementAwarded {
                participant_id,
                achievement_id,
            } => {
                let once = self
                    .config
                    .achievements
                    .iter()
                    .find(|a| &a.id == achievement_id)
                    .map(|a| a.once)
                    .unwrap_or(true);
                let p = self
                    .participants
                    .get_mut(participant_id)
                    .ok_or_else(|| format!("unknown participant {participant_id}"))?;
                if !p.achievements.insert(achievement_id.clone()) && once {
                    return Err(format!("achievement {achievement_id} awarded twice"));
                }
            }
        }
        Ok(())
    }

    fn adjust_tally(
        &mut self,
        candidate: CandidateId,
        direction: VoteDirection,
        by: i32,
    ) -> Result<(), String> {
        let cand = self
            .candidates
            .get_mut(&candidate)
            .ok_or_else(|| format!("unknown candidate {candidate}"))?;
        let slot = match direction {
            VoteDirection::Up => &mut cand.upvotes,
            VoteDirection::Down => &mut cand.downvotes,
        };
        let next = slot
            .checked_add_signed(by)
            .ok_or_else(|| "vote tally underflow".to_owned())?;
        *slot = next;
        cand.point = candidate_point(cand.upvotes, cand.downvotes);
        Ok(())
    }

    /// An accepted submission marks the task acted for the participant and
    /// bumps the task's interaction (label) count.
    fn note_interaction(&mut self, participant: ParticipantId, task: TaskId) {
        *self.task_interactions.entry(task).or_insert(0) += 1;
        self.dispatch
            .entry(participant)
            .or_insert_with(|| DispatchState::new(participant))
            .acted_tasks
            .insert(task);
    }

    // ------------------------------------------------------------------
    // Queries
    // ------------------------------------------------------------------

    /// Active candidates of a task, best point first; ties go to the older
    /// candidate, then the smaller id.
    pub fn visible_candidates(&self, task: TaskId) -> Result<Vec<&Candidate>, EngineError> {
        let task = self.tasks.get(&task).ok_or(EngineError::UnknownTask(task))?;
        let mut visible: Vec<&Candidate> = task
            .candidate_ids
            .iter()
            .map(|id| &self.candidates[id])
            .filter(|c| c.status == CandidateStatus::Active)
            .collect();
        visible.sort_by(|a, b| {
            b.point
                .cmp(&a.point)
                .then(a.created_at.cmp(&b.created_at))
                .then(a.id.cmp(&b.id))
        });
        Ok(visible)
    }

    pub fn config(&self) -> &ProjectConfig {
        &self.config
    }

    pub fn participants(&self) -> &BTreeMap<ParticipantId, Participant> {
        &self.participants
    }

    pub fn participant_for_chat(&self, chat_ref: &str) -> Option<ParticipantId> {
        self.chat_index.get(chat_ref).copied()
    }

    pub fn tasks(&self) -> &BTreeMap<TaskId, Task> {
        &self.tasks
    }

    pub fn task(&self, id: TaskId) -> Option<&Task> {
        self.tasks.get(&id)
    }

    pub fn task_for_text(&self, normalized_text: &str) -> Option<TaskId> {
        self.task_text_index.get(normalized_text).copied()
    }

    pub fn candidates(&self) -> &BTreeMap<CandidateId, Candidate> {
        &self.candidates
    }

    pub fn candidate(&self, id: CandidateId) -> Option<&Candidate> {
        self.candidates.get(&id)
    }

    pub fn votes(&self) -> &BTreeMap<VoteId, Vote> {
        &self.votes
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    /// Current point total for a participant.
    pub fn total_points(&self, participant: ParticipantId) -> i64 {
        self.ledger.total(participant)
    }

    /// Current level for a participant under the configured curve.
    pub fn level(&self, participant: ParticipantId) -> i64 {
        level_for_points(self.total_points(participant), &self.config.level_curve)
    }

    pub fn dispatch_state(&self, participant: ParticipantId) -> Option<&DispatchState> {
        self.dispatch.get(&participant)
    }

    /// Number of Active candidates on a task.
    pub fn active_count(&self, task: TaskId) -> u32 {
        self.active_counts.get(&task).copied().unwrap_or(0)
    }

    /// Accepted candidate + vote submissions on a task (its label count).
    pub fn interaction_count(&self, task: TaskId) -> u64 {
        self.task_interactions.get(&task).copied().unwrap_or(0)
    }

    pub fn authored_on_task(&self, participant: ParticipantId, task: TaskId) -> u32 {
        self.authored_per_task
            .get(&participant)
            .and_then(|m| m.get(&task))
            .copied()
            .unwrap_or(0)
    }

    pub fn vote_submission_count(&self, participant: ParticipantId, candidate: CandidateId) -> u32 {
        self.vote_submissions
            .get(&candidate)
            .and_then(|m| m.get(&participant))
            .copied()
            .unwrap_or(0)
    }

    /// The participant's current non-superseded vote on a candidate.
    pub fn current_vote(&self, participant: ParticipantId, candidate: CandidateId) -> Option<&Vote> {
        self.current_votes
            .get(&candidate)
            .and_then(|m| m.get(&participant))
            .map(|vid| &self.votes[vid])
    }

    pub fn log(&self) -> &[EventRecord] {
        &self.log
    }

    /// Records appended after the first `from` (for incremental persistence).
    pub fn log_since(&self, from: usize) -> &[EventRecord] {
        &self.log[from.min(self.log.len())..]
    }

    /// Deterministic JSON snapshot of the full state.
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("project state always serializes")
    }

    fn ensure_participant(&self, id: ParticipantId) -> Result<(), EngineError> {
        if self.participants.contains_key(&id) {
            Ok(())
        } else {
            Err(EngineError::UnknownParticipant(id))
        }
    }

    fn ensure_task(&self, id: TaskId) -> Result<(), EngineError> {
        if self.tasks.contains_key(&id) {
            Ok(())
        } else {
            Err(EngineError::UnknownTask(id))
        }
    }
}
