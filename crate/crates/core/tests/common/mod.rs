//! Shared test support: a seeded random-operation driver for the flow
//! state machine with an independent oracle that recounts every invariant
//! from primitive records.
#![allow(dead_code)] // each test binary uses a different slice of this module

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crowdnorm_core::ledger::LedgerReason;
use crowdnorm_core::model::{
    CandidateId, CandidateStatus, ParticipantId, RejectReason, TaskId, TriggerKind, VoteDirection,
};
use crowdnorm_core::sim::substream;
use crowdnorm_core::{Project, ProjectConfig, Timestamp};

pub mod golden;

pub struct FlowHarness {
    pub project: Project,
    pub rng: ChaCha12Rng,
    participants: Vec<ParticipantId>,
    tasks: Vec<TaskId>,
    clock_ms: i64,
    // Oracle state, tracked independently of engine internals.
    eliminated: BTreeSet<CandidateId>,
    trigger_seen: BTreeMap<(CandidateId, u8), u32>,
    vote_subs: BTreeMap<(ParticipantId, CandidateId), u32>,
    authored: BTreeMap<(ParticipantId, TaskId), u32>,
    expected_ledger_sum: i64,
    pub accepted_events: u64,
    pub violations: Vec<String>,
}

impl FlowHarness {
    pub fn new(seed: u64, participants: u64, tasks: u64) -> Self {
        let mut project = Project::new(ProjectConfig::default(), Timestamp::from_millis(0)).unwrap();
        let task_ids: Vec<TaskId> = (0..tasks)
            .map(|i| {
                project
                    .import_task(&format!("sentence number {i}"), Timestamp::from_millis(1))
                    .unwrap()
            })
            .collect();
        let participant_ids: Vec<ParticipantId> = (0..participants)
            .map(|i| {
                project.register_participant(
                    &format!("p{i}"),
                    &format!("chat:{i}"),
                    Timestamp::from_millis(2),
                )
            })
            .collect();
        FlowHarness {
            project,
            rng: substream(seed, "flow-harness", participants, tasks),
            participants: participant_ids,
            tasks: task_ids,
            clock_ms: 10,
            eliminated: BTreeSet::new(),
            trigger_seen: BTreeMap::new(),
            vote_subs: BTreeMap::new(),
            authored: BTreeMap::new(),
            expected_ledger_sum: 0,
            accepted_events: 0,
            violations: Vec::new(),
        }
    }

    fn now(&mut self) -> Timestamp {
        self.clock_ms += 1;
        Timestamp::from_millis(self.clock_ms)
    }

    fn fail(&mut self, msg: String) {
        self.violations.push(msg);
    }

    /// Recount a candidate's tallies from the raw vote records.
    fn recount(&self, candidate: CandidateId) -> (u32, u32) {
        let mut up = 0;
        let mut down = 0;
        for vote in self.project.votes().values() {
            if vote.candidate_id == candidate && !vote.superseded {
                match vote.direction {
                    VoteDirection::Up => up += 1,
                    VoteDirection::Down => down += 1,
                }
            }
        }
        (up, down)
    }

    fn check_candidate(&mut self, candidate: CandidateId) {
        let Some(cand) = self.project.candidate(candidate) else {
            return;
        };
        let (id, task, point, status) = (cand.id, cand.task_id, cand.point, cand.status);
        let (up, down) = self.recount(candidate);
        let recounted = i64::from(up) - i64::from(down);
        if point != recounted {
            self.fail(format!("candidate {id} point {point} != recount {recounted}"));
        }
        let alpha = self.project.config().alpha as usize;
        let visible: Vec<CandidateId> = self
            .project
            .visible_candidates(task)
            .unwrap()
            .iter()
            .map(|c| c.id)
            .collect();
        if visible.len() > alpha {
            self.fail(format!("task {task} visible {} > alpha", visible.len()));
        }
        if self.eliminated.contains(&id) {
            if status != CandidateStatus::Eliminated {
                self.fail(format!("candidate {id} reappeared after elimination"));
            }
            if visible.contains(&id) {
                self.fail(format!("eliminated candidate {id} is visible"));
            }
        }
        if status == CandidateStatus::Eliminated {
            let beta = self.project.config().beta;
            if recounted >= beta {
                self.fail(format!(
                    "candidate {id} eliminated at point {recounted} >= beta {beta}"
                ));
            }
            self.eliminated.insert(id);
        }
    }

    /// One random operation against the engine, with oracle bookkeeping.
    pub fn step(&mut self) {
        let config = self.project.config().clone();
        let op = self.rng.gen_range(0..100u32);
        let p = self.participants[self.rng.gen_range(0..self.participants.len())];
        if op < 35 {
            // Candidate submission; texts drawn from a small pool so
            // duplicates and full lists occur often.
            let task = self.tasks[self.rng.gen_range(0..self.tasks.len())];
            let text = format!("rendering {}", self.rng.gen_range(0..12u32));
            let at = self.now();
            let authored = self.authored.get(&(p, task)).copied().unwrap_or(0);
            let visible_before = self.project.visible_candidates(task).unwrap().len();
            let outcome = self.project.submit_candidate(p, task, &text, at).unwrap();
            if outcome.accepted {
                self.accepted_events += 1;
                if visible_before >= config.alpha as usize {
                    self.fail(format!("accepted candidate into full list on {task}"));
                }
                if authored >= config.gamma {
                    self.fail(format!("author quota exceeded on {task}"));
                }
                *self.authored.entry((p, task)).or_insert(0) += 1;
                let expected = if authored == 0 { config.theta } else { config.mu };
                let got: i64 = outcome
                    .ledger_entries
                    .iter()
                    .filter(|e| {
                        matches!(
                            e.reason,
                            LedgerReason::FirstSubmission | LedgerReason::SecondSubmission
                        )
                    })
                    .map(|e| e.delta)
                    .sum();
                if got != expected {
                    self.fail(format!("candidate reward {got} != expected {expected}"));
                }
                self.expected_ledger_sum += outcome.ledger_entries.iter().map(|e| e.delta).sum::<i64>();
                self.check_candidate(outcome.candidate_id.unwrap());
            } else if outcome.rejection == Some(RejectReason::QuotaExhausted)
                && authored < config.gamma
            {
                self.fail("quota rejection below gamma".to_owned());
            }
        } else if op < 90 {
            // Vote on a random known candidate (often a recent one). Bias
            // direction per candidate parity so both triggers fire.
            let n = self.project.candidates().len() as u64;
            if n == 0 {
                return;
            }
            let candidate = CandidateId(self.rng.gen_range(0..n) + 1);
            let up_bias = if candidate.0.is_multiple_of(2) { 70 } else { 30 };
            let direction = if self.rng.gen_range(0..100) < up_bias {
                VoteDirection::Up
            } else {
                VoteDirection::Down
            };
            let subs_before = self.vote_subs.get(&(p, candidate)).copied().unwrap_or(0);
            let was_eliminated = self.eliminated.contains(&candidate);
            let at = self.now();
            let outcome = self.project.submit_vote(p, candidate, direction, at).unwrap();
            if outcome.accepted {
                self.accepted_events += 1;
                if was_eliminated {
                    self.fail(format!("vote accepted on eliminated {candidate}"));
                }
                if subs_before >= config.gamma {
                    self.fail(format!("vote quota exceeded on {candidate}"));
                }
                *self.vote_subs.entry((p, candidate)).or_insert(0) += 1;
                let expected = if subs_before == 0 { config.theta } else { config.mu };
                let got: i64 = outcome
                    .ledger_entries
                    .iter()
                    .filter(|e| {
                        e.participant_id == p
                            && matches!(
                                e.reason,
                                LedgerReason::FirstSubmission | LedgerReason::SecondSubmission
                            )
                    })
                    .map(|e| e.delta)
                    .sum();
                if got != expected {
                    self.fail(format!("vote reward {got} != expected {expected}"));
                }
                for trigger in &outcome.triggers_fired {
                    let key = (candidate, *trigger as u8);
                    let count = self.trigger_seen.entry(key).or_insert(0);
                    *count += 1;
                    if *count > 1 {
                        self.fail(format!("trigger {trigger:?} fired twice on {candidate}"));
                    }
                    // Trigger economics recomputed from raw votes.
                    let (up, down) = self.recount(candidate);
                    let (voters, author_delta, voter_reason) = match trigger {
                        TriggerKind::Low => {
                            (down, config.rho * i64::from(down), LedgerReason::AgreementLowQuality)
                        }
                        TriggerKind::High => (
                            up,
                            config.rho.abs() * i64::from(up),
                            LedgerReason::AgreementHighQuality,
                        ),
                    };
                    let voter_entries = outcome
                        .ledger_entries
                        .iter()
                        .filter(|e| e.reason == voter_reason)
                        .count();
                    if voter_entries as u32 != voters {
                        self.fail(format!(
                            "trigger paid {voter_entries} voters, expected {voters}"
                        ));
                    }
                    let author_entries: i64 = outcome
                        .ledger_entries
                        .iter()
                        .filter(|e| {
                            matches!(
                                e.reason,
                                LedgerReason::AuthorPenalty | LedgerReason::AuthorReward
                            ) && match trigger {
                                TriggerKind::Low => e.reason == LedgerReason::AuthorPenalty,
                                TriggerKind::High => e.reason == LedgerReason::AuthorReward,
                            }
                        })
                        .map(|e| e.delta)
                        .sum();
                    if author_entries != author_delta {
                        self.fail(format!(
                            "trigger author delta {author_entries} != expected {author_delta}"
                        ));
                    }
                }
                self.expected_ledger_sum +=
                    outcome.ledger_entries.iter().map(|e| e.delta).sum::<i64>();
                self.check_candidate(candidate);
            } else if outcome.rejection == Some(RejectReason::EliminatedTarget) && !was_eliminated {
                // The engine knew before the oracle; sync the oracle.
                self.eliminated.insert(candidate);
            }
        } else {
            let task = self.tasks[self.rng.gen_range(0..self.tasks.len())];
            let ledger_before = self.project.ledger().entries().len();
            let at = self.now();
            self.project.skip_task(p, task, at).unwrap();
            self.accepted_events += 1;
            if self.project.ledger().entries().len() != ledger_before {
                self.fail("skip produced ledger entries".to_owned());
            }
        }
    }

    /// Full-state recount: every candidate, every ledger total, ledger
    /// closure against the oracle's accumulated expectation.
    pub fn full_check(&mut self) {
        let candidates: Vec<CandidateId> = self.project.candidates().keys().copied().collect();
        for candidate in candidates {
            self.check_candidate(candidate);
        }
        for p in self.participants.clone() {
            let total = self.project.total_points(p);
            let recomputed = self.project.ledger().recompute_total(p);
            if total != recomputed {
                self.fail(format!("participant {p} total {total} != recount {recomputed}"));
            }
        }
        let grand = self.project.ledger().grand_total();
        if grand != self.expected_ledger_sum {
            self.fail(format!(
                "ledger sum {grand} != oracle expectation {}",
                self.expected_ledger_sum
            ));
        }
        let gamma = self.project.config().gamma;
        let over_quota: Vec<String> = self
            .vote_subs
            .iter()
            .filter(|(_, subs)| **subs > gamma)
            .map(|((p, c), subs)| format!("pair ({p},{c}) has {subs} submissions"))
            .collect();
        for msg in over_quota {
            self.fail(msg);
        }
    }
}
