//! Corpus extraction and corpus-level BLEU.
//!
//! BLEU here is the classic corpus-level formulation: clipped n-gram
//! matches and totals are summed over all segments before dividing,
//! multi-reference clipping takes the maximum reference count per n-gram,
//! and no smoothing is applied — a zero aggregate precision zeroes the
//! score. An order with no n-grams anywhere in the corpus (all segments
//! shorter than n) contributes a vacuous precision of 1.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::engine::Project;
use crate::event::EventRecord;
use crate::inference::{run_em, VoteMatrix};
use crate::model::{CandidateId, CandidateStatus, TaskId};
use crate::text::tokenize;
use crate::time::Timestamp;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("task {0} has no references")]
    MissingReferences(TaskId),
    #[error("empty corpus: no hypotheses to score")]
    EmptyCorpus,
    #[error("empty project: no events to evaluate")]
    EmptyProject,
    #[error("replay failed: {0}")]
    Replay(String),
}

/// Expert reference renderings per task.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReferenceSet {
    refs: BTreeMap<TaskId, Vec<String>>,
}

impl ReferenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, task: TaskId, reference: String) {
        self.refs.entry(task).or_default().push(reference);
    }

    pub fn get(&self, task: TaskId) -> Option<&[String]> {
        self.refs.get(&task).map(|v| v.as_slice())
    }

    pub fn task_count(&self) -> usize {
        self.refs.len()
    }

    pub fn reference_count(&self) -> usize {
        self.refs.values().map(Vec::len).sum()
    }

    /// Average references per task, two decimals.
    pub fn avg_references_per_task(&self) -> String {
        crate::stats::ratio_decimals(self.reference_count() as u64, self.task_count() as u64, 2)
    }
}

/// Corpus-level BLEU breakdown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    pub score: f64,
    /// Modified n-gram precisions p_1..p_max_order.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    /// Total hypothesis token count.
    pub candidate_length: u64,
    /// Sum of per-segment effective reference lengths.
    pub effective_reference_length: u64,
    /// Uniform weights, 1/max_order each.
    pub weights: Vec<f64>,
}

impl BleuReport {
    fn zero(max_order: usize) -> Self {
        BleuReport {
            score: 0.0,
            precisions: vec![0.0; max_order],
            brevity_penalty: 0.0,
            candidate_length: 0,
            effective_reference_length: 0,
            weights: vec![1.0 / max_order as f64; max_order],
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts: HashMap<&[String], u64> = HashMap::new();
    if tokens.len() >= n && n > 0 {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Score a hypothesis corpus against a reference set.
///
/// Per segment, the effective reference length is the reference length
/// closest to the hypothesis length, with ties going to the shorter one.
pub fn corpus_bleu(
    hypotheses: &BTreeMap<TaskId, String>,
    references: &ReferenceSet,
    max_order: usize,
) -> Result<BleuReport, EvalError> {
    assert!(max_order >= 1, "max_order must be at least 1");
    if hypotheses.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }

    let mut matched = vec![0u64; max_order];
    let mut total = vec![0u64; max_order];
    let mut candidate_length = 0u64;
    let mut reference_length = 0u64;

    for (task, hypothesis) in hypotheses {
        let refs = references
            .get(*task)
            .filter(|r| !r.is_empty())
            .ok_or(EvalError::MissingReferences(*task))?;
        let hyp_tokens = tokenize(hypothesis);
        let ref_tokens: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();

        candidate_length += hyp_tokens.len() as u64;
        let effective = ref_tokens
            .iter()
            .map(|r| r.len())
            .min_by_key(|len| (len.abs_diff(hyp_tokens.len()), *len))
            .unwrap_or(0);
        reference_length += effective as u64;

        for (n_idx, n) in (1..=max_order).enumerate() {
            let hyp_counts = ngram_counts(&hyp_tokens, n);
            if hyp_counts.is_empty() {
                continue;
            }
            let ref_counts: Vec<HashMap<&[String], u64>> =
                ref_tokens.iter().map(|r| ngram_counts(r, n)).collect();
            for (ngram, count) in &hyp_counts {
                let clip = ref_counts
                    .iter()
                    .map(|rc| rc.get(ngram).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                matched[n_idx] += (*count).min(clip);
            }
            total[n_idx] += (hyp_tokens.len() - n + 1) as u64;
        }
    }

    let precisions: Vec<f64> = matched
        .iter()
        .zip(&total)
        .map(|(m, t)| {
            if *t == 0 {
                1.0 // vacuous: the corpus has no n-grams of this order
            } else {
                *m as f64 / *t as f64
            }
        })
        .collect();

    let brevity_penalty = if candidate_length == 0 {
        0.0
    } else if candidate_length > reference_length {
        1.0
    } else {
        (1.0 - reference_length as f64 / candidate_length as f64).exp()
    };

    let weights = vec![1.0 / max_order as f64; max_order];
    let score = if candidate_length == 0 || precisions.contains(&0.0) {
        0.0
    } else {
        let log_sum: f64 = precisions
            .iter()
            .zip(&weights)
            .map(|(p, w)| w * p.ln())
            .sum();
        brevity_penalty * log_sum.exp()
    };

    Ok(BleuReport {
        score,
        precisions,
        brevity_penalty,
        candidate_length,
        effective_reference_length: reference_length,
        weights,
    })
}

/// One extracted (informal, nth-best formal) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractPair {
    pub task_id: TaskId,
    pub informal: String,
    pub text: String,
    pub point: i64,
    pub belief: f64,
}

/// Rank-n corpus: each task's nth-best candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusExtract {
    pub rank: usize,
    pub pairs: Vec<ExtractPair>,
}

impl CorpusExtract {
    /// Hypotheses map for BLEU scoring.
    pub fn hypotheses(&self) -> BTreeMap<TaskId, String> {
        self.pairs
            .iter()
            .map(|p| (p.task_id, p.text.clone()))
            .collect()
    }
}

/// Belief of a candidate, with the symmetric prior for unlabeled ones.
fn belief_of(beliefs: &BTreeMap<CandidateId, f64>, candidate: CandidateId) -> f64 {
    beliefs.get(&candidate).copied().unwrap_or(0.5)
}

/// Extract each task's nth-ranked candidate (1-based). Candidates are
/// ordered by point, then EM belief, then age; eliminated candidates are
/// excluded, and tasks without an nth candidate are skipped.
pub fn extract_nth_corpus(
    project: &Project,
    beliefs: &BTreeMap<CandidateId, f64>,
    rank: usize,
) -> CorpusExtract {
    assert!(rank >= 1, "rank is 1-based");
    let mut pairs = Vec::new();
    for (task_id, task) in project.tasks() {
        let mut ranked: Vec<_> = task
            .candidate_ids
            .iter()
            .map(|id| &project.candidates()[id])
            .filter(|c| c.status == CandidateStatus::Active)
            .collect();
        ranked.sort_by(|a, b| {
            b.point
                .cmp(&a.point)
                .then(
                    belief_of(beliefs, b.id)
                        .partial_cmp(&belief_of(beliefs, a.id))
                        .unwrap_or(std::cmp::Ordering::Equal),
                )
                .then(a.created_at.cmp(&b.created_at))
                .then(a.id.cmp(&b.id))
        });
        if let Some(candidate) = ranked.get(rank - 1) {
            pairs.push(ExtractPair {
                task_id: *task_id,
                informal: task.informal_text.clone(),
                text: candidate.text.clone(),
                point: candidate.point,
                belief: belief_of(beliefs, candidate.id),
            });
        }
    }
    CorpusExtract { rank, pairs }
}

/// BLEU of the rank-1 extract rebuilt at each week boundary from the log
/// prefix up to that boundary.
///
/// The series runs to the last event by default; `horizon_weeks` extends or
/// truncates it (weeks after the last event repeat the final score).
/// Weeks with nothing to score yet report a zero-score entry.
pub fn weekly_bleu_series(
    log: &[EventRecord],
    references: &ReferenceSet,
    week_length_ms: i64,
    horizon_weeks: Option<usize>,
) -> Result<Vec<(u32, BleuReport)>, EvalError> {
    if log.is_empty() {
        return Err(EvalError::EmptyProject);
    }
    let start = log[0].at.as_millis();
    let end = log.last().expect("non-empty").at.as_millis();
    let span = (end - start).max(0);
    let weeks = horizon_weeks.unwrap_or_else(|| {
        let full = (span + week_length_ms - 1) / week_length_ms;
        (full.max(1)) as usize
    });

    let mut series = Vec::with_capacity(weeks);
    for week in 1..=weeks {
        let boundary = Timestamp::from_millis(start + week as i64 * week_length_ms);
        let prefix_len = log
            .iter()
            .position(|r| r.at > boundary)
            .unwrap_or(log.len());
        let prefix = &log[..prefix_len];
        let report = if prefix.is_empty() {
            BleuReport::zero(4)
        } else {
            let project =
                Project::replay(prefix).map_err(|e| EvalError::Replay(e.to_string()))?;
            let matrix = VoteMatrix::from_project(&project);
            let beliefs = if matrix.is_empty() {
                BTreeMap::new()
            } else {
                run_em(&matrix, &project.config().em)
                    .map_err(|e| EvalError::Replay(e.to_string()))?
                    .beliefs
            };
            let extract = extract_nth_corpus(&project, &beliefs, 1);
            let hypotheses = extract.hypotheses();
            if hypotheses.is_empty() {
                BleuReport::zero(4)
            } else {
                corpus_bleu(&hypotheses, references, 4)?
            }
        };
        series.push((week as u32, report));
    }
    Ok(series)
}
