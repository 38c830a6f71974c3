//! Truth inference over the vote matrix: a one-coin worker model fit with
//! expectation maximization, plus a majority-vote baseline and the
//! quality-by-label-count bucketing used in reports.
//!
//! Model: each worker j has a single accuracy a_j. The E-step weighs votes
//! by current accuracies to get per-candidate correctness beliefs; the
//! M-step re-estimates accuracies (and the prior) from the beliefs, with
//! Laplace-style smoothing so nothing locks to 0 or 1. Iteration stops when
//! beliefs stop moving.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::config::EmConfig;
use crate::engine::Project;
use crate::model::{CandidateId, ParticipantId, VoteDirection};

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("vote matrix is empty")]
    EmptyMatrix,
    #[error("worker {0} has no label count")]
    MismatchedWorkers(ParticipantId),
    #[error("invalid EM config: {0}")]
    InvalidConfig(String),
    #[error("invalid bucket edges: {0}")]
    InvalidEdges(String),
}

/// Sparse binary label matrix: `(candidate, worker) -> supports-correctness`.
/// Up votes map to 1, down votes to 0. Built from non-superseded votes,
/// including votes on eliminated candidates (negative evidence counts).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VoteMatrix {
    by_candidate: BTreeMap<CandidateId, BTreeMap<ParticipantId, bool>>,
}

impl VoteMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Set the label for a pair; at most one label per (candidate, worker).
    pub fn set(&mut self, candidate: CandidateId, worker: ParticipantId, supports: bool) {
        self.by_candidate
            .entry(candidate)
            .or_default()
            .insert(worker, supports);
    }

    pub fn from_project(project: &Project) -> Self {
        let mut matrix = VoteMatrix::new();
        for vote in project.votes().values() {
            if !vote.superseded {
                matrix.set(
                    vote.candidate_id,
                    vote.voter_id,
                    vote.direction == VoteDirection::Up,
                );
            }
        }
        matrix
    }

    pub fn is_empty(&self) -> bool {
        self.by_candidate.is_empty()
    }

    /// Total number of labels.
    pub fn label_count(&self) -> usize {
        self.by_candidate.values().map(|m| m.len()).sum()
    }

    pub fn candidate_count(&self) -> usize {
        self.by_candidate.len()
    }

    pub fn workers(&self) -> BTreeSet<ParticipantId> {
        self.by_candidate
            .values()
            .flat_map(|m| m.keys().copied())
            .collect()
    }

    /// Labels per worker.
    pub fn labels_per_worker(&self) -> BTreeMap<ParticipantId, u64> {
        let mut counts = BTreeMap::new();
        for labels in self.by_candidate.values() {
            for worker in labels.keys() {
                *counts.entry(*worker).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn iter(
        &self,
    ) -> impl Iterator<Item = (&CandidateId, &BTreeMap<ParticipantId, bool>)> {
        self.by_candidate.iter()
    }

    /// Matrix with every label inverted.
    pub fn inverted(&self) -> Self {
        let mut out = VoteMatrix::new();
        for (cand, labels) in &self.by_candidate {
            for (worker, label) in labels {
                out.set(*cand, *worker, !label);
            }
        }
        out
    }

    /// Whether the fit should run on the inverted matrix. A matrix and its
    /// inversion canonicalize to the same orientation, which makes
    /// label-flip symmetry of the fit exact instead of merely within
    /// rounding drift: the inverted landscape has exactly mirrored modes,
    /// and on symmetric inputs ulp noise would otherwise decide which mode
    /// each of the two runs falls into.
    fn fit_inverted(&self) -> bool {
        let mut ones = 0usize;
        let mut first = None;
        for labels in self.by_candidate.values() {
            for label in labels.values() {
                if first.is_none() {
                    first = Some(*label);
                }
                if *label {
                    ones += 1;
                }
            }
        }
        let zeros = self.label_count() - ones;
        if ones != zeros {
            ones < zeros
        } else {
            first.unwrap_or(false)
        }
    }
}

/// EM output: per-candidate correctness beliefs and per-worker accuracies,
/// all strictly inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmResult {
    pub beliefs: BTreeMap<CandidateId, f64>,
    pub worker_quality: BTreeMap<ParticipantId, f64>,
    pub iterations: u32,
    pub converged: bool,
    /// Observed-data log-likelihood under the parameters entering each
    /// iteration's E-step.
    pub log_likelihood: Vec<f64>,
    /// Log-likelihood plus the smoothing penalty; this is the objective the
    /// smoothed M-step maximizes, so it is non-decreasing by construction.
    pub penalized_log_likelihood: Vec<f64>,
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Fit the one-coin model. Deterministic: identical matrix and config give
/// bitwise-identical results. Fitting runs on a canonical label
/// orientation and mirrors the beliefs back, so inverting every input
/// label flips the beliefs exactly and leaves worker accuracies untouched.
pub fn run_em(matrix: &VoteMatrix, config: &EmConfig) -> Result<EmResult, InferenceError> {
    if matrix.is_empty() {
        return Err(InferenceError::EmptyMatrix);
    }
    config
        .validate()
        .map_err(|e| InferenceError::InvalidConfig(e.to_string()))?;

    let mirrored = matrix.fit_inverted();
    let canonical;
    let matrix = if mirrored {
        canonical = matrix.inverted();
        &canonical
    } else {
        matrix
    };

    let eps = config.epsilon;
    let workers = matrix.workers();
    let mut accuracy: BTreeMap<ParticipantId, f64> = workers
        .iter()
        .map(|w| (*w, config.init_accuracy))
        .collect();
    let mut prior = config.prior_correct;

    // Per-worker label index for the M-step.
    let mut worker_labels: BTreeMap<ParticipantId, Vec<(CandidateId, bool)>> = BTreeMap::new();
    for (cand, labels) in matrix.iter() {
        for (worker, label) in labels {
            worker_labels.entry(*worker).or_default().push((*cand, *label));
        }
    }

    let n_candidates = matrix.candidate_count() as f64;
    let mut beliefs: BTreeMap<CandidateId, f64> = BTreeMap::new();
    let mut previous: Option<BTreeMap<CandidateId, f64>> = None;
    let mut log_likelihood = Vec::new();
    let mut penalized = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=config.max_iterations {
        iterations = iter;

        // E-step: belief(i) from the current accuracies and prior. The
        // belief is computed through log-odds so that opposite labels from
        // equally accurate workers cancel exactly (symmetric cases give a
        // belief of exactly 0.5).
        let mut ll = 0.0;
        let prior_log_odds = (prior / (1.0 - prior)).ln();
        for (cand, labels) in matrix.iter() {
            let mut log_odds = prior_log_odds;
            let mut log_correct = prior.ln();
            let mut log_incorrect = (1.0 - prior).ln();
            for (worker, label) in labels {
                let a = accuracy[worker];
                let weight = (a / (1.0 - a)).ln();
                if *label {
                    log_odds += weight;
                    log_correct += a.ln();
                    log_incorrect += (1.0 - a).ln();
                } else {
                    log_odds -= weight;
                    log_correct += (1.0 - a).ln();
                    log_incorrect += a.ln();
                }
            }
            let belief = 1.0 / (1.0 + (-log_odds).exp());
            beliefs.insert(
                *cand,
                belief.clamp(f64::MIN_POSITIVE, 1.0_f64.next_down()),
            );
            ll += log_sum_exp(log_correct, log_incorrect);
        }
        log_likelihood.push(ll);
        let penalty: f64 = eps
            * (accuracy
                .values()
                .map(|a| a.ln() + (1.0 - a).ln())
                .sum::<f64>()
                + prior.ln()
                + (1.0 - prior).ln());
        penalized.push(ll + penalty);

        if let Some(prev) = &previous {
            let max_delta = beliefs
                .iter()
                .map(|(cand, b)| (b - prev[cand]).abs())
                .fold(0.0f64, f64::max);
            if max_delta < config.tolerance {
                converged = true;
            }
        }
        previous = Some(beliefs.clone());

        // M-step: re-estimate accuracies and the prior from the beliefs.
        // Runs even on the converged pass so the reported qualities are
        // consistent with the final beliefs.
        for (worker, labels) in &worker_labels {
            let mut agreement = 0.0;
            for (cand, label) in labels {
                let b = beliefs[cand];
                agreement += if *label { b } else { 1.0 - b };
            }
            let a = (eps + agreement) / (2.0 * eps + labels.len() as f64);
            accuracy.insert(*worker, a);
        }
        let belief_sum: f64 = beliefs.values().sum();
        prior = (eps + belief_sum) / (2.0 * eps + n_candidates);

        if converged {
            break;
        }
    }

    if mirrored {
        for belief in beliefs.values_mut() {
            *belief = (1.0 - *belief).clamp(f64::MIN_POSITIVE, 1.0_f64.next_down());
        }
    }

    Ok(EmResult {
        beliefs,
        worker_quality: accuracy,
        iterations,
        converged,
        log_likelihood,
        penalized_log_likelihood: penalized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MajorityLabel {
    Correct,
    Incorrect,
    Tie,
}

/// Per-candidate majority vote over the matrix labels.
pub fn majority_baseline(
    matrix: &VoteMatrix,
) -> Result<BTreeMap<CandidateId, MajorityLabel>, InferenceError> {
    if matrix.is_empty() {
        return Err(InferenceError::EmptyMatrix);
    }
    let mut out = BTreeMap::new();
    for (cand, labels) in matrix.iter() {
        let ups = labels.values().filter(|l| **l).count();
        let downs = labels.len() - ups;
        let label = match ups.cmp(&downs) {
            std::cmp::Ordering::Greater => MajorityLabel::Correct,
            std::cmp::Ordering::Less => MajorityLabel::Incorrect,
            std::cmp::Ordering::Equal => MajorityLabel::Tie,
        };
        out.insert(*cand, label);
    }
    Ok(out)
}

/// One label-count bucket and its mean estimated worker quality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityBucket {
    /// Inclusive lower label-count bound.
    pub lo: u64,
    /// Exclusive upper bound; `None` for the open-ended last bucket.
    pub hi: Option<u64>,
    pub workers: u32,
    pub mean_quality: f64,
}

/// Group workers by how many labels they provided and average their
/// estimated quality per bucket. Empty buckets are absent from the output.
pub fn quality_buckets(
    result: &EmResult,
    label_counts: &BTreeMap<ParticipantId, u64>,
    edges: &[u64],
) -> Result<Vec<QualityBucket>, InferenceError> {
    if edges.is_empty() {
        return Err(InferenceError::InvalidEdges("no edges given".to_owned()));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(InferenceError::InvalidEdges(
            "edges must be strictly increasing".to_owned(),
        ));
    }

    let mut sums = vec![(0u32, 0.0f64); edges.len()];
    for (worker, quality) in &result.worker_quality {
        let count = *label_counts
            .get(worker)
            .ok_or(InferenceError::MismatchedWorkers(*worker))?;
        let Some(bucket) = edges.iter().rposition(|edge| count >= *edge) else {
            continue; // below the first edge
        };
        sums[bucket].0 += 1;
        sums[bucket].1 += quality;
    }

    Ok(sums
        .into_iter()
        .enumerate()
        .filter(|(_, (n, _))| *n > 0)
        .map(|(i, (n, sum))| QualityBucket {
            lo: edges[i],
            hi: edges.get(i + 1).copied(),
            workers: n,
            mean_quality: sum / n as f64,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EmConfig;

    fn cand(id: u64) -> CandidateId {
        CandidateId(id)
    }

    fn worker(id: u64) -> ParticipantId {
        ParticipantId(id)
    }

    #[test]
    fn unanimous_first_e_step_matches_hand_bayes() {
        // Oracle, computed independently of run_em: three workers at
        // accuracy 0.7 all label 1, prior 0.5:
        //   P(correct) = 0.5 * 0.7^3 / (0.5 * 0.7^3 + 0.5 * 0.3^3)
        let p_correct = 0.5 * 0.7f64.powi(3);
        let p_incorrect = 0.5 * 0.3f64.powi(3);
        let oracle = p_correct / (p_correct + p_incorrect);
        assert!((oracle - 0.9270).abs() < 1e-4);

        let mut matrix = VoteMatrix::new();
        for w in 1..=3 {
            matrix.set(cand(1), worker(w), true);
        }
        let config = EmConfig {
            max_iterations: 1,
            ..EmConfig::default()
        };
        let result = run_em(&matrix, &config).unwrap();
        assert!((result.beliefs[&cand(1)] - oracle).abs() < 1e-12);
    }

    #[test]
    fn symmetric_votes_stay_at_half() {
        let mut matrix = VoteMatrix::new();
        matrix.set(cand(1), worker(1), true);
        matrix.set(cand(1), worker(2), false);
        let result = run_em(&matrix, &EmConfig::default()).unwrap();
        assert_eq!(result.beliefs[&cand(1)], 0.5);
        assert!(result.converged);
        // Symmetric evidence keeps both workers at the same accuracy.
        assert_eq!(
            result.worker_quality[&worker(1)],
            result.worker_quality[&worker(2)]
        );
    }

    #[test]
    fn deterministic_bitwise() {
        let mut matrix = VoteMatrix::new();
        for c in 1..=5 {
            for w in 1..=4 {
                matrix.set(cand(c), worker(w), (c + w) % 3 != 0);
            }
        }
        let a = run_em(&matrix, &EmConfig::default()).unwrap();
        let b = run_em(&matrix, &EmConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn outputs_stay_strictly_inside_unit_interval() {
        let mut matrix = VoteMatrix::new();
        for w in 1..=6 {
            matrix.set(cand(1), worker(w), true);
            matrix.set(cand(2), worker(w), false);
        }
        let result = run_em(&matrix, &EmConfig::default()).unwrap();
        for b in result.beliefs.values() {
            assert!(*b > 0.0 && *b < 1.0);
        }
        for a in result.worker_quality.values() {
            assert!(*a > 0.0 && *a < 1.0);
        }
    }

    #[test]
    fn empty_matrix_is_an_error() {
        assert_eq!(
            run_em(&VoteMatrix::new(), &EmConfig::default()).unwrap_err(),
            InferenceError::EmptyMatrix
        );
    }

    #[test]
    fn majority_examples() {
        let mut matrix = VoteMatrix::new();
        for w in 1..=3 {
            matrix.set(cand(1), worker(w), true);
        }
        matrix.set(cand(1), worker(4), false);
        matrix.set(cand(2), worker(1), true);
        matrix.set(cand(2), worker(2), false);
        matrix.set(cand(3), worker(1), false);
        let labels = majority_baseline(&matrix).unwrap();
        assert_eq!(labels[&cand(1)], MajorityLabel::Correct);
        assert_eq!(labels[&cand(2)], MajorityLabel::Tie);
        assert_eq!(labels[&cand(3)], MajorityLabel::Incorrect);
    }

    #[test]
    fn buckets_average_quality() {
        let mut matrix = VoteMatrix::new();
        for c in 1..=12 {
            matrix.set(cand(c), worker(1), true);
            if c <= 10 {
                matrix.set(cand(c), worker(2), c % 2 == 0);
            }
        }
        let result = run_em(&matrix, &EmConfig::default()).unwrap();
        let counts = matrix.labels_per_worker();
        let buckets = quality_buckets(&result, &counts, &[0, 20]).unwrap();
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets[0].lo, 0);
        assert_eq!(buckets[0].hi, Some(20));
        assert_eq!(buckets[0].workers, 2);
        let mean = (result.worker_quality[&worker(1)] + result.worker_quality[&worker(2)]) / 2.0;
        assert!((buckets[0].mean_quality - mean).abs() < 1e-12);

        // single-worker bucket mean equals that worker's quality
        let solo = quality_buckets(&result, &counts, &[11]).unwrap();
        assert_eq!(solo.len(), 1);
        assert_eq!(solo[0].workers, 1);
        assert!((solo[0].mean_quality - result.worker_quality[&worker(1)]).abs() < 1e-12);

        // empty open bucket is absent
        let none = quality_buckets(&result, &counts, &[0, 100]).unwrap();
        assert_eq!(none.len(), 1);
        assert_eq!(none[0].hi, Some(100));
    }

    #[test]
    fn bucket_mismatch_is_an_error() {
        let mut matrix = VoteMatrix::new();
        matrix.set(cand(1), worker(1), true);
        let result = run_em(&matrix, &EmConfig::default()).unwrap();
        let empty = BTreeMap::new();
        assert_eq!(
            quality_buckets(&result, &empty, &[0]).unwrap_err(),
            InferenceError::MismatchedWorkers(worker(1))
        );
    }
}
