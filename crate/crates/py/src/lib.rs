//! Python bindings: the scoring math, tokenizer, BLEU scorer, EM truth
//! inference, callback codec, the crowd simulator and a full engine handle.
//!
//! The `Engine` class drives an in-memory project with an internal
//! millisecond clock that advances by one per operation, so scripted
//! sessions are fully deterministic.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use crowdnorm_core::catalog::MessageCatalog;
use crowdnorm_core::dispatch;
use crowdnorm_core::eval::{self, ReferenceSet};
use crowdnorm_core::event::{encode_line, read_log};
use crowdnorm_core::gateway::codec::{self, CallbackPayload};
use crowdnorm_core::inference::{self, VoteMatrix};
use crowdnorm_core::model::{CandidateId, ParticipantId, TaskId, VoteDirection};
use crowdnorm_core::sim;
use crowdnorm_core::stats::project_stats;
use crowdnorm_core::{points, text, EmConfig, Project, ProjectConfig, Timestamp};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Net candidate point: upvotes minus downvotes.
#[pyfunction]
fn candidate_point(upvotes: u32, downvotes: u32) -> i64 {
    points::candidate_point(upvotes, downvotes)
}

/// Participant level under the default linear curve.
#[pyfunction]
fn level_for_points(points_total: i64) -> i64 {
    points::default_level(points_total)
}

/// BLEU tokenization: NFC, whitespace split, punctuation separated.
#[pyfunction]
fn tokenize(text_in: &str) -> Vec<String> {
    text::tokenize(text_in)
}

/// Canonical text form used for duplicate detection.
#[pyfunction]
fn normalize(text_in: &str) -> String {
    text::normalize(text_in)
}

/// Encode a callback payload, e.g. ("vote-up", 123) -> "v+|123".
#[pyfunction]
#[pyo3(signature = (action, target=None))]
fn encode_callback(action: &str, target: Option<u64>) -> PyResult<String> {
    let payload = match (action, target) {
        ("vote-up", Some(id)) => CallbackPayload::VoteUp {
            candidate: CandidateId(id),
        },
        ("vote-down", Some(id)) => CallbackPayload::VoteDown {
            candidate: CandidateId(id),
        },
        ("new-candidate-prompt", Some(id)) => CallbackPayload::NewCandidatePrompt {
            task: TaskId(id),
        },
        ("skip", Some(id)) => CallbackPayload::Skip { task: TaskId(id) },
        ("next-task", None) => CallbackPayload::NextTask,
        ("show-leaderboard", None) => CallbackPayload::ShowLeaderboard,
        ("show-progress", None) => CallbackPayload::ShowProgress,
        _ => return Err(value_err(format!("invalid payload: {action} {target:?}"))),
    };
    Ok(codec::encode(&payload))
}

/// Decode callback data into (action, target-or-None).
#[pyfunction]
fn decode_callback(data: &str) -> PyResult<(String, Option<u64>)> {
    let payload = codec::decode(data).map_err(value_err)?;
    Ok(match payload {
        CallbackPayload::VoteUp { candidate } => ("vote-up".into(), Some(candidate.0)),
        CallbackPayload::VoteDown { candidate } => ("vote-down".into(), Some(candidate.0)),
        CallbackPayload::NewCandidatePrompt { task } => {
            ("new-candidate-prompt".into(), Some(task.0))
        }
        CallbackPayload::Skip { task } => ("skip".into(), Some(task.0)),
        CallbackPayload::NextTask => ("next-task".into(), None),
        CallbackPayload::ShowLeaderboard => ("show-leaderboard".into(), None),
        CallbackPayload::ShowProgress => ("show-progress".into(), None),
    })
}

/// Corpus-level BLEU breakdown.
#[pyclass(name = "BleuReport")]
#[derive(Clone)]
struct PyBleuReport {
    #[pyo3(get)]
    score: f64,
    #[pyo3(get)]
    precisions: Vec<f64>,
    #[pyo3(get)]
    brevity_penalty: f64,
    #[pyo3(get)]
    candidate_length: u64,
    #[pyo3(get)]
    effective_reference_length: u64,
}

#[pymethods]
impl PyBleuReport {
    fn __repr__(&self) -> String {
        format!(
            "BleuReport(score={:.4}, bp={:.4}, c={}, r={})",
            self.score, self.brevity_penalty, self.candidate_length, self.effective_reference_length
        )
    }
}

/// Corpus BLEU over parallel lists: hypotheses[i] is scored against
/// references[i] (one or more reference renderings per segment).
#[pyfunction]
#[pyo3(signature = (hypotheses, references, max_order=4))]
fn corpus_bleu(
    hypotheses: Vec<String>,
    references: Vec<Vec<String>>,
    max_order: usize,
) -> PyResult<PyBleuReport> {
    if hypotheses.len() != references.len() {
        return Err(value_err("hypotheses and references must align"));
    }
    let mut hyps = BTreeMap::new();
    let mut refs = ReferenceSet::new();
    for (i, (hyp, segment_refs)) in hypotheses.into_iter().zip(references).enumerate() {
        let task = TaskId(i as u64 + 1);
        hyps.insert(task, hyp);
        for r in segment_refs {
            refs.insert(task, r);
        }
    }
    let report = eval::corpus_bleu(&hyps, &refs, max_order).map_err(value_err)?;
    Ok(PyBleuReport {
        score: report.score,
        precisions: report.precisions,
        brevity_penalty: report.brevity_penalty,
        candidate_length: report.candidate_length,
        effective_reference_length: report.effective_reference_length,
    })
}

/// EM fit summary.
#[pyclass(name = "EmResult")]
struct PyEmResult {
    #[pyo3(get)]
    beliefs: BTreeMap<u64, f64>,
    #[pyo3(get)]
    worker_quality: BTreeMap<u64, f64>,
    #[pyo3(get)]
    iterations: u32,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    log_likelihood: Vec<f64>,
}

/// One-coin EM over (candidate, worker, supports) labels.
#[pyfunction]
#[pyo3(signature = (labels, init_accuracy=0.7, epsilon=0.01, tolerance=1e-6, max_iterations=100))]
fn run_em(
    labels: Vec<(u64, u64, bool)>,
    init_accuracy: f64,
    epsilon: f64,
    tolerance: f64,
    max_iterations: u32,
) -> PyResult<PyEmResult> {
    let mut matrix = VoteMatrix::new();
    for (candidate, worker, supports) in labels {
        matrix.set(CandidateId(candidate), ParticipantId(worker), supports);
    }
    let config = EmConfig {
        init_accuracy,
        epsilon,
        tolerance,
        max_iterations,
        ..EmConfig::default()
    };
    let result = inference::run_em(&matrix, &config).map_err(value_err)?;
    Ok(PyEmResult {
        beliefs: result.beliefs.iter().map(|(c, b)| (c.0, *b)).collect(),
        worker_quality: result.worker_quality.iter().map(|(w, q)| (w.0, *q)).collect(),
        iterations: result.iterations,
        converged: result.converged,
        log_likelihood: result.log_likelihood,
    })
}

/// Majority-vote baseline: candidate -> "correct" | "incorrect" | "tie".
#[pyfunction]
fn majority_baseline(labels: Vec<(u64, u64, bool)>) -> PyResult<BTreeMap<u64, String>> {
    let mut matrix = VoteMatrix::new();
    for (candidate, worker, supports) in labels {
        matrix.set(CandidateId(candidate), ParticipantId(worker), supports);
    }
    let result = inference::majority_baseline(&matrix).map_err(value_err)?;
    Ok(result
        .into_iter()
        .map(|(c, label)| {
            let name = match label {
                inference::MajorityLabel::Correct => "correct",
                inference::MajorityLabel::Incorrect => "incorrect",
                inference::MajorityLabel::Tie => "tie",
            };
            (c.0, name.to_owned())
        })
        .collect())
}

/// Run a seeded crowd simulation from TOML config text; returns the report
/// as a JSON string.
#[pyfunction]
fn simulate(config_toml: &str) -> PyResult<String> {
    let config: sim::SimConfig = toml::from_str(config_toml).map_err(value_err)?;
    let output = sim::run_simulation(&config).map_err(runtime_err)?;
    serde_json::to_string_pretty(&output.report).map_err(runtime_err)
}

/// Deterministic synthetic ground-truth corpus (informal -> formal).
#[pyfunction]
fn synthetic_ground_truth(n_tasks: usize, seed: u64) -> BTreeMap<String, String> {
    sim::synthetic_ground_truth(n_tasks, seed)
}

/// Outcome of a candidate or vote submission.
#[pyclass(name = "Outcome")]
struct PyOutcome {
    #[pyo3(get)]
    accepted: bool,
    #[pyo3(get)]
    rejection: Option<String>,
    #[pyo3(get)]
    candidate_id: Option<u64>,
    #[pyo3(get)]
    points_delta: i64,
    #[pyo3(get)]
    eliminations: Vec<u64>,
    #[pyo3(get)]
    triggers_fired: Vec<String>,
    #[pyo3(get)]
    achievements_awarded: Vec<String>,
}

impl From<crowdnorm_core::SubmissionOutcome> for PyOutcome {
    fn from(outcome: crowdnorm_core::SubmissionOutcome) -> Self {
        PyOutcome {
            accepted: outcome.accepted,
            rejection: outcome.rejection.map(|r| r.to_string()),
            candidate_id: outcome.candidate_id.map(|c| c.0),
            points_delta: outcome.ledger_entries.iter().map(|e| e.delta).sum(),
            eliminations: outcome.eliminations.iter().map(|c| c.0).collect(),
            triggers_fired: outcome
                .triggers_fired
                .iter()
                .map(|t| format!("{t:?}").to_lowercase())
                .collect(),
            achievements_awarded: outcome.achievements_awarded,
        }
    }
}

/// An in-memory project with a deterministic internal clock.
#[pyclass]
struct Engine {
    project: Project,
    clock_ms: i64,
}

impl Engine {
    fn tick(&mut self) -> Timestamp {
        self.clock_ms += 1;
        Timestamp::from_millis(self.clock_ms)
    }
}

#[pymethods]
impl Engine {
    /// Create an engine, optionally from project-config TOML text.
    #[new]
    #[pyo3(signature = (config_toml=None))]
    fn new(config_toml: Option<&str>) -> PyResult<Self> {
        let config = match config_toml {
            Some(text) => toml::from_str::<ProjectConfig>(text).map_err(value_err)?,
            None => ProjectConfig::default(),
        };
        let project = Project::new(config, Timestamp::from_millis(0)).map_err(value_err)?;
        Ok(Engine {
            project,
            clock_ms: 0,
        })
    }

    /// Rebuild an engine from event-log lines.
    #[staticmethod]
    fn replay(log_lines: Vec<String>) -> PyResult<Self> {
        let joined = log_lines.join("\n");
        let records = read_log(joined.as_bytes()).map_err(value_err)?;
        let project = Project::replay(&records).map_err(value_err)?;
        let clock_ms = records.last().map(|r| r.at.as_millis()).unwrap_or(0);
        Ok(Engine { project, clock_ms })
    }

    fn register_participant(&mut self, display_name: &str, chat_ref: &str) -> u64 {
        let at = self.tick();
        self.project.register_participant(display_name, chat_ref, at).0
    }

    /// Returns the new task id, or None for blank/duplicate sentences.
    fn import_task(&mut self, informal_text: &str) -> Option<u64> {
        let at = self.tick();
        self.project.import_task(informal_text, at).map(|t| t.0)
    }

    fn submit_candidate(
        &mut self,
        participant: u64,
        task: u64,
        text: &str,
    ) -> PyResult<PyOutcome> {
        let at = self.tick();
        self.project
            .submit_candidate(ParticipantId(participant), TaskId(task), text, at)
            .map(PyOutcome::from)
            .map_err(value_err)
    }

    fn submit_vote(&mut self, participant: u64, candidate: u64, up: bool) -> PyResult<PyOutcome> {
        let direction = if up { VoteDirection::Up } else { VoteDirection::Down };
        let at = self.tick();
        self.project
            .submit_vote(ParticipantId(participant), CandidateId(candidate), direction, at)
            .map(PyOutcome::from)
            .map_err(value_err)
    }

    fn skip_task(&mut self, participant: u64, task: u64) -> PyResult<()> {
        let at = self.tick();
        self.project
            .skip_task(ParticipantId(participant), TaskId(task), at)
            .map_err(value_err)
    }

    /// Next dispatched task id, or None when the pool is exhausted.
    fn next_task(&self, participant: u64) -> PyResult<Option<u64>> {
        dispatch::next_task(&self.project, ParticipantId(participant))
            .map(|t| t.map(|t| t.0))
            .map_err(value_err)
    }

    /// Visible candidates of a task as (id, text, point) rows, best first.
    fn visible_candidates(&self, task: u64) -> PyResult<Vec<(u64, String, i64)>> {
        Ok(self
            .project
            .visible_candidates(TaskId(task))
            .map_err(value_err)?
            .into_iter()
            .map(|c| (c.id.0, c.text.clone(), c.point))
            .collect())
    }

    fn progress(&self, participant: u64) -> PyResult<f64> {
        dispatch::progress(&self.project, ParticipantId(participant)).map_err(value_err)
    }

    /// (rank, participant id, points, gap to next) rows, best first.
    fn leaderboard(&self, top_n: usize) -> Vec<(u32, u64, i64, i64)> {
        dispatch::leaderboard(&self.project, top_n)
            .into_iter()
            .map(|e| (e.rank, e.participant_id.0, e.points, e.gap_to_next))
            .collect()
    }

    fn reminder_message(&self, participant: u64) -> PyResult<String> {
        dispatch::reminder_message(
            &self.project,
            ParticipantId(participant),
            &MessageCatalog::default(),
        )
        .map_err(value_err)
    }

    fn total_points(&self, participant: u64) -> i64 {
        self.project.total_points(ParticipantId(participant))
    }

    fn level(&self, participant: u64) -> i64 {
        self.project.level(ParticipantId(participant))
    }

    /// EM beliefs over the current vote matrix ({} when there are no votes).
    fn beliefs(&self) -> PyResult<BTreeMap<u64, f64>> {
        let matrix = VoteMatrix::from_project(&self.project);
        if matrix.is_empty() {
            return Ok(BTreeMap::new());
        }
        let result =
            inference::run_em(&matrix, &self.project.config().em).map_err(runtime_err)?;
        Ok(result.beliefs.iter().map(|(c, b)| (c.0, *b)).collect())
    }

    fn stats_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&project_stats(&self.project)).map_err(runtime_err)
    }

    /// Rank-n parallel corpus as TSV text.
    fn export_tsv(&self, rank: usize) -> PyResult<String> {
        let matrix = VoteMatrix::from_project(&self.project);
        let beliefs = if matrix.is_empty() {
            BTreeMap::new()
        } else {
            inference::run_em(&matrix, &self.project.config().em)
                .map_err(runtime_err)?
                .beliefs
        };
        Ok(crowdnorm_core::corpus::render_export(&self.project, &beliefs, rank))
    }

    /// The event log as JSON lines.
    fn event_log(&self) -> Vec<String> {
        self.project.log().iter().map(encode_line).collect()
    }

    fn task_count(&self) -> usize {
        self.project.tasks().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Engine(tasks={}, participants={}, candidates={}, votes={}, events={})",
            self.project.tasks().len(),
            self.project.participants().len(),
            self.project.candidates().len(),
            self.project.votes().len(),
            self.project.log().len()
        )
    }
}

#[pymodule]
fn crowdnorm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(candidate_point, m)?)?;
    m.add_function(wrap_pyfunction!(level_for_points, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(encode_callback, m)?)?;
    m.add_function(wrap_pyfunction!(decode_callback, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_bleu, m)?)?;
    m.add_function(wrap_pyfunction!(run_em, m)?)?;
    m.add_function(wrap_pyfunction!(majority_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_ground_truth, m)?)?;
    m.add_class::<Engine>()?;
    m.add_class::<PyBleuReport>()?;
    m.add_class::<PyEmResult>()?;
    m.add_class::<PyOutcome>()?;
    Ok(())
}
