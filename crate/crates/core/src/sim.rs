//! Deterministic agent-based crowd simulator.
//!
//! Synthetic agents drive the full engine — dispatch, flow, inference,
//! evaluation — against a known ground-truth corpus. Every random draw
//! comes from a named sub-stream of the run seed, keyed by (agent, step),
//! so identical configs produce byte-identical reports regardless of how
//! the run is scheduled.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ProjectConfig;
use crate::dispatch;
use crate::engine::{EngineError, Project};
use crate::eval::{corpus_bleu, extract_nth_corpus, EvalError, ReferenceSet};
use crate::inference::{run_em, EmResult, InferenceError, VoteMatrix};
use crate::model::{CandidateId, ParticipantId, TaskId, VoteDirection};
use crate::stats::{project_stats, StatsReport};
use crate::text::{normalize, tokenize};
use crate::time::Timestamp;

/// Simulated project epoch: 2026-01-01T00:00:00Z.
const SIM_EPOCH_MS: i64 = 1_767_225_600_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid sim config: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("engine error at step {step} (agent {agent}): {source}")]
    Step {
        step: u64,
        agent: String,
        source: EngineError,
    },
    #[error("inference failed during simulation: {0}")]
    Inference(#[from] InferenceError),
    #[error("evaluation failed during simulation: {0}")]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionMix {
    pub author: f64,
    pub vote: f64,
    pub skip: f64,
}

impl Default for ActionMix {
    fn default() -> Self {
        ActionMix {
            author: 0.3,
            vote: 0.6,
            skip: 0.1,
        }
    }
}

impl ActionMix {
    fn validate(&self) -> Result<(), SimError> {
        let parts = [self.author, self.vote, self.skip];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(SimError::Config(
                "action_mix probabilities must be in [0, 1]".to_owned(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::Config(format!(
                "action_mix must sum to 1 (got {sum})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentProfile {
    pub name: String,
    /// Chance of voting consistently with ground-truth correctness.
    pub vote_accuracy: f64,
    /// Expected token edits applied when authoring a candidate.
    pub candidate_noise: f64,
    pub action_mix: ActionMix,
    /// Dispatch-interaction budget for this agent.
    pub sessions: u64,
}

impl Default for AgentProfile {
    fn default() -> Self {
        AgentProfile {
            name: String::new(),
            vote_accuracy: 0.9,
            candidate_noise: 0.3,
            action_mix: ActionMix::default(),
            sessions: 1_000_000,
        }
    }
}

/// Mean per-action latency (milliseconds) for the submit-time report
/// series; draws are exponential and only advance the virtual clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyModel {
    pub candidate_mean_ms: u64,
    pub vote_mean_ms: u64,
    pub skip_mean_ms: u64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel {
            candidate_mean_ms: 30_000,
            vote_mean_ms: 8_000,
            skip_mean_ms: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    /// Total dispatch interactions across all agents.
    pub steps: u64,
    pub agents: Vec<AgentProfile>,
    /// informal sentence -> true formal rendering.
    pub ground_truth: BTreeMap<String, String>,
    #[serde(default)]
    pub project: ProjectConfig,
    #[serde(default)]
    pub latency: LatencyModel,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.steps == 0 {
            return Err(SimError::Config("steps must be at least 1".to_owned()));
        }
        if self.agents.is_empty() {
            return Err(SimError::Config("at least one agent required".to_owned()));
        }
        if self.ground_truth.is_empty() {
            return Err(SimError::Config("ground_truth must not be empty".to_owned()));
        }
        for agent in &self.agents {
            if !(0.0..=1.0).contains(&agent.vote_accuracy) {
                return Err(SimError::Config("vote_accuracy must be in [0, 1]".to_owned()));
            }
            if agent.candidate_noise < 0.0 {
                return Err(SimError::Config(
                    "candidate_noise must be non-negative".to_owned(),
                ));
            }
            agent.action_mix.validate()?;
        }
        for (informal, formal) in &self.ground_truth {
            if normalize(informal).is_empty() || normalize(formal).is_empty() {
                return Err(SimError::Config(
                    "ground_truth entries must be non-empty".to_owned(),
                ));
            }
        }
        self.project.validate().map_err(EngineError::from)?;
        Ok(())
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a named RNG sub-stream from the run seed. Stable across
/// platforms: FNV-1a over the tag, splitmix64 key expansion, ChaCha12.
pub fn substream(seed: u64, tag: &str, a: u64, b: u64) -> ChaCha12Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in tag.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    let mut state = seed
        ^ h.rotate_left(32)
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Knuth Poisson sampler; adequate for the small rates used here.
fn poisson(lambda: f64, rng: &mut ChaCha12Rng) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let limit = (-lambda).exp();
    let mut k = 0u32;
    let mut p = 1.0f64;
    loop {
        p *= rng.gen::<f64>();
        if p <= limit || k > 10_000 {
            return k;
        }
        k += 1;
    }
}

/// Corrupt the true formal text with a Poisson-distributed number of
/// token-level edits drawn from the confusion lexicon. Zero edits return
/// the true text verbatim.
pub fn synth_candidate(
    agent: &AgentProfile,
    true_formal: &str,
    lexicon: &[String],
    rng: &mut ChaCha12Rng,
) -> String {
    let edits = poisson(agent.candidate_noise, rng);
    if edits == 0 || lexicon.is_empty() {
        return true_formal.to_owned();
    }
    let mut tokens = tokenize(true_formal);
    for _ in 0..edits {
        let pick = lexicon[rng.gen_range(0..lexicon.len())].clone();
        if tokens.is_empty() {
            tokens.push(pick);
            continue;
        }
        match rng.gen_range(0..3u32) {
            0 => {
                let pos = rng.gen_range(0..tokens.len());
                tokens[pos] = pick;
            }
            1 => {
                if tokens.len() > 1 {
                    let pos = rng.gen_range(0..tokens.len());
                    tokens.remove(pos);
                } else {
                    tokens[0] = pick;
                }
            }
            _ => {
                let pos = rng.gen_range(0..=tokens.len());
                tokens.insert(pos, pick);
            }
        }
    }
    tokens.join(" ")
}

/// Snapshot of a dispatched task as the agent sees it.
#[derive(Debug, Clone)]
pub struct TaskView {
    pub task_id: TaskId,
    pub candidates: Vec<CandidateView>,
    pub can_author: bool,
}

#[derive(Debug, Clone)]
pub struct CandidateView {
    pub id: CandidateId,
    pub matches_truth: bool,
    pub mine: bool,
    pub my_submissions: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentAction {
    Author(String),
    Vote(CandidateId, VoteDirection),
    Skip,
}

/// Decide one action. Infeasible branches of the mix are zeroed before the
/// draw; when nothing in the mix is feasible the fallback order is
/// author, then vote, then skip.
pub fn agent_step(
    agent: &AgentProfile,
    view: &TaskView,
    true_formal: &str,
    lexicon: &[String],
    rng: &mut ChaCha12Rng,
) -> AgentAction {
    let votable: Vec<&CandidateView> = view
        .candidates
        .iter()
        .filter(|c| !c.mine && c.my_submissions == 0)
        .collect();
    let can_vote = !votable.is_empty();

    let w_author = if view.can_author { agent.action_mix.author } else { 0.0 };
    let w_vote = if can_vote { agent.action_mix.vote } else { 0.0 };
    let w_skip = agent.action_mix.skip;
    let total = w_author + w_vote + w_skip;

    let choice = if total > 0.0 {
        let x = rng.gen::<f64>() * total;
        if x < w_author {
            0
        } else if x < w_author + w_vote {
            1
        } else {
            2
        }
    } else if view.can_author {
        0
    } else if can_vote {
        1
    } else {
        2
    };

    match choice {
        0 => AgentAction::Author(synth_candidate(agent, true_formal, lexicon, rng)),
        1 => {
            let target = votable[rng.gen_range(0..votable.len())];
            let flip = rng.gen_bool((1.0 - agent.vote_accuracy).clamp(0.0, 1.0));
            let up = target.matches_truth != flip;
            AgentAction::Vote(
                target.id,
                if up { VoteDirection::Up } else { VoteDirection::Down },
            )
        }
        _ => AgentAction::Skip,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Candidate,
    Vote,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankScore {
    pub rank: u32,
    pub score: f64,
    pub pairs: u64,
}

/// Summary counters in the style of the collected-dataset table, plus the
/// report series the figures are built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub steps_requested: u64,
    pub interactions_executed: u64,
    pub agent_count: u32,
    pub stats: StatsReport,
    /// Latency bucket lower bound (ms) -> submissions in that bucket.
    pub latency_histogram_ms: BTreeMap<u64, u64>,
    pub em_iterations: u32,
    pub em_converged: bool,
    /// Mean estimated worker quality, 4 decimals ("0.0000" with no votes).
    pub mean_worker_quality: String,
    /// Final corpus BLEU of the best-nth extracts, ranks 1..=3.
    pub bleu_by_rank: Vec<RankScore>,
}

/// Everything a run produces: the report plus the final engine state for
/// further analysis or export.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: SimReport,
    pub project: Project,
    pub em: Option<EmResult>,
    pub references: ReferenceSet,
    /// (kind, latency ms) per executed interaction, in order.
    pub latencies: Vec<(ActionKind, u64)>,
}

const LATENCY_BUCKETS_MS: [u64; 5] = [0, 1_000, 5_000, 15_000, 60_000];

fn latency_draw(kind: ActionKind, model: &LatencyModel, rng: &mut ChaCha12Rng) -> u64 {
    let mean = match kind {
        ActionKind::Candidate => model.candidate_mean_ms,
        ActionKind::Vote => model.vote_mean_ms,
        ActionKind::Skip => model.skip_mean_ms,
    } as f64;
    let u: f64 = rng.gen();
    ((-mean * (1.0 - u).ln()).round() as u64).max(1)
}

fn token_key(text: &str) -> Vec<String> {
    tokenize(text)
}

/// Run the simulation. Identical configs give bitwise-identical outputs.
pub fn run_simulation(config: &SimConfig) -> Result<SimOutput, SimError> {
    config.validate()?;
    let mut clock = Timestamp::from_millis(SIM_EPOCH_MS);
    let mut project = Project::new(config.project.clone(), clock)?;

    // Tasks and references, in deterministic map order.
    let mut truth_by_task: BTreeMap<TaskId, String> = BTreeMap::new();
    let mut truth_tokens: BTreeMap<TaskId, Vec<String>> = BTreeMap::new();
    let mut references = ReferenceSet::new();
    for (informal, formal) in &config.ground_truth {
        clock = clock.saturating_add_millis(1);
        let task = project
            .import_task(informal, clock)
            .ok_or_else(|| SimError::Config(format!("duplicate informal sentence: {informal}")))?;
        let formal_norm = normalize(formal);
        truth_tokens.insert(task, token_key(&formal_norm));
        truth_by_task.insert(task, formal_norm.clone());
        references.insert(task, formal_norm);
    }

    let mut agent_ids: Vec<ParticipantId> = Vec::with_capacity(config.agents.len());
    for (idx, agent) in config.agents.iter().enumerate() {
        clock = clock.saturating_add_millis(1);
        let name = if agent.name.is_empty() {
            format!("agent-{idx}")
        } else {
            agent.name.clone()
        };
        agent_ids.push(project.register_participant(&name, &format!("sim:{idx}"), clock));
    }

    let lexicon: Vec<String> = config
        .ground_truth
        .values()
        .flat_map(|formal| tokenize(formal))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut sessions_left: Vec<u64> = config.agents.iter().map(|a| a.sessions).collect();
    let mut pool_exhausted = vec![false; config.agents.len()];
    let mut latencies: Vec<(ActionKind, u64)> = Vec::new();
    let mut executed = 0u64;
    let mut cursor = 0usize;
    let n_agents = config.agents.len();

    for step in 0..config.steps {
        // Round-robin over agents with budget and an open task pool.
        let mut picked = None;
        for offset in 0..n_agents {
            let idx = (cursor + offset) % n_agents;
            if sessions_left[idx] > 0 && !pool_exhausted[idx] {
                picked = Some(idx);
                break;
            }
        }
        let Some(agent_idx) = picked else { break };
        cursor = (agent_idx + 1) % n_agents;

        let participant = agent_ids[agent_idx];
        let agent = &config.agents[agent_idx];
        let step_err = |source: EngineError| SimError::Step {
            step,
            agent: agent.name.clone(),
            source,
        };
        let Some(task) = dispatch::next_task(&project, participant).map_err(step_err)? else {
            pool_exhausted[agent_idx] = true;
            continue;
        };

        let mut rng = substream(config.seed, "act", agent_idx as u64, step);
        let truth = &truth_by_task[&task];
        let truth_toks = &truth_tokens[&task];
        let view = build_view(&project, participant, task, truth_toks);
        let action = agent_step(agent, &view, truth, &lexicon, &mut rng);

        clock = clock.saturating_add_millis(1);
        let kind = execute_with_fallback(
            &mut project,
            participant,
            task,
            action,
            &view,
            agent,
            &mut rng,
            clock,
        )
        .map_err(step_err)?;
        sessions_left[agent_idx] -= 1;
        executed += 1;

        let latency = latency_draw(kind, &config.latency, &mut rng);
        latencies.push((kind, latency));
        clock = clock.saturating_add_millis(latency as i64);
    }

    // Inference and evaluation over the final state.
    let matrix = VoteMatrix::from_project(&project);
    let em = if matrix.is_empty() {
        None
    } else {
        Some(run_em(&matrix, &project.config().em)?)
    };
    let beliefs = em.as_ref().map(|e| e.beliefs.clone()).unwrap_or_default();

    let mut bleu_by_rank = Vec::new();
    for rank in 1..=3u32 {
        let extract = extract_nth_corpus(&project, &beliefs, rank as usize);
        let pairs = extract.pairs.len() as u64;
        let score = if pairs == 0 {
            0.0
        } else {
            corpus_bleu(&extract.hypotheses(), &references, 4)?.score
        };
        bleu_by_rank.push(RankScore { rank, score, pairs });
    }

    let mut latency_histogram_ms: BTreeMap<u64, u64> = BTreeMap::new();
    for (_, ms) in &latencies {
        let bucket = LATENCY_BUCKETS_MS
            .iter()
            .rev()
            .find(|b| ms >= b)
            .copied()
            .unwrap_or(0);
        *latency_histogram_ms.entry(bucket).or_insert(0) += 1;
    }

    let mean_worker_quality = match &em {
        Some(result) if !result.worker_quality.is_empty() => {
            let sum: f64 = result.worker_quality.values().sum();
            format!("{:.4}", sum / result.worker_quality.len() as f64)
        }
        _ => "0.0000".to_owned(),
    };

    let report = SimReport {
        seed: config.seed,
        steps_requested: config.steps,
        interactions_executed: executed,
        agent_count: config.agents.len() as u32,
        stats: project_stats(&project),
        latency_histogram_ms,
        em_iterations: em.as_ref().map(|e| e.iterations).unwrap_or(0),
        em_converged: em.as_ref().map(|e| e.converged).unwrap_or(false),
        mean_worker_quality,
        bleu_by_rank,
    };

    Ok(SimOutput {
        report,
        project,
        em,
        references,
        latencies,
    })
}

fn build_view(
    project: &Project,
    participant: ParticipantId,
    task: TaskId,
    truth_tokens: &[String],
) -> TaskView {
    let visible = project
        .visible_candidates(task)
        .expect("dispatched task exists");
    let candidates = visible
        .iter()
        .map(|c| CandidateView {
            id: c.id,
            matches_truth: token_key(&c.text) == truth_tokens,
            mine: c.author_id == participant,
            my_submissions: project.vote_submission_count(participant, c.id),
        })
        .collect();
    let can_author = (visible.len() as u32) < project.config().alpha
        && project.authored_on_task(participant, task) < project.config().gamma;
    TaskView {
        task_id: task,
        candidates,
        can_author,
    }
}

#[allow(clippy::too_many_arguments)]
fn execute_with_fallback(
    project: &mut Project,
    participant: ParticipantId,
    task: TaskId,
    action: AgentAction,
    view: &TaskView,
    agent: &AgentProfile,
    rng: &mut ChaCha12Rng,
    at: Timestamp,
) -> Result<ActionKind, EngineError> {
    match action {
        AgentAction::Author(text) => {
            let outcome = project.submit_candidate(participant, task, &text, at)?;
            if outcome.accepted {
                return Ok(ActionKind::Candidate);
            }
            // Rejected (duplicate text, list filled meanwhile): vote, else skip.
            let votable: Vec<&CandidateView> = view
                .candidates
                .iter()
                .filter(|c| !c.mine && c.my_submissions == 0)
                .collect();
            if !votable.is_empty() {
                let target = votable[rng.gen_range(0..votable.len())];
                let flip = rng.gen_bool((1.0 - agent.vote_accuracy).clamp(0.0, 1.0));
                let direction = if target.matches_truth != flip {
                    VoteDirection::Up
                } else {
                    VoteDirection::Down
                };
                let outcome = project.submit_vote(participant, target.id, direction, at)?;
                if outcome.accepted {
                    return Ok(ActionKind::Vote);
                }
            }
            project.skip_task(participant, task, at)?;
            Ok(ActionKind::Skip)
        }
        AgentAction::Vote(candidate, direction) => {
            let outcome = project.submit_vote(participant, candidate, direction, at)?;
            if outcome.accepted {
                Ok(ActionKind::Vote)
            } else {
                project.skip_task(participant, task, at)?;
                Ok(ActionKind::Skip)
            }
        }
        AgentAction::Skip => {
            project.skip_task(participant, task, at)?;
            Ok(ActionKind::Skip)
        }
    }
}

/// Plot-ready series as (file name, TSV content) pairs.
pub fn series_files(output: &SimOutput) -> Vec<(String, String)> {
    let mut files = Vec::new();

    let mut candidates = String::from("candidates_per_task\ttasks\n");
    for (count, tasks) in &output.report.stats.candidate_count_histogram {
        candidates.push_str(&format!("{count}\t{tasks}\n"));
    }
    files.push(("candidates_per_task.tsv".to_owned(), candidates));

    let mut shares = String::from("direction\tshare\n");
    shares.push_str(&format!("up\t{}\n", output.report.stats.upvote_share));
    shares.push_str(&format!("down\t{}\n", output.report.stats.downvote_share));
    files.push(("vote_shares.tsv".to_owned(), shares));

    let mut latency = String::from("action\tlatency_ms\n");
    for (kind, ms) in &output.latencies {
        let name = match kind {
            ActionKind::Candidate => "candidate",
            ActionKind::Vote => "vote",
            ActionKind::Skip => "skip",
        };
        latency.push_str(&format!("{name}\t{ms}\n"));
    }
    files.push(("latencies.tsv".to_owned(), latency));

    let mut bleu = String::from("rank\tscore\tpairs\n");
    for entry in &output.report.bleu_by_rank {
        bleu.push_str(&format!("{}\t{}\t{}\n", entry.rank, entry.score, entry.pairs));
    }
    files.push(("bleu_by_rank.tsv".to_owned(), bleu));

    // Mean estimated worker quality bucketed by label count.
    if let Some(em) = &output.em {
        let counts = VoteMatrix::from_project(&output.project).labels_per_worker();
        if let Ok(buckets) =
            crate::inference::quality_buckets(em, &counts, &[1, 5, 10, 20, 50, 100])
        {
            let mut quality = String::from("labels_from\tlabels_to\tworkers\tmean_quality\n");
            for bucket in buckets {
                let hi = bucket
                    .hi
                    .map(|h| h.to_string())
                    .unwrap_or_else(|| "inf".to_owned());
                quality.push_str(&format!(
                    "{}\t{}\t{}\t{:.4}\n",
                    bucket.lo, hi, bucket.workers, bucket.mean_quality
                ));
            }
            files.push(("quality_by_labels.tsv".to_owned(), quality));
        }
    }

    files
}

/// Generate a synthetic ground-truth corpus: formal sentences over a small
/// vocabulary with informal variants produced by a fixed corruption
/// grammar (vowel stripping and token merging).
pub fn synthetic_ground_truth(n_tasks: usize, seed: u64) -> BTreeMap<String, String> {
    const VOCAB: [&str; 24] = [
        "baradar", "chetor", "dining", "emrooz", "farda", "ghaza", "haal", "khoob", "kheyli",
        "ketab", "khane", "madrese", "maman", "mashin", "mehmoon", "raft", "salam", "shahr",
        "shoma", "sobh", "zood", "zang", "doost", "bood",
    ];
    let mut out = BTreeMap::new();
    let mut i = 0u64;
    while out.len() < n_tasks {
        let mut rng = substream(seed, "truth", i, 0);
        let len = rng.gen_range(4..=9usize);
        let tokens: Vec<&str> = (0..len)
            .map(|_| VOCAB[rng.gen_range(0..VOCAB.len())])
            .collect();
        let formal = format!("{} .", tokens.join(" "));
        let informal_tokens: Vec<String> = tokens
            .iter()
            .map(|t| {
                if rng.gen_bool(0.5) {
                    t.chars().filter(|c| !"aeiou".contains(*c)).collect()
                } else {
                    (*t).to_owned()
                }
            })
            .collect();
        let mut informal = informal_tokens.join(" ");
        if rng.gen_bool(0.3) {
            informal = informal.replacen(' ', "", 1);
        }
        informal.push_str(&format!(" #{i}"));
        out.entry(informal).or_insert(formal);
        i += 1;
    }
    out
}
