//! Weekly BLEU series over simulated project logs.

mod common;

use crowdnorm_core::eval::weekly_bleu_series;
use crowdnorm_core::sim::{
    run_simulation, synthetic_ground_truth, ActionMix, AgentProfile, LatencyModel, SimConfig,
};
use crowdnorm_core::ProjectConfig;

fn config(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        steps: 900,
        agents: (0..10)
            .map(|i| AgentProfile {
                name: format!("a{i}"),
                vote_accuracy: 0.9,
                candidate_noise: 0.5,
                action_mix: ActionMix::default(),
                sessions: 1_000_000,
            })
            .collect(),
        ground_truth: synthetic_ground_truth(25, seed),
        project: ProjectConfig::default(),
        // Long latencies stretch the run across several "weeks" below.
        latency: LatencyModel {
            candidate_mean_ms: 600_000,
            vote_mean_ms: 200_000,
            skip_mean_ms: 60_000,
        },
    }
}

#[test]
fn series_covers_run_and_improves_with_votes() {
    let output = run_simulation(&config(88)).unwrap();
    let log = output.project.log();
    let span_ms = log.last().unwrap().at.as_millis() - log[0].at.as_millis();
    let week_ms = span_ms / 4 + 1;

    let series = weekly_bleu_series(log, &output.references, week_ms, None).unwrap();
    assert_eq!(series.len(), 4);
    assert!(series.iter().zip(1u32..).all(|((week, _), i)| *week == i));
    // Accumulated votes sort truth upward: the final week scores at least
    // as well as the first.
    let first = series.first().unwrap().1.score;
    let last = series.last().unwrap().1.score;
    assert!(
        last >= first,
        "series regressed: first {first}, last {last}"
    );
    // The full-log week matches scoring the final state directly.
    assert!((last - output.report.bleu_by_rank[0].score).abs() < 1e-12);
}

#[test]
fn perfect_first_week_scores_one() {
    let mut cfg = config(55);
    for agent in &mut cfg.agents {
        agent.vote_accuracy = 1.0;
        agent.candidate_noise = 0.0;
    }
    let output = run_simulation(&cfg).unwrap();
    let log = output.project.log();
    let span_ms = log.last().unwrap().at.as_millis() - log[0].at.as_millis();
    let series = weekly_bleu_series(log, &output.references, span_ms + 1, None).unwrap();
    assert_eq!(series.len(), 1);
    assert_eq!(series[0].1.score, 1.0);
}

#[test]
fn frozen_state_repeats_beyond_the_log() {
    let output = run_simulation(&config(44)).unwrap();
    let log = output.project.log();
    let span_ms = log.last().unwrap().at.as_millis() - log[0].at.as_millis();
    // One "week" swallows the whole run; later weeks see a frozen state.
    let week_ms = span_ms + 1;
    let series = weekly_bleu_series(log, &output.references, week_ms, Some(4)).unwrap();
    assert_eq!(series.len(), 4);
    let first = series[0].1.score;
    for (_, report) in &series[1..] {
        assert_eq!(report.score, first);
    }
}
