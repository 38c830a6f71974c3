//! Golden-fixture suite for the gateway: a fixed inbound update sequence
//! (as raw Bot API webhook bodies) must produce a byte-identical outbound
//! action sequence. Regenerate with REGEN_GOLDEN=1 after intentional
//! layout changes and review the diff.

mod common;

use std::path::PathBuf;

use common::golden::{inbound_script, run_script};
use crowdnorm_core::catalog::MessageCatalog;
use crowdnorm_core::gateway::{wire, Gateway, OutboundAction};
use crowdnorm_core::{Project, ProjectConfig, Timestamp};

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join("gateway_golden.json")
}

#[test]
fn golden_outbound_sequence() {
    let trace = run_script();
    let rendered = serde_json::to_string_pretty(&trace).unwrap() + "\n";
    let path = fixture_path();
    if std::env::var("REGEN_GOLDEN").is_ok() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &rendered).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .expect("fixture missing; run with REGEN_GOLDEN=1 to create");
    assert_eq!(
        rendered, expected,
        "outbound action sequence diverged from the golden fixture"
    );
}

#[test]
fn replaying_inbound_sequence_is_deterministic() {
    let a = run_script();
    let b = run_script();
    assert_eq!(a, b);
}

#[test]
fn every_callback_yields_exactly_one_answer() {
    let mut project = Project::new(ProjectConfig::default(), Timestamp::from_millis(0)).unwrap();
    project
        .import_task("slm chetori", Timestamp::from_millis(1))
        .unwrap();
    let mut gateway = Gateway::new(MessageCatalog::default(), 10);
    for (i, (_, body)) in inbound_script().into_iter().enumerate() {
        let update = wire::parse_update(&body).unwrap();
        let is_callback = matches!(
            update.kind,
            crowdnorm_core::gateway::UpdateKind::Callback { .. }
        );
        let actions = gateway.handle_update(
            &mut project,
            &update,
            Timestamp::from_millis(20_000 + i as i64),
        );
        let answers = actions
            .iter()
            .filter(|a| matches!(a, OutboundAction::AnswerCallback { .. }))
            .count();
        if actions.is_empty() {
            continue; // deduped
        }
        assert_eq!(answers, usize::from(is_callback), "step {i}");
    }
}
