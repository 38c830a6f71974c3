//! The canonical gateway script shared by the golden-fixture test and the
//! acceptance suite: registration, candidate entry, a vote from a second
//! chat, a duplicate update id, a malformed callback, a stale candidate id
//! and a leaderboard request.

use crowdnorm_core::catalog::MessageCatalog;
use crowdnorm_core::gateway::{wire, Gateway, LoopbackTransport};
use crowdnorm_core::{Project, ProjectConfig, Timestamp};

pub fn inbound_script() -> Vec<(&'static str, String)> {
    vec![
        (
            "start-alice",
            r#"{"update_id":1,"message":{"message_id":1,"from":{"id":42,"first_name":"Alice"},"chat":{"id":1001},"text":"/start"}}"#.to_owned(),
        ),
        (
            "alice-prompt",
            r#"{"update_id":2,"callback_query":{"id":"cb2","from":{"id":42,"first_name":"Alice"},"message":{"message_id":2,"chat":{"id":1001}},"data":"c|1"}}"#.to_owned(),
        ),
        (
            "alice-candidate-text",
            r#"{"update_id":3,"message":{"message_id":4,"from":{"id":42,"first_name":"Alice"},"chat":{"id":1001},"text":"formal rendering one"}}"#.to_owned(),
        ),
        (
            "start-bob",
            r#"{"update_id":4,"message":{"message_id":1,"from":{"id":77,"first_name":"Bob"},"chat":{"id":1002},"text":"/start"}}"#.to_owned(),
        ),
        (
            "bob-upvotes-candidate-1",
            r#"{"update_id":5,"callback_query":{"id":"cb5","from":{"id":77,"first_name":"Bob"},"message":{"message_id":2,"chat":{"id":1002}},"data":"v+|1"}}"#.to_owned(),
        ),
        (
            "duplicate-update-id-5",
            r#"{"update_id":5,"callback_query":{"id":"cb5","from":{"id":77,"first_name":"Bob"},"message":{"message_id":2,"chat":{"id":1002}},"data":"v+|1"}}"#.to_owned(),
        ),
        (
            "malformed-callback",
            r#"{"update_id":6,"callback_query":{"id":"cb6","from":{"id":77,"first_name":"Bob"},"message":{"message_id":2,"chat":{"id":1002}},"data":"zz|"}}"#.to_owned(),
        ),
        (
            "stale-candidate-id",
            r#"{"update_id":7,"callback_query":{"id":"cb7","from":{"id":77,"first_name":"Bob"},"message":{"message_id":2,"chat":{"id":1002}},"data":"v-|999"}}"#.to_owned(),
        ),
        (
            "bob-leaderboard",
            r#"{"update_id":8,"callback_query":{"id":"cb8","from":{"id":77,"first_name":"Bob"},"message":{"message_id":2,"chat":{"id":1002}},"data":"lb"}}"#.to_owned(),
        ),
    ]
}

/// Run the script against a fresh engine over the loopback transport and
/// return the per-step trace (actions plus their wire-method renderings).
pub fn run_script() -> Vec<serde_json::Value> {
    let mut project = Project::new(ProjectConfig::default(), Timestamp::from_millis(0)).unwrap();
    project
        .import_task("slm chetori", Timestamp::from_millis(1))
        .unwrap();
    project
        .import_task("frd mibinamet", Timestamp::from_millis(2))
        .unwrap();
    let mut gateway = Gateway::new(MessageCatalog::default(), 10);
    let mut transport = LoopbackTransport::new();

    let mut trace = Vec::new();
    for (i, (name, body)) in inbound_script().into_iter().enumerate() {
        let update = wire::parse_update(&body).expect("fixture updates parse");
        let now = Timestamp::from_millis(10_000 + i as i64 * 1000);
        let actions = gateway.handle_update(&mut project, &update, now);
        transport.deliver_all(&actions);
        let methods: Vec<serde_json::Value> = actions.iter().map(wire::method_json).collect();
        trace.push(serde_json::json!({
            "step": name,
            "actions": actions,
            "methods": methods,
        }));
    }
    trace
}
