//! Webhook host: a single-threaded HTTP loop that feeds messenger updates
//! into the gateway. The first outbound action rides back on the HTTP
//! response as a reply-as-method call; the rest go to the outbox queue
//! file for an external sender to drain. A reminder tick runs between
//! requests.
//!
//! Requests for one project are handled strictly one at a time, which is
//! exactly the engine's single-writer contract.

use std::fs::OpenOptions;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use crowdnorm_core::catalog::MessageCatalog;
use crowdnorm_core::dispatch::{reminder_message, ReminderScheduler};
use crowdnorm_core::gateway::{wire, Gateway, OutboundAction};
use crowdnorm_core::{Project, Timestamp};
use tiny_http::{Header, Method, Response, Server};

pub struct ServeOptions {
    pub addr: String,
    pub secret: String,
    pub outbox: PathBuf,
    /// Stop after this many handled requests (used by tests; None = run
    /// forever).
    pub max_requests: Option<u64>,
}

fn json_header() -> Header {
    Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..]).expect("static header")
}

fn append_outbox(path: &Path, methods: &[serde_json::Value]) -> Result<()> {
    if methods.is_empty() {
        return Ok(());
    }
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    for method in methods {
        writeln!(file, "{method}")?;
    }
    Ok(())
}

pub fn serve(dir: &Path, mut project: Project, options: ServeOptions) -> Result<()> {
    let catalog = MessageCatalog::default();
    let mut gateway = Gateway::new(
        catalog.clone(),
        project.config().entry_timeout_minutes,
    );
    let mut scheduler = ReminderScheduler::new();
    let cadence_ms = i64::from(project.config().reminder_cadence_hours) * 3_600_000;
    let webhook_path = format!("/webhook/{}", options.secret);

    let server = Server::http(&options.addr)
        .map_err(|e| anyhow::anyhow!("cannot bind {}: {e}", options.addr))?;
    eprintln!(
        "listening on {} (webhook path {webhook_path}), outbox {}",
        options.addr,
        options.outbox.display()
    );

    let mut handled = 0u64;
    loop {
        match server.recv_timeout(Duration::from_secs(1))? {
            Some(mut request) => {
                let is_post = *request.method() == Method::Post;
                let path_matches = request.url() == webhook_path;
                if !is_post || !path_matches {
                    let _ = request.respond(Response::empty(404));
                    continue;
                }
                let mut body = String::new();
                if request
                    .as_reader()
                    .take(1 << 20)
                    .read_to_string(&mut body)
                    .is_err()
                {
                    let _ = request.respond(Response::empty(400));
                    continue;
                }
                let update = match wire::parse_update(&body) {
                    Ok(update) => update,
                    Err(e) => {
                        eprintln!("dropping unparseable update: {e}");
                        let _ = request.respond(Response::empty(200));
                        continue;
                    }
                };
                let known = project.log().len();
                let actions = gateway.handle_update(&mut project, &update, Timestamp::now());
                crate::store::append_events(dir, &project, known)?;

                let mut methods: Vec<serde_json::Value> =
                    actions.iter().map(wire::method_json).collect();
                let response = if methods.is_empty() {
                    Response::from_string("{}").with_header(json_header())
                } else {
                    let first = methods.remove(0);
                    Response::from_string(first.to_string()).with_header(json_header())
                };
                append_outbox(&options.outbox, &methods)
                    .context("writing outbox")?;
                let _ = request.respond(response);

                handled += 1;
                if options.max_requests.is_some_and(|max| handled >= max) {
                    return Ok(());
                }
            }
            None => {
                // Idle tick: queue due reminders onto the outbox.
                let now = Timestamp::now();
                let due = scheduler.due(&project, now, cadence_ms);
                let mut methods = Vec::new();
                for participant in due {
                    let Ok(text) = reminder_message(&project, participant, &catalog) else {
                        continue;
                    };
                    let chat_ref = project.participants()[&participant].chat_ref.clone();
                    methods.push(wire::method_json(&OutboundAction::SendMessage {
                        chat_ref,
                        message_id: 0,
                        text,
                        keyboard: None,
                    }));
                }
                append_outbox(&options.outbox, &methods)?;
            }
        }
    }
}
