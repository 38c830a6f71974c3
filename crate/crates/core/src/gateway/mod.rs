//! Messenger-facing adapter: decodes inbound bot updates, renders task
//! views with inline keyboards, and maps button presses onto engine
//! operations.
//!
//! The gateway itself is stateless apart from per-chat plumbing (dedupe
//! window, pending candidate-entry prompt, current view message id). It
//! assigns outbound message ids deterministically per chat so a replayed
//! update sequence yields an identical action sequence; transports map
//! those ids onto real messenger ids.

pub mod codec;
pub mod wire;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;

use crate::catalog::MessageCatalog;
use crate::dispatch;
use crate::engine::Project;
use crate::model::{ParticipantId, RejectReason, TaskId, VoteDirection};
use crate::time::Timestamp;

use codec::CallbackPayload;

/// A decoded inbound update. Exactly one payload kind per update.
#[derive(Debug, Clone, PartialEq)]
pub struct InboundUpdate {
    pub update_id: u64,
    pub chat_ref: String,
    pub sender_name: String,
    pub kind: UpdateKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UpdateKind {
    Text { text: String },
    Callback { callback_id: String, data: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Button {
    pub label: String,
    pub callback_data: String,
}

/// What the engine wants sent back through the messenger.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OutboundAction {
    SendMessage {
        chat_ref: String,
        /// Gateway-assigned id; per-chat, monotone from 1.
        message_id: u64,
        text: String,
        keyboard: Option<Vec<Vec<Button>>>,
    },
    EditMessage {
        chat_ref: String,
        message_id: u64,
        text: String,
        keyboard: Option<Vec<Vec<Button>>>,
    },
    AnswerCallback {
        callback_id: String,
        text: String,
    },
}

#[derive(Debug, Clone)]
struct EntryState {
    task_id: TaskId,
    set_at: Timestamp,
}

#[derive(Debug, Clone, Default)]
struct ChatState {
    seen_ids: VecDeque<u64>,
    seen_set: BTreeSet<u64>,
    entry: Option<EntryState>,
    /// The message currently showing a task view, and which task.
    view_message: Option<(u64, TaskId)>,
    next_message_id: u64,
}

/// Per-update dedupe window size (update ids remembered per chat).
const DEDUPE_WINDOW: usize = 10_000;

pub struct Gateway {
    catalog: MessageCatalog,
    entry_timeout_ms: i64,
    chats: BTreeMap<String, ChatState>,
}

impl Gateway {
    pub fn new(catalog: MessageCatalog, entry_timeout_minutes: u32) -> Self {
        Gateway {
            catalog,
            entry_timeout_ms: i64::from(entry_timeout_minutes) * 60_000,
            chats: BTreeMap::new(),
        }
    }

    /// Handle one inbound update against the project, producing the ordered
    /// outbound actions. Duplicate update ids produce no actions; every
    /// callback produces exactly one answer action, rejections included.
    pub fn handle_update(
        &mut self,
        project: &mut Project,
        update: &InboundUpdate,
        now: Timestamp,
    ) -> Vec<OutboundAction> {
        let chat = self.chats.entry(update.chat_ref.clone()).or_default();
        if chat.seen_set.contains(&update.update_id) {
            return Vec::new();
        }
        chat.seen_set.insert(update.update_id);
        chat.seen_ids.push_back(update.update_id);
        if chat.seen_ids.len() > DEDUPE_WINDOW {
            if let Some(old) = chat.seen_ids.pop_front() {
                chat.seen_set.remove(&old);
            }
        }

        match &update.kind {
            UpdateKind::Text { text } if text.trim() == "/start" => {
                self.handle_start(project, update, now)
            }
            UpdateKind::Text { text } => self.handle_text(project, update, text, now),
            UpdateKind::Callback { callback_id, data } => {
                self.handle_callback(project, update, callback_id, data, now)
            }
        }
    }

    fn handle_start(
        &mut self,
        project: &mut Project,
        update: &InboundUpdate,
        now: Timestamp,
    ) -> Vec<OutboundAction> {
        let participant =
            project.register_participant(&update.sender_name, &update.chat_ref, now);
        let chat = self.chats.get_mut(&update.chat_ref).expect("chat exists");
        chat.entry = None;

        let welcome = self
            .catalog
            .render("welcome", &[("name", update.sender_name.as_str())]);
        let mut actions = vec![send_plain(chat, &update.chat_ref, welcome)];
        actions.push(send_task_view(
            project,
            chat,
            &self.catalog,
            &update.chat_ref,
            participant,
        ));
        actions
    }

    fn handle_text(
        &mut self,
        project: &mut Project,
        update: &InboundUpdate,
        text: &str,
        now: Timestamp,
    ) -> Vec<OutboundAction> {
        let chat = self.chats.get_mut(&update.chat_ref).expect("chat exists");
        let Some(participant) = project.participant_for_chat(&update.chat_ref) else {
            let msg = self.catalog.render("use_start", &[]);
            return vec![send_plain(chat, &update.chat_ref, msg)];
        };

        let entry = chat.entry.take().filter(|e| {
            now.as_millis() - e.set_at.as_millis() <= self.entry_timeout_ms
        });
        let Some(entry) = entry else {
            let msg = self.catalog.render("send_text_hint", &[]);
            return vec![send_plain(chat, &update.chat_ref, msg)];
        };

        match project.submit_candidate(participant, entry.task_id, text, now) {
            Ok(outcome) if outcome.accepted => {
                let delta = outcome
                    .ledger_entries
                    .first()
                    .map(|e| e.delta)
                    .unwrap_or(0)
                    .to_string();
                let ack = self
                    .catalog
                    .render("candidate_accepted", &[("delta", delta.as_str())]);
                let mut actions = vec![send_plain(chat, &update.chat_ref, ack)];
                actions.extend(refresh_view(
                    project,
                    chat,
                    &self.catalog,
                    &update.chat_ref,
                    participant,
                    entry.task_id,
                ));
                actions
            }
            Ok(outcome) => {
                let reason = outcome
                    .rejection
                    .map(|r| r.to_string())
                    .unwrap_or_else(|| "rejected".to_owned());
                let msg = self.catalog.render("rejected", &[("reason", reason.as_str())]);
                vec![send_plain(chat, &update.chat_ref, msg)]
            }
            Err(e) => {
                let reason = e.to_string();
                let msg = self.catalog.render("rejected", &[("reason", reason.as_str())]);
                vec![send_plain(chat, &update.chat_ref, msg)]
            }
        }
    }

    fn handle_callback(
        &mut self,
        project: &mut Project,
        update: &InboundUpdate,
        callback_id: &str,
        data: &str,
        now: Timestamp,
    ) -> Vec<OutboundAction> {
        let answer = |text: String| OutboundAction::AnswerCallback {
            callback_id: callback_id.to_owned(),
            text,
        };

        let payload = match codec::decode(data) {
            Ok(p) => p,
            Err(_) => return vec![answer(self.catalog.render("malformed_callback", &[]))],
        };
        let Some(participant) = project.participant_for_chat(&update.chat_ref) else {
            return vec![answer(self.catalog.render("use_start", &[]))];
        };
        let chat = self.chats.get_mut(&update.chat_ref).expect("chat exists");

        match payload {
            CallbackPayload::VoteUp { candidate } | CallbackPayload::VoteDown { candidate } => {
                let direction = match payload {
                    CallbackPayload::VoteUp { .. } => VoteDirection::Up,
                    _ => VoteDirection::Down,
                };
                match project.submit_vote(participant, candidate, direction, now) {
                    Ok(outcome) if outcome.accepted => {
                        let delta = outcome
                            .ledger_entries
                            .first()
                            .map(|e| e.delta)
                            .unwrap_or(0)
                            .to_string();
                        let mut actions = vec![answer(
                            self.catalog
                                .render("vote_accepted", &[("delta", delta.as_str())]),
                        )];
                        let task = project
                            .candidate(candidate)
                            .map(|c| c.task_id)
                            .expect("vote accepted on known candidate");
                        actions.extend(refresh_view(
                            project,
                            chat,
                            &self.catalog,
                            &update.chat_ref,
                            participant,
                            task,
                        ));
                        actions
                    }
                    Ok(outcome) => {
                        let reason = outcome
                            .rejection
                            .map(|r| r.to_string())
                            .unwrap_or_else(|| "rejected".to_owned());
                        vec![answer(
                            self.catalog.render("rejected", &[("reason", reason.as_str())]),
                        )]
                    }
                    Err(_) => vec![answer(self.catalog.render("malformed_callback", &[]))],
                }
            }
            CallbackPayload::NewCandidatePrompt { task } => {
                let Some(task_ref) = project.task(task) else {
                    return vec![answer(self.catalog.render("malformed_callback", &[]))];
                };
                let informal = task_ref.informal_text.clone();
                if project.active_count(task) >= project.config().alpha {
                    let reason = RejectReason::ListFull.to_string();
                    return vec![answer(
                        self.catalog.render("rejected", &[("reason", reason.as_str())]),
                    )];
                }
                if project.authored_on_task(participant, task) >= project.config().gamma {
                    let reason = RejectReason::QuotaExhausted.to_string();
                    return vec![answer(
                        self.catalog.render("rejected", &[("reason", reason.as_str())]),
                    )];
                }
                chat.entry = Some(EntryState {
                    task_id: task,
                    set_at: now,
                });
                let prompt = self
                    .catalog
                    .render("prompt_candidate", &[("informal", informal.as_str())]);
                vec![
                    answer(self.catalog.render("prompt_candidate_ack", &[])),
                    send_plain(chat, &update.chat_ref, prompt),
                ]
            }
            CallbackPayload::Skip { task } => match project.skip_task(participant, task, now) {
                Ok(()) => {
                    let mut actions = vec![answer(self.catalog.render("skip_done", &[]))];
                    actions.push(send_task_view(
                        project,
                        chat,
                        &self.catalog,
                        &update.chat_ref,
                        participant,
                    ));
                    actions
                }
                Err(_) => vec![answer(self.catalog.render("malformed_callback", &[]))],
            },
            CallbackPayload::NextTask => {
                let mut actions = vec![answer(self.catalog.render("ack_ok", &[]))];
                actions.push(send_task_view(
                    project,
                    chat,
                    &self.catalog,
                    &update.chat_ref,
                    participant,
                ));
                actions
            }
            CallbackPayload::ShowLeaderboard => {
                let board = dispatch::leaderboard(project, 10);
                let mut lines = vec![self.catalog.render("leaderboard_header", &[])];
                for entry in board {
                    let name = project
                        .participants()
                        .get(&entry.participant_id)
                        .map(|p| p.display_name.clone())
                        .unwrap_or_else(|| entry.participant_id.to_string());
                    let rank = entry.rank.to_string();
                    let points = entry.points.to_string();
                    lines.push(self.catalog.render(
                        "leaderboard_row",
                        &[
                            ("rank", rank.as_str()),
                            ("name", name.as_str()),
                            ("points", points.as_str()),
                        ],
                    ));
                }
                vec![
                    answer(self.catalog.render("ack_ok", &[])),
                    send_plain(chat, &update.chat_ref, lines.join("\n")),
                ]
            }
            CallbackPayload::ShowProgress => {
                let percent = dispatch::progress(project, participant)
                    .map(|p| format!("{:.0}", p * 100.0))
                    .unwrap_or_else(|_| "0".to_owned());
                let points = project.total_points(participant).to_string();
                let level = project.level(participant).to_string();
                let msg = self.catalog.render(
                    "progress_text",
                    &[
                        ("percent", percent.as_str()),
                        ("points", points.as_str()),
                        ("level", level.as_str()),
                    ],
                );
                vec![
                    answer(self.catalog.render("ack_ok", &[])),
                    send_plain(chat, &update.chat_ref, msg),
                ]
            }
        }
    }
}

fn next_message_id(chat: &mut ChatState) -> u64 {
    chat.next_message_id += 1;
    chat.next_message_id
}

fn send_plain(chat: &mut ChatState, chat_ref: &str, text: String) -> OutboundAction {
    OutboundAction::SendMessage {
        chat_ref: chat_ref.to_owned(),
        message_id: next_message_id(chat),
        text,
        keyboard: None,
    }
}

/// Render the current task view for a participant's next dispatched task
/// and send it as a fresh message (which becomes the chat's view message).
fn send_task_view(
    project: &Project,
    chat: &mut ChatState,
    catalog: &MessageCatalog,
    chat_ref: &str,
    participant: ParticipantId,
) -> OutboundAction {
    match dispatch::next_task(project, participant).ok().flatten() {
        Some(task) => {
            let (text, keyboard) = render_task_view(project, task, participant, catalog)
                .expect("dispatched task exists");
            let id = next_message_id(chat);
            chat.view_message = Some((id, task));
            OutboundAction::SendMessage {
                chat_ref: chat_ref.to_owned(),
                message_id: id,
                text,
                keyboard: Some(keyboard),
            }
        }
        None => {
            chat.view_message = None;
            send_plain(chat, chat_ref, catalog.render("exhausted", &[]))
        }
    }
}

/// Re-render a task after an accepted action. Edits the chat's view message
/// when it shows this task; otherwise sends a fresh view of it.
fn refresh_view(
    project: &Project,
    chat: &mut ChatState,
    catalog: &MessageCatalog,
    chat_ref: &str,
    participant: ParticipantId,
    task: TaskId,
) -> Vec<OutboundAction> {
    let Ok((text, keyboard)) = render_task_view(project, task, participant, catalog) else {
        return Vec::new();
    };
    match chat.view_message {
        Some((message_id, viewed)) if viewed == task => vec![OutboundAction::EditMessage {
            chat_ref: chat_ref.to_owned(),
            message_id,
            text,
            keyboard: Some(keyboard),
        }],
        _ => {
            let id = next_message_id(chat);
            chat.view_message = Some((id, task));
            vec![OutboundAction::SendMessage {
                chat_ref: chat_ref.to_owned(),
                message_id: id,
                text,
                keyboard: Some(keyboard),
            }]
        }
    }
}

/// Build the canonical task view: the informal sentence, up to alpha
/// visible candidates in sorted order with vote buttons, a suggest button
/// while the list has room and the participant has quota, then
/// skip/next and leaderboard/progress rows. Eliminated candidates are
/// never rendered.
pub fn render_task_view(
    project: &Project,
    task: TaskId,
    participant: ParticipantId,
    catalog: &MessageCatalog,
) -> Result<(String, Vec<Vec<Button>>), crate::engine::EngineError> {
    let task_ref = project
        .task(task)
        .ok_or(crate::engine::EngineError::UnknownTask(task))?;
    let visible = project.visible_candidates(task)?;
    let visible = &visible[..visible.len().min(project.config().alpha as usize)];

    let task_id_str = task.to_string();
    let mut lines = vec![catalog.render(
        "task_header",
        &[
            ("task_id", task_id_str.as_str()),
            ("informal", task_ref.informal_text.as_str()),
        ],
    )];
    let mut keyboard: Vec<Vec<Button>> = Vec::new();

    if visible.is_empty() {
        lines.push(catalog.render("no_candidates", &[]));
    }
    for (i, candidate) in visible.iter().enumerate() {
        let index = (i + 1).to_string();
        let point = candidate.point.to_string();
        lines.push(catalog.render(
            "candidate_row",
            &[
                ("index", index.as_str()),
                ("text", candidate.text.as_str()),
                ("point", point.as_str()),
            ],
        ));
        keyboard.push(vec![
            Button {
                label: catalog.render("vote_up_label", &[("index", index.as_str())]),
                callback_data: codec::encode(&CallbackPayload::VoteUp {
                    candidate: candidate.id,
                }),
            },
            Button {
                label: catalog.render("vote_down_label", &[("index", index.as_str())]),
                callback_data: codec::encode(&CallbackPayload::VoteDown {
                    candidate: candidate.id,
                }),
            },
        ]);
    }

    let list_full = visible.len() as u32 >= project.config().alpha;
    let quota_left = project.authored_on_task(participant, task) < project.config().gamma;
    if !list_full && quota_left {
        keyboard.push(vec![Button {
            label: catalog.render("new_candidate_label", &[]),
            callback_data: codec::encode(&CallbackPayload::NewCandidatePrompt { task }),
        }]);
    }
    keyboard.push(vec![
        Button {
            label: catalog.render("skip_label", &[]),
            callback_data: codec::encode(&CallbackPayload::Skip { task }),
        },
        Button {
            label: catalog.render("next_label", &[]),
            callback_data: codec::encode(&CallbackPayload::NextTask),
        },
    ]);
    keyboard.push(vec![
        Button {
            label: catalog.render("leaderboard_label", &[]),
            callback_data: codec::encode(&CallbackPayload::ShowLeaderboard),
        },
        Button {
            label: catalog.render("progress_label", &[]),
            callback_data: codec::encode(&CallbackPayload::ShowProgress),
        },
    ]);

    Ok((lines.join("\n"), keyboard))
}

/// In-process transport for tests and the simulator: applies outbound
/// actions to a per-chat message store the way a messenger client would.
#[derive(Debug, Clone, Default)]
pub struct LoopbackTransport {
    pub messages: BTreeMap<String, BTreeMap<u64, DeliveredMessage>>,
    /// (callback_id, acknowledgment text), in delivery order.
    pub answers: Vec<(String, String)>,
    pub sends: u64,
    pub edits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveredMessage {
    pub text: String,
    pub keyboard: Option<Vec<Vec<Button>>>,
}

impl LoopbackTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn deliver(&mut self, action: &OutboundAction) {
        match action {
            OutboundAction::SendMessage {
                chat_ref,
                message_id,
                text,
                keyboard,
            } => {
                self.sends += 1;
                self.messages.entry(chat_ref.clone()).or_default().insert(
                    *message_id,
                    DeliveredMessage {
                        text: text.clone(),
                        keyboard: keyboard.clone(),
                    },
                );
            }
            OutboundAction::EditMessage {
                chat_ref,
                message_id,
                text,
                keyboard,
            } => {
                self.edits += 1;
                self.messages.entry(chat_ref.clone()).or_default().insert(
                    *message_id,
                    DeliveredMessage {
                        text: text.clone(),
                        keyboard: keyboard.clone(),
                    },
                );
            }
            OutboundAction::AnswerCallback { callback_id, text } => {
                self.answers.push((callback_id.clone(), text.clone()));
            }
        }
    }

    pub fn deliver_all(&mut self, actions: &[OutboundAction]) {
        for action in actions {
            self.deliver(action);
        }
    }
}
