//! Telegram Bot API wire shapes: the inbound update document and the
//! outbound method calls (`sendMessage`, `editMessageText`,
//! `answerCallbackQuery`) with inline keyboards.

use serde::Deserialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::{InboundUpdate, OutboundAction, UpdateKind};

#[derive(Debug, Deserialize)]
pub struct TgUpdate {
    pub update_id: u64,
    #[serde(default)]
    pub message: Option<TgMessage>,
    #[serde(default)]
    pub callback_query: Option<TgCallbackQuery>,
}

#[derive(Debug, Deserialize)]
pub struct TgMessage {
    pub message_id: u64,
    #[serde(default)]
    pub from: Option<TgUser>,
    pub chat: TgChat,
    #[serde(default)]
    pub text: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct TgUser {
    pub id: i64,
    #[serde(default)]
    pub first_name: Option<String>,
    #[serde(default)]
    pub username: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct TgChat {
    pub id: i64,
}

#[derive(Debug, Deserialize)]
pub struct TgCallbackQuery {
    pub id: String,
    pub from: TgUser,
    #[serde(default)]
    pub message: Option<TgMessage>,
    #[serde(default)]
    pub data: Option<String>,
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("unparseable update: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported update: {0}")]
    Unsupported(String),
}

fn display_name(user: Option<&TgUser>) -> String {
    user.and_then(|u| u.first_name.clone().or_else(|| u.username.clone()))
        .unwrap_or_else(|| "participant".to_owned())
}

/// Parse a webhook body into the gateway's inbound shape.
pub fn parse_update(body: &str) -> Result<InboundUpdate, WireError> {
    let update: TgUpdate = serde_json::from_str(body)?;
    if let Some(cb) = update.callback_query {
        let chat = cb
            .message
            .as_ref()
            .map(|m| m.chat.id)
            .unwrap_or(cb.from.id);
        return Ok(InboundUpdate {
            update_id: update.update_id,
            chat_ref: chat.to_string(),
            sender_name: display_name(Some(&cb.from)),
            kind: UpdateKind::Callback {
                callback_id: cb.id,
                data: cb.data.unwrap_or_default(),
            },
        });
    }
    if let Some(msg) = update.message {
        let text = msg
            .text
            .clone()
            .ok_or_else(|| WireError::Unsupported("message without text".to_owned()))?;
        return Ok(InboundUpdate {
            update_id: update.update_id,
            chat_ref: msg.chat.id.to_string(),
            sender_name: display_name(msg.from.as_ref()),
            kind: UpdateKind::Text { text },
        });
    }
    Err(WireError::Unsupported(
        "update carries neither message nor callback_query".to_owned(),
    ))
}

fn chat_id_value(chat_ref: &str) -> Value {
    match chat_ref.parse::<i64>() {
        Ok(id) => json!(id),
        Err(_) => json!(chat_ref),
    }
}

fn keyboard_value(keyboard: &[Vec<super::Button>]) -> Value {
    json!({
        "inline_keyboard": keyboard
            .iter()
            .map(|row| {
                row.iter()
                    .map(|b| json!({ "text": b.label, "callback_data": b.callback_data }))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    })
}

/// Render an outbound action as a Bot API method call, suitable for the
/// webhook's reply-as-method shortcut or an outbound call queue.
pub fn method_json(action: &OutboundAction) -> Value {
    match action {
        OutboundAction::SendMessage {
            chat_ref,
            text,
            keyboard,
            ..
        } => {
            let mut v = json!({
                "method": "sendMessage",
                "chat_id": chat_id_value(chat_ref),
                "text": text,
            });
            if let Some(kb) = keyboard {
                v["reply_markup"] = keyboard_value(kb);
            }
            v
        }
        OutboundAction::EditMessage {
            chat_ref,
            message_id,
            text,
            keyboard,
        } => {
            let mut v = json!({
                "method": "editMessageText",
                "chat_id": chat_id_value(chat_ref),
                "message_id": message_id,
                "text": text,
            });
            if let Some(kb) = keyboard {
                v["reply_markup"] = keyboard_value(kb);
            }
            v
        }
        OutboundAction::AnswerCallback { callback_id, text } => json!({
            "method": "answerCallbackQuery",
            "callback_query_id": callback_id,
            "text": text,
        }),
    }
}
