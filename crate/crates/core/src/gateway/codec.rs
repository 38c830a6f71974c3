//! Compact callback-data codec. Messenger inline buttons carry at most 64
//! bytes of opaque callback data, so payloads encode as `<tag>|<id>` with
//! short ASCII tags.

use serde::Serialize;
use thiserror::Error;

use crate::model::{CandidateId, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum CallbackPayload {
    VoteUp { candidate: CandidateId },
    VoteDown { candidate: CandidateId },
    NewCandidatePrompt { task: TaskId },
    Skip { task: TaskId },
    NextTask,
    ShowLeaderboard,
    ShowProgress,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed callback data: {0:?}")]
pub struct MalformedCallback(pub String);

pub fn encode(payload: &CallbackPayload) -> String {
    let encoded = match payload {
        CallbackPayload::VoteUp { candidate } => format!("v+|{candidate}"),
        CallbackPayload::VoteDown { candidate } => format!("v-|{candidate}"),
        CallbackPayload::NewCandidatePrompt { task } => format!("c|{task}"),
        CallbackPayload::Skip { task } => format!("s|{task}"),
        CallbackPayload::NextTask => "n".to_owned(),
        CallbackPayload::ShowLeaderboard => "lb".to_owned(),
        CallbackPayload::ShowProgress => "pg".to_owned(),
    };
    debug_assert!(encoded.len() <= 64);
    encoded
}

pub fn decode(data: &str) -> Result<CallbackPayload, MalformedCallback> {
    let malformed = || MalformedCallback(data.to_owned());
    if data.len() > 64 {
        return Err(malformed());
    }
    match data.split_once('|') {
        None => match data {
            "n" => Ok(CallbackPayload::NextTask),
            "lb" => Ok(CallbackPayload::ShowLeaderboard),
            "pg" => Ok(CallbackPayload::ShowProgress),
            _ => Err(malformed()),
        },
        Some((tag, id)) => {
            if id.is_empty() || !id.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed());
            }
            let id: u64 = id.parse().map_err(|_| malformed())?;
            match tag {
                "v+" => Ok(CallbackPayload::VoteUp {
                    candidate: CandidateId(id),
                }),
                "v-" => Ok(CallbackPayload::VoteDown {
                    candidate: CandidateId(id),
                }),
                "c" => Ok(CallbackPayload::NewCandidatePrompt { task: TaskId(id) }),
                "s" => Ok(CallbackPayload::Skip { task: TaskId(id) }),
                _ => Err(malformed()),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encodes_by_definition() {
        assert_eq!(
            encode(&CallbackPayload::VoteUp {
                candidate: CandidateId(123)
            }),
            "v+|123"
        );
        assert_eq!(encode(&CallbackPayload::NextTask), "n");
    }

    #[test]
    fn decodes_round_trip() {
        assert_eq!(
            decode("v+|123").unwrap(),
            CallbackPayload::VoteUp {
                candidate: CandidateId(123)
            }
        );
        assert_eq!(
            decode("s|7").unwrap(),
            CallbackPayload::Skip { task: TaskId(7) }
        );
    }

    #[test]
    fn rejects_malformed_data() {
        for bad in ["zz|", "v+|", "v+|abc", "v+|-3", "", "x", "v+|1|2x"] {
            assert!(decode(bad).is_err(), "expected rejection of {bad:?}");
        }
    }
}
