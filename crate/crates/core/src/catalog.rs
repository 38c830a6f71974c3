//! Message catalog: every user-visible string rendered by the gateway or
//! the reminder scheduler lives here, so deployments can swap languages
//! without touching engine code.

use std::collections::BTreeMap;

/// Template catalog with `{placeholder}` substitution.
#[derive(Debug, Clone)]
pub struct MessageCatalog {
    entries: BTreeMap<String, String>,
}

impl Default for MessageCatalog {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        let defaults: &[(&str, &str)] = &[
            ("welcome", "Welcome, {name}! Send formal versions of the sentences you receive, or vote on other suggestions."),
            ("task_header", "Task {task_id}: {informal}"),
            ("candidate_row", "{index}. {text}  [{point}]"),
            ("no_candidates", "No suggestions yet. Be the first!"),
            ("vote_up_label", "\u{1F44D} {index}"),
            ("vote_down_label", "\u{1F44E} {index}"),
            ("new_candidate_label", "\u{2795} Suggest"),
            ("skip_label", "\u{23ED} Skip"),
            ("next_label", "\u{27A1} Next"),
            ("leaderboard_label", "\u{1F3C6} Ranks"),
            ("progress_label", "\u{1F4CA} Progress"),
            ("prompt_candidate", "Send your formal version of: {informal}"),
            ("prompt_candidate_ack", "Waiting for your suggestion."),
            ("ack_ok", "OK"),
            ("candidate_accepted", "Suggestion saved. +{delta} points!"),
            ("vote_accepted", "Vote counted. +{delta} points!"),
            ("skip_done", "Skipped."),
            ("rejected", "Not accepted: {reason}."),
            ("exhausted", "No tasks left for you right now. Well done!"),
            ("leaderboard_header", "Top participants:"),
            ("leaderboard_row", "{rank}. {name} \u{2014} {points} pts"),
            ("progress_text", "You completed {percent}% of all tasks. Points: {points}, level {level}."),
            ("reminder_rank", "You are rank {rank} with {points} points \u{2014} only {gap} points behind the next competitor!"),
            ("reminder_leader", "You lead the board with {points} points. Keep it up!"),
            ("malformed_callback", "Sorry, that button no longer works."),
            ("use_start", "Please send /start first."),
            ("send_text_hint", "Press \u{2795} Suggest on a task before sending text."),
            ("achievement_unlocked", "Achievement unlocked: {name}!"),
        ];
        for (k, v) in defaults {
            entries.insert((*k).to_owned(), (*v).to_owned());
        }
        MessageCatalog { entries }
    }
}

impl MessageCatalog {
    /// Overlay entries parsed from `key = "template"` TOML-style lines.
    pub fn with_overrides(mut self, overrides: &BTreeMap<String, String>) -> Self {
        for (k, v) in overrides {
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }

    /// Render a template, substituting `{name}` placeholders. Unknown keys
    /// render as the key itself so missing catalog entries stay visible.
    pub fn render(&self, key: &str, params: &[(&str, &str)]) -> String {
        let mut out = match self.entries.get(key) {
            Some(t) => t.clone(),
            None => return key.to_owned(),
        };
        for (name, value) in params {
            out = out.replace(&format!("{{{name}}}"), value);
        }
        out
    }
}
