//! Achievement definitions. Evaluation lives in the engine, which owns the
//! counters the rules read.

use serde::{Deserialize, Serialize};

/// Named rule deciding when an achievement unlocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AchievementRule {
    /// Lifetime accepted downvote submissions reach the threshold.
    DownvotesAtLeast { threshold: u32 },
    /// The participant authored their first candidate.
    FirstAuthoredCandidate,
    /// The participant's progress reached 1.0.
    ProgressComplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Achievement {
    pub id: String,
    pub name: String,
    pub description: String,
    #[serde(flatten)]
    pub rule: AchievementRule,
    /// Award at most once per participant.
    #[serde(default = "default_once")]
    pub once: bool,
}

fn default_once() -> bool {
    true
}

/// The built-in achievement set.
pub fn builtin_achievements() -> Vec<Achievement> {
    vec![
        Achievement {
            id: "skeptic".to_owned(),
            name: "Skeptic".to_owned(),
            description: "Cast 10 downvotes to flag low-quality candidates".to_owned(),
            rule: AchievementRule::DownvotesAtLeast { threshold: 10 },
            once: true,
        },
        Achievement {
            id: "founder".to_owned(),
            name: "Founder".to_owned(),
            description: "Author your first candidate".to_owned(),
            rule: AchievementRule::FirstAuthoredCandidate,
            once: true,
        },
        Achievement {
            id: "finisher".to_owned(),
            name: "Finisher".to_owned(),
            description: "Act on every task in the project".to_owned(),
            rule: AchievementRule::ProgressComplete,
            once: true,
        },
    ]
}
