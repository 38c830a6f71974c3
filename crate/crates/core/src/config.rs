//! Project configuration: the flow thresholds, gamification tunables, EM
//! constants and scheduling knobs. One instance is the single source of
//! truth for a project's rules; it is embedded in the first event-log
//! record so replay never depends on external files.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::achievements::{builtin_achievements, Achievement};
use crate::points::LevelCurve;

/// Expectation-maximization constants for the truth-inference pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Initial per-worker accuracy estimate.
    pub init_accuracy: f64,
    /// Initial prior probability that a candidate is correct; re-estimated
    /// every M-step.
    pub prior_correct: f64,
    /// Laplace-style smoothing applied to worker counts and the prior so no
    /// estimate locks to exactly 0 or 1.
    pub epsilon: f64,
    /// Convergence threshold on the maximum per-candidate belief change.
    pub tolerance: f64,
    pub max_iterations: u32,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            init_accuracy: 0.7,
            prior_correct: 0.5,
            epsilon: 0.01,
            tolerance: 1e-6,
            max_iterations: 100,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.init_accuracy > 0.0 && self.init_accuracy < 1.0) {
            return Err(ConfigError::new("init_accuracy must be in (0, 1)"));
        }
        if !(self.prior_correct > 0.0 && self.prior_correct < 1.0) {
            return Err(ConfigError::new("prior_correct must be in (0, 1)"));
        }
        if self.epsilon <= 0.0 {
            return Err(ConfigError::new("epsilon must be positive"));
        }
        if self.tolerance <= 0.0 {
            return Err(ConfigError::new("tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(ConfigError::new("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// All flow thresholds and engine tunables for one project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectConfig {
    /// Max visible candidates per task.
    pub alpha: u32,
    /// Stay-in-list threshold; a candidate is eliminated once its point
    /// drops strictly below this.
    pub beta: i64,
    /// Low-quality agreement threshold on the candidate point.
    pub delta: i64,
    /// High-quality agreement threshold on the candidate point.
    pub eta: i64,
    /// Reward for the first accepted candidate/vote on a target.
    pub theta: i64,
    /// Reward for the second accepted candidate/vote on a target; also the
    /// per-voter agreement bonus.
    pub mu: i64,
    /// Max candidate/vote submissions per participant per target.
    pub gamma: u32,
    /// Per-downvoter author penalty (negative).
    pub rho: i64,
    pub level_curve: LevelCurve,
    pub em: EmConfig,
    /// Points granted alongside an achievement; 0 writes no ledger entry.
    pub achievement_bonus: i64,
    pub achievements: Vec<Achievement>,
    /// Week length used by the weekly BLEU series.
    pub week_length_days: u32,
    /// Minimum spacing between two reminders to the same participant.
    pub reminder_cadence_hours: u32,
    /// Idle minutes before a pending candidate-entry prompt expires.
    pub entry_timeout_minutes: u32,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            alpha: 4,
            beta: -3,
            delta: -3,
            eta: 10,
            theta: 10,
            mu: 5,
            gamma: 2,
            rho: -5,
            level_curve: LevelCurve::default(),
            em: EmConfig::default(),
            achievement_bonus: 0,
            achievements: builtin_achievements(),
            week_length_days: 7,
            reminder_cadence_hours: 24,
            entry_timeout_minutes: 10,
        }
    }
}

impl ProjectConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.alpha < 1 {
            return Err(ConfigError::new("alpha must be at least 1"));
        }
        if self.gamma < 1 {
            return Err(ConfigError::new("gamma must be at least 1"));
        }
        if !(self.theta >= self.mu && self.mu >= 0) {
            return Err(ConfigError::new("rewards must satisfy theta >= mu >= 0"));
        }
        if self.rho > 0 {
            return Err(ConfigError::new("rho must be non-positive"));
        }
        if self.beta >= 0 {
            return Err(ConfigError::new("beta must be negative"));
        }
        if self.delta >= 0 {
            return Err(ConfigError::new("delta must be negative"));
        }
        if self.eta <= 0 {
            return Err(ConfigError::new("eta must be positive"));
        }
        if self.week_length_days == 0 {
            return Err(ConfigError::new("week_length_days must be at least 1"));
        }
        self.em.validate()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid config: {0}")]
pub struct ConfigError(String);

impl ConfigError {
    fn new(msg: &str) -> Self {
        ConfigError(msg.to_owned())
    }
}
