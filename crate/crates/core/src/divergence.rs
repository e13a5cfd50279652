//! Action and state divergence, and the three-branch contrast reward built
//! from them.
//!
//! Both divergences are squared Euclidean distances. The reward pays the
//! action divergence on every non-final step, and once at the end of an
//! episode pays either `alpha * d_s` (some agent reached an absorbing state)
//! or `beta * h` (the horizon ran out).

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Error, Result};
use crate::types::{ActionVector, StateVector, TerminalKind};

/// Heuristic used for the horizon branch of the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Heuristic {
    /// State divergence of the agent states at the horizon.
    #[default]
    StateDivergence,
    /// Pays nothing at the horizon.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: usize,
    pub heuristic: Heuristic,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            alpha: 10.0,
            beta: 5.0,
            horizon: 100,
            heuristic: Heuristic::StateDivergence,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        Ok(())
    }
}

fn squared_distance(kind: &str, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(invalid_input(format!(
            "{kind} length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Sum of squared differences between two action vectors.
pub fn action_divergence(a1: &ActionVector, a2: &ActionVector) -> Result<f64> {
    squared_distance("action", a1.values(), a2.values())
}

/// Sum of squared differences between two agent states.
pub fn state_divergence(s1: &StateVector, s2: &StateVector) -> Result<f64> {
    squared_distance("state", s1.values(), s2.values())
}

fn heuristic_value(cfg: &RewardConfig, states: &[StateVector; 2]) -> Result<f64> {
    match cfg.heuristic {
        Heuristic::StateDivergence => state_divergence(&states[0], &states[1]),
        Heuristic::Zero => Ok(0.0),
    }
}

/// The end-of-episode part of the reward: `alpha * d_s` when either agent
/// is in an absorbing state, `beta * h` when the horizon is reached, and
/// `None` while the episode is still running.
///
/// The absorbing-state branch wins when both guards hold.
pub fn terminal_reward(
    states: &[StateVector; 2],
    terminal: [TerminalKind; 2],
    step_count: usize,
    cfg: &RewardConfig,
) -> Result<Option<f64>> {
    if terminal.iter().any(|k| k.is_terminal()) {
        Ok(Some(cfg.alpha * state_divergence(&states[0], &states[1])?))
    } else if step_count >= cfg.horizon {
        Ok(Some(cfg.beta * heuristic_value(cfg, states)?))
    } else {
        Ok(None)
    }
}

/// The full three-branch reward evaluated on a coupled state.
pub fn search_reward(
    states: &[StateVector; 2],
    terminal: [TerminalKind; 2],
    executed_actions: &[ActionVector; 2],
    step_count: usize,
    cfg: &RewardConfig,
) -> Result<f64> {
    match terminal_reward(states, terminal, step_count, cfg)? {
        Some(r) => Ok(r),
        None => action_divergence(&executed_actions[0], &executed_actions[1]),
    }
}
