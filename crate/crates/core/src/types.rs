//! Domain types shared by the simulator, reward and search layers.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Error, Result};

fn check_finite(kind: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(invalid_input(format!(
            "{kind} entry {i} is not finite ({})",
            values[i]
        ))),
        None => Ok(()),
    }
}

macro_rules! finite_vector {
    ($(#[$meta:meta])* $name:ident, $kind:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
        pub struct $name(Vec<f64>);

        impl $name {
            pub fn new(values: Vec<f64>) -> Result<Self> {
                check_finite($kind, &values)?;
                Ok(Self(values))
            }

            pub fn zeros(len: usize) -> Self {
                Self(vec![0.0; len])
            }

            pub fn values(&self) -> &[f64] {
                &self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }
        }

        impl TryFrom<Vec<f64>> for $name {
            type Error = Error;

            fn try_from(values: Vec<f64>) -> Result<Self> {
                Self::new(values)
            }
        }

        impl From<$name> for Vec<f64> {
            fn from(v: $name) -> Vec<f64> {
                v.0
            }
        }
    };
}

finite_vector!(
    /// Continuous action emitted by an agent policy (for crowd navigation, a
    /// velocity command in m/s).
    ActionVector,
    "action"
);

finite_vector!(
    /// Agent state used for divergence (for crowd navigation, the robot
    /// position in meters).
    StateVector,
    "state"
);

/// Index into the discrete environment-action set shared by both instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EnvAction(pub usize);

impl EnvAction {
    /// Checked constructor against an action set of size `count`.
    pub fn checked(index: usize, count: usize) -> Result<Self> {
        if index < count {
            Ok(Self(index))
        } else {
            Err(invalid_input(format!(
                "environment action {index} out of range [0, {count})"
            )))
        }
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for EnvAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Per-instance episode status. Anything other than `Running` is absorbing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    #[default]
    Running,
    GoalReached,
    Collision,
}

impl TerminalKind {
    pub fn is_terminal(self) -> bool {
        self != TerminalKind::Running
    }
}

impl fmt::Display for TerminalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminalKind::Running => "running",
            TerminalKind::GoalReached => "goal_reached",
            TerminalKind::Collision => "collision",
        })
    }
}

/// One committed step of a coupled episode, with enough data to replay and
/// render it without re-simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub env_action: EnvAction,
    pub reward: f64,
    pub agent_actions: [ActionVector; 2],
    pub agent_states: [StateVector; 2],
}

/// Sum of step rewards followed by the terminal reward, accumulated left to
/// right starting from zero.
pub fn trajectory_total_reward(steps: &[StepRecord], terminal_reward: f64) -> Result<f64> {
    if !terminal_reward.is_finite() {
        return Err(invalid_input(format!(
            "terminal reward is not finite ({terminal_reward})"
        )));
    }
    let mut total = 0.0;
    for step in steps {
        if !step.reward.is_finite() {
            return Err(invalid_input(format!(
                "reward at step {} is not finite ({})",
                step.t, step.reward
            )));
        }
        total += step.reward;
    }
    Ok(total + terminal_reward)
}

/// A complete coupled episode: the environment-action sequence with per-step
/// rewards plus the single end-of-episode reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<StepRecord>,
    pub terminal_reward: f64,
    pub total_reward: f64,
    pub terminal_kinds: [TerminalKind; 2],
    pub seed: u64,
    pub pair: (String, String),
    pub init_state_id: String,
}

impl Trajectory {
    pub fn new(
        steps: Vec<StepRecord>,
        terminal_reward: f64,
        terminal_kinds: [TerminalKind; 2],
        seed: u64,
        pair: (String, String),
        init_state_id: impl Into<String>,
    ) -> Result<Self> {
        let total_reward = trajectory_total_reward(&steps, terminal_reward)?;
        Ok(Self {
            steps,
            terminal_reward,
            total_reward,
            terminal_kinds,
            seed,
            pair,
            init_state_id: init_state_id.into(),
        })
    }

    pub fn env_actions(&self) -> Vec<EnvAction> {
        self.steps.iter().map(|s| s.env_action).collect()
    }

    /// Checks the stored total against a fresh accumulation, bit for bit.
    pub fn verify_total(&self) -> Result<()> {
        let recomputed = trajectory_total_reward(&self.steps, self.terminal_reward)?;
        if recomputed.to_bits() == self.total_reward.to_bits() {
            Ok(())
        } else {
            Err(invalid_input(format!(
                "stored total reward {} differs from re-accumulated {}",
                self.total_reward, recomputed
            )))
        }
    }

    /// Final agent states, if at least one step was taken.
    pub fn final_states(&self) -> Option<&[StateVector; 2]> {
        self.steps.last().map(|s| &s.agent_states)
    }
}

/// An unordered pair of distinct agents, stored in canonical (lexicographic)
/// order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentPair {
    first: String,
    second: String,
}

impl AgentPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        if a == b {
            return Err(invalid_input(format!("agent pair needs two distinct ids, got {a:?} twice")));
        }
        let (first, second) = if a < b { (a, b) } else { (b, a) };
        Ok(Self { first, second })
    }

    pub fn first(&self) -> &str {
        &self.first
    }

    pub fn second(&self) -> &str {
        &self.second
    }

    pub fn as_tuple(&self) -> (String, String) {
        (self.first.clone(), self.second.clone())
    }
}

impl fmt::Display for AgentPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}__{}", self.first, self.second)
    }
}

/// All N(N-1)/2 unordered pairs of the given ids, in lexicographic order.
pub fn enumerate_pairs<S: AsRef<str>>(agent_ids: &[S]) -> Result<Vec<AgentPair>> {
    if agent_ids.len() < 2 {
        return Err(invalid_input(format!(
            "need at least 2 agents to form pairs, got {}",
            agent_ids.len()
        )));
    }
    let mut sorted = BTreeSet::new();
    for id in agent_ids {
        if !sorted.insert(id.as_ref()) {
            return Err(invalid_input(format!("duplicate agent id {:?}", id.as_ref())));
        }
    }
    let sorted: Vec<&str> = sorted.into_iter().collect();
    let mut pairs = Vec::with_capacity(sorted.len() * (sorted.len() - 1) / 2);
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            pairs.push(AgentPair::new(*a, *b)?);
        }
    }
    Ok(pairs)
}
