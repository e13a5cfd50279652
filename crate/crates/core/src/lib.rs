//! Contrastive behaviour summaries for pairs of agents.
//!
//! Two agents are run side by side in a [`coupled::CoupledSim`]: one
//! simulation instance each, stepped together by a shared environment action.
//! [`search::adaptive_scenario_search`] drives the environment actions with
//! Monte Carlo tree search to find episodes where the agents behave as
//! differently as possible, scored by the [`divergence`] reward, and keeps
//! the best few. [`crowdnav`] provides the concrete robot-in-a-crowd
//! environment and three robot policies of graded quality.

pub mod coupled;
pub mod crowdnav;
pub mod divergence;
mod error;
pub mod search;
pub mod toy;
mod types;

pub use error::{Error, Result};
pub use types::{
    enumerate_pairs, trajectory_total_reward, ActionVector, AgentPair, EnvAction, StateVector,
    StepRecord, TerminalKind, Trajectory,
};
