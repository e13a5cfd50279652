//! Terminal classification and single-episode scoring.

use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use super::scenario::{HumanState, RobotState};
use crate::types::TerminalKind;

/// Goal reached if the robot is within `goal_radius` of its goal; collision
/// if it touches any human. Reaching the goal wins when both hold.
pub fn check_terminal(robot: &RobotState, humans: &[HumanState], goal_radius: f64) -> TerminalKind {
    if robot.position.distance(robot.goal) <= goal_radius {
        return TerminalKind::GoalReached;
    }
    let hit = humans
        .iter()
        .any(|h| robot.position.distance(h.position) <= robot.radius + h.radius);
    if hit {
        TerminalKind::Collision
    } else {
        TerminalKind::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub success_bonus: f64,
    pub collision_penalty: f64,
    pub step_penalty: f64,
    /// Reward per meter of progress toward the goal.
    pub progress_weight: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            success_bonus: 10.0,
            collision_penalty: -10.0,
            step_penalty: -0.01,
            progress_weight: 0.1,
        }
    }
}

/// Score of one robot episode given its start, goal, per-step positions and
/// how it ended.
pub fn score_episode(
    start: Vec2,
    goal: Vec2,
    positions: &[Vec2],
    outcome: TerminalKind,
    cfg: &ScoreConfig,
) -> f64 {
    let mut score = 0.0;
    let mut prev = start.distance(goal);
    for p in positions {
        let d = p.distance(goal);
        score += cfg.step_penalty + cfg.progress_weight * (prev - d);
        prev = d;
    }
    score
        + match outcome {
            TerminalKind::GoalReached => cfg.success_bonus,
            TerminalKind::Collision => cfg.collision_penalty,
            TerminalKind::Running => 0.0,
        }
}
