//! Social-force crowd dynamics.
//!
//! Each human relaxes toward a preferred velocity (its goal bearing, rotated
//! by the current environment action) and is pushed away from nearby humans
//! and from the robot of its own instance by exponential repulsion. All
//! humans update synchronously from the previous state.

use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use super::scenario::{HumanState, RobotState, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrowdParams {
    /// Heading rotation applied by each environment action, in degrees.
    pub heading_offsets_deg: Vec<f64>,
    /// Relaxation time toward the preferred velocity (s).
    pub relaxation_time: f64,
    /// Human-human repulsion strength (m/s^2) and range (m).
    pub human_repulsion: f64,
    pub human_range: f64,
    /// Human-robot repulsion strength (m/s^2) and range (m).
    pub robot_repulsion: f64,
    pub robot_range: f64,
    /// Interactions beyond this center distance are ignored (m).
    pub interaction_cutoff: f64,
    /// Speed cap as a multiple of each human's preferred speed.
    pub max_speed_factor: f64,
}

impl Default for CrowdParams {
    fn default() -> Self {
        Self {
            heading_offsets_deg: vec![-30.0, -15.0, 0.0, 15.0, 30.0],
            relaxation_time: 0.5,
            human_repulsion: 2.0,
            human_range: 0.3,
            robot_repulsion: 2.0,
            robot_range: 0.2,
            interaction_cutoff: 3.0,
            max_speed_factor: 1.3,
        }
    }
}

/// Direction used when two centers coincide exactly.
fn tie_direction(i: usize, j: usize) -> Vec2 {
    if i < j {
        Vec2::new(1.0, 0.0)
    } else {
        Vec2::new(-1.0, 0.0)
    }
}

fn repulsion(
    from: Vec2,
    from_radius: f64,
    other: Vec2,
    other_radius: f64,
    strength: f64,
    range: f64,
    cutoff: f64,
    tie: Vec2,
) -> Vec2 {
    let d = from - other;
    let dist = d.norm();
    if dist > cutoff {
        return Vec2::ZERO;
    }
    let n = if dist > 1e-12 { d * (1.0 / dist) } else { tie };
    n * (strength * ((from_radius + other_radius - dist) / range).exp())
}

/// Preferred velocity of a human: its goal bearing rotated by the given
/// angle, at its preferred speed (slowing to land on the goal).
pub fn preferred_velocity(h: &HumanState, cos: f64, sin: f64, dt: f64) -> Vec2 {
    let to_goal = h.goal - h.position;
    let dist = to_goal.norm();
    if dist <= 1e-12 {
        return Vec2::ZERO;
    }
    let speed = h.preferred_speed.min(dist / dt);
    (to_goal * (1.0 / dist)).rotated(cos, sin) * speed
}

/// Advances every human by one step under the heading rotation `(cos, sin)`.
pub fn step_humans(
    humans: &[HumanState],
    robot: &RobotState,
    cos: f64,
    sin: f64,
    world: &World,
    params: &CrowdParams,
) -> Vec<HumanState> {
    let dt = world.dt;
    humans
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let desired = preferred_velocity(h, cos, sin, dt);
            let mut force = (desired - h.velocity) * (1.0 / params.relaxation_time);
            for (j, other) in humans.iter().enumerate() {
                if i != j {
                    force += repulsion(
                        h.position,
                        h.radius,
                        other.position,
                        other.radius,
                        params.human_repulsion,
                        params.human_range,
                        params.interaction_cutoff,
                        tie_direction(i, j),
                    );
                }
            }
            force += repulsion(
                h.position,
                h.radius,
                robot.position,
                robot.radius,
                params.robot_repulsion,
                params.robot_range,
                params.interaction_cutoff,
                Vec2::new(0.0, 1.0),
            );

            let mut velocity =
                (h.velocity + force * dt).clamp_norm(params.max_speed_factor * h.preferred_speed);
            let mut position = h.position + velocity * dt;

            let (lo_x, hi_x) = (h.radius, world.arena.width - h.radius);
            let (lo_y, hi_y) = (h.radius, world.arena.height - h.radius);
            if position.x < lo_x || position.x > hi_x {
                position.x = position.x.clamp(lo_x, hi_x);
                velocity.x = 0.0;
            }
            if position.y < lo_y || position.y > hi_y {
                position.y = position.y.clamp(lo_y, hi_y);
                velocity.y = 0.0;
            }

            HumanState {
                position,
                velocity,
                ..*h
            }
        })
        .collect()
}
