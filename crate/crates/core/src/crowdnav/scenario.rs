use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use crate::error::{Error, Result};

pub const HUMAN_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanState {
    pub position: Vec2,
    #[serde(default)]
    pub velocity: Vec2,
    pub goal: Vec2,
    pub radius: f64,
    pub preferred_speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotState {
    pub position: Vec2,
    #[serde(default)]
    pub velocity: Vec2,
    pub goal: Vec2,
    pub radius: f64,
    pub max_speed: f64,
}

/// Axis-aligned arena `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

/// World constants shared by every step of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub arena: Arena,
    pub dt: f64,
    pub goal_radius: f64,
}

/// A fully specified initial state: arena, timing, the crowd and the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrowdScenario {
    pub id: String,
    pub arena: Arena,
    pub dt: f64,
    pub goal_radius: f64,
    pub humans: Vec<HumanState>,
    pub robot: RobotState,
}

fn config_err(id: &str, msg: String) -> Error {
    Error::Config(format!("scenario {id:?}: {msg}"))
}

impl CrowdScenario {
    pub fn world(&self) -> World {
        World {
            arena: self.arena,
            dt: self.dt,
            goal_radius: self.goal_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.id.as_str();
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(config_err(id, format!("{name} must be positive, got {v}")))
            }
        };
        positive("arena width", self.arena.width)?;
        positive("arena height", self.arena.height)?;
        positive("dt", self.dt)?;
        positive("goal radius", self.goal_radius)?;
        if self.humans.len() != HUMAN_COUNT {
            return Err(config_err(
                id,
                format!("expected {HUMAN_COUNT} humans, got {}", self.humans.len()),
            ));
        }
        let r = &self.robot;
        positive("robot radius", r.radius)?;
        positive("robot max speed", r.max_speed)?;
        if ![r.position, r.velocity, r.goal].iter().all(|v| v.is_finite()) {
            return Err(config_err(id, "robot state is not finite".into()));
        }
        if r.velocity.norm() > r.max_speed {
            return Err(config_err(id, "robot starts faster than its max speed".into()));
        }
        if r.position.distance(r.goal) <= self.goal_radius {
            return Err(config_err(id, "robot starts inside the goal radius".into()));
        }
        for (i, h) in self.humans.iter().enumerate() {
            positive(&format!("human {i} radius"), h.radius)?;
            positive(&format!("human {i} preferred speed"), h.preferred_speed)?;
            if ![h.position, h.velocity, h.goal].iter().all(|v| v.is_finite()) {
                return Err(config_err(id, format!("human {i} state is not finite")));
            }
            let p = h.position;
            if p.x < h.radius
                || p.y < h.radius
                || p.x > self.arena.width - h.radius
                || p.y > self.arena.height - h.radius
            {
                return Err(config_err(id, format!("human {i} starts outside the arena")));
            }
            if p.distance(r.position) <= h.radius + r.radius {
                return Err(config_err(id, format!("human {i} overlaps the robot")));
            }
            for (j, other) in self.humans.iter().enumerate().skip(i + 1) {
                if p.distance(other.position) <= h.radius + other.radius {
                    return Err(config_err(id, format!("humans {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    /// Built-in scenarios by name.
    pub fn builtin(name: &str) -> Option<CrowdScenario> {
        match name {
            "corner-NE" => Some(corner_crossing(
                name,
                Vec2::new(1.0, 1.0),
                Vec2::new(11.0, 11.0),
            )),
            "corner-SE" => Some(corner_crossing(
                name,
                Vec2::new(1.0, 11.0),
                Vec2::new(11.0, 1.0),
            )),
            _ => None,
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["corner-NE", "corner-SE"]
    }
}

/// Ten humans on a circle around the arena center, each walking to the
/// opposite side, while the robot crosses corner to corner.
fn corner_crossing(id: &str, start: Vec2, goal: Vec2) -> CrowdScenario {
    let center = Vec2::new(6.0, 6.0);
    let circle = 5.0;
    let humans = (0..HUMAN_COUNT)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / HUMAN_COUNT as f64 + PI / 10.0;
            let offset = Vec2::new(theta.cos(), theta.sin()) * circle;
            HumanState {
                position: center + offset,
                velocity: Vec2::ZERO,
                goal: center - offset,
                radius: 0.3,
                preferred_speed: 0.6 + 0.4 * ((k * 7) % HUMAN_COUNT) as f64 / 9.0,
            }
        })
        .collect();
    CrowdScenario {
        id: id.to_string(),
        arena: Arena {
            width: 12.0,
            height: 12.0,
        },
        dt: 0.25,
        goal_radius: 0.3,
        humans,
        robot: RobotState {
            position: start,
            velocity: Vec2::ZERO,
            goal,
            radius: 0.3,
            max_speed: 1.0,
        },
    }
}
