//! Parametric robot policies of graded quality.
//!
//! All three share the same goal attraction at full speed. `lo` does nothing
//! else. `med` adds a reactive push away from humans that are already close.
//! `hi` looks ahead along the relative motion of each human and steers away
//! from predicted near-misses before they happen, in addition to the close
//! range push. `med` and `hi` both prefer to pass humans on their right.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::Vec2;
use super::scenario::{HumanState, RobotState};
use crate::coupled::Policy;
use crate::error::{Error, Result};
use crate::types::ActionVector;

#[derive(Debug, Clone, PartialEq)]
pub struct CrowdObservation {
    pub robot: RobotState,
    pub humans: Vec<HumanState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Lo,
    Med,
    Hi,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Lo, PolicyKind::Med, PolicyKind::Hi];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Lo => "lo",
            PolicyKind::Med => "med",
            PolicyKind::Hi => "hi",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lo" => Ok(PolicyKind::Lo),
            "med" => Ok(PolicyKind::Med),
            "hi" => Ok(PolicyKind::Hi),
            other => Err(Error::Config(format!(
                "unknown policy {other:?} (expected lo, med or hi)"
            ))),
        }
    }
}

/// Close-range push away from humans inside `range` (center distance).
#[derive(Debug, Clone, Copy, PartialEq)]
struct Reactive {
    range: f64,
    gain: f64,
    lateral: f64,
}

/// Look-ahead avoidance of predicted close approaches.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Predictive {
    horizon: f64,
    clearance: f64,
    gain: f64,
    lateral: f64,
    brake: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrowdPolicy {
    name: String,
    kind: PolicyKind,
    reactive: Option<Reactive>,
    predictive: Option<Predictive>,
}

impl CrowdPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        Self::named(kind.as_str(), kind)
    }

    /// The built-in policy `kind` registered under another name.
    pub fn named(name: impl Into<String>, kind: PolicyKind) -> Self {
        let (reactive, predictive) = match kind {
            PolicyKind::Lo => (None, None),
            PolicyKind::Med => (
                Some(Reactive {
                    range: 1.05,
                    gain: 1.2,
                    lateral: 0.5,
                }),
                None,
            ),
            PolicyKind::Hi => (
                Some(Reactive {
                    range: 1.2,
                    gain: 1.5,
                    lateral: 0.5,
                }),
                Some(Predictive {
                    horizon: 3.0,
                    clearance: 1.0,
                    gain: 2.0,
                    lateral: 0.6,
                    brake: 0.6,
                }),
            ),
        };
        Self {
            name: name.into(),
            kind,
            reactive,
            predictive,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn command(&self, obs: &CrowdObservation) -> Vec2 {
        let robot = &obs.robot;
        let goal_dir = (robot.goal - robot.position).normalized();
        let preferred = goal_dir * robot.max_speed;
        let mut v = preferred;
        let mut slow = 0.0f64;

        if let Some(r) = self.reactive {
            for h in &obs.humans {
                let away = robot.position - h.position;
                let dist = away.norm();
                if dist >= r.range {
                    continue;
                }
                let gap = (dist - h.radius - robot.radius).max(0.05);
                let span = r.range - h.radius - robot.radius;
                let w = r.gain * ((span - gap) / span).max(0.0);
                v += (away.normalized() + goal_dir.right() * r.lateral) * (w * robot.max_speed);
            }
        }

        if let Some(p) = self.predictive {
            for h in &obs.humans {
                let rel = h.position - robot.position;
                let rel_v = h.velocity - preferred;
                let speed_sq = rel_v.norm_sq();
                let t_star = if speed_sq > 1e-12 {
                    (-rel.dot(rel_v) / speed_sq).clamp(0.0, p.horizon)
                } else {
                    0.0
                };
                let closest = rel + rel_v * t_star;
                let miss = closest.norm();
                let safe = h.radius + robot.radius + p.clearance;
                if miss >= safe || rel.norm() > safe + p.horizon * speed_sq.sqrt() {
                    continue;
                }
                let urgency = (1.0 - t_star / p.horizon) * (safe - miss) / safe;
                let dodge = if miss > 1e-6 {
                    -closest * (1.0 / miss)
                } else {
                    goal_dir.right()
                };
                v += (dodge + goal_dir.right() * p.lateral) * (p.gain * urgency * robot.max_speed);
                slow = slow.max(p.brake * urgency);
            }
        }

        (v * (1.0 - slow.min(0.9))).clamp_norm(robot.max_speed)
    }
}

impl Policy<CrowdObservation> for CrowdPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&self, obs: &CrowdObservation) -> ActionVector {
        let v = self.command(obs);
        ActionVector::new(vec![v.x, v.y]).expect("policy commands are finite")
    }
}
