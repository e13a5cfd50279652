//! Robot navigation through a reactive crowd of ten humans.
//!
//! The environment action rotates every human's goal-directed heading by one
//! of a fixed set of angles for the current step. The robot itself is never
//! perturbed. The agent state used for divergence is the robot position.

mod geometry;
mod humans;
mod policy;
mod scenario;
mod score;

use serde::Serialize;

pub use geometry::Vec2;
pub use humans::{preferred_velocity, step_humans, CrowdParams};
pub use policy::{CrowdObservation, CrowdPolicy, PolicyKind};
pub use scenario::{Arena, CrowdScenario, HumanState, RobotState, World, HUMAN_COUNT};
pub use score::{check_terminal, score_episode, ScoreConfig};

use crate::coupled::Environment;
use crate::error::{invalid_input, Error, Result};
use crate::types::{ActionVector, EnvAction, StateVector, TerminalKind, Trajectory};

/// Descriptor of one environment action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvActionSpec {
    pub index: usize,
    pub heading_offset_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrowdInstance {
    pub world: World,
    pub humans: Vec<HumanState>,
    pub robot: RobotState,
}

#[derive(Debug, Clone)]
pub struct CrowdEnv {
    params: CrowdParams,
    rotations: Vec<(f64, f64)>,
}

impl CrowdEnv {
    pub fn new(params: CrowdParams) -> Result<Self> {
        if params.heading_offsets_deg.is_empty() {
            return Err(Error::Config("environment action set is empty".into()));
        }
        let positive = [
            ("relaxation_time", params.relaxation_time),
            ("human_range", params.human_range),
            ("robot_range", params.robot_range),
            ("max_speed_factor", params.max_speed_factor),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let rotations = params
            .heading_offsets_deg
            .iter()
            .map(|d| {
                let r = d.to_radians();
                // Exact identity for the zero offset.
                if *d == 0.0 {
                    (1.0, 0.0)
                } else {
                    (r.cos(), r.sin())
                }
            })
            .collect();
        Ok(Self { params, rotations })
    }

    pub fn params(&self) -> &CrowdParams {
        &self.params
    }

    pub fn env_action_set(&self) -> Vec<EnvActionSpec> {
        self.params
            .heading_offsets_deg
            .iter()
            .enumerate()
            .map(|(index, &heading_offset_deg)| EnvActionSpec {
                index,
                heading_offset_deg,
            })
            .collect()
    }

    pub fn rotation(&self, action: EnvAction) -> Result<(f64, f64)> {
        self.rotations
            .get(action.index())
            .copied()
            .ok_or_else(|| {
                invalid_input(format!(
                    "environment action {} out of range [0, {})",
                    action.index(),
                    self.rotations.len()
                ))
            })
    }
}

impl Default for CrowdEnv {
    fn default() -> Self {
        Self::new(CrowdParams::default()).expect("default crowd parameters are valid")
    }
}

impl Environment for CrowdEnv {
    type Instance = CrowdInstance;
    type Observation = CrowdObservation;
    type Init = CrowdScenario;

    fn env_action_count(&self) -> usize {
        self.rotations.len()
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn init_id(&self, init: &CrowdScenario) -> String {
        init.id.clone()
    }

    fn reset_instance(&self, init: &CrowdScenario) -> Result<CrowdInstance> {
        init.validate()?;
        Ok(CrowdInstance {
            world: init.world(),
            humans: init.humans.clone(),
            robot: init.robot,
        })
    }

    fn apply_env_action(&self, inst: &mut CrowdInstance, action: EnvAction) -> Result<()> {
        let (cos, sin) = self.rotation(action)?;
        let next = step_humans(&inst.humans, &inst.robot, cos, sin, &inst.world, &self.params);
        if next.iter().any(|h| !(h.position.is_finite() && h.velocity.is_finite())) {
            return Err(Error::SimFault("human state became non-finite".into()));
        }
        inst.humans = next;
        Ok(())
    }

    fn observe(&self, inst: &CrowdInstance) -> CrowdObservation {
        CrowdObservation {
            robot: inst.robot,
            humans: inst.humans.clone(),
        }
    }

    fn apply_agent_action(
        &self,
        inst: &mut CrowdInstance,
        command: &ActionVector,
    ) -> Result<ActionVector> {
        let c = command.values();
        if c.len() != 2 {
            return Err(invalid_input(format!(
                "robot command must have 2 components, got {}",
                c.len()
            )));
        }
        let v = Vec2::new(c[0], c[1]).clamp_norm(inst.robot.max_speed);
        inst.robot.velocity = v;
        inst.robot.position += v * inst.world.dt;
        if !inst.robot.position.is_finite() {
            return Err(Error::SimFault("robot position became non-finite".into()));
        }
        ActionVector::new(vec![v.x, v.y])
    }

    fn agent_state(&self, inst: &CrowdInstance) -> StateVector {
        StateVector::new(vec![inst.robot.position.x, inst.robot.position.y])
            .expect("robot position is kept finite")
    }

    fn terminal(&self, inst: &CrowdInstance) -> TerminalKind {
        check_terminal(&inst.robot, &inst.humans, inst.world.goal_radius)
    }
}

/// Score of one instance of a recorded coupled trajectory.
pub fn score_trajectory(
    trajectory: &Trajectory,
    instance: usize,
    scenario: &CrowdScenario,
    cfg: &ScoreConfig,
) -> f64 {
    let positions: Vec<Vec2> = trajectory
        .steps
        .iter()
        .map(|s| {
            let v = s.agent_states[instance].values();
            Vec2::new(v[0], v[1])
        })
        .collect();
    score_episode(
        scenario.robot.position,
        scenario.robot.goal,
        &positions,
        trajectory.terminal_kinds[instance],
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupled::CoupledSim;
    use std::sync::Arc;

    fn sim(a: PolicyKind, b: PolicyKind) -> CoupledSim<CrowdEnv> {
        CoupledSim::new(
            CrowdEnv::default(),
            Arc::new(CrowdPolicy::new(a)),
            Arc::new(CrowdPolicy::new(b)),
        )
    }

    #[test]
    fn action_set_is_five_headings() {
        let env = CrowdEnv::default();
        let set = env.env_action_set();
        assert_eq!(set.len(), 5);
        let degs: Vec<_> = set.iter().map(|s| s.heading_offset_deg).collect();
        assert_eq!(degs, vec![-30.0, -15.0, 0.0, 15.0, 30.0]);
        assert_eq!(env.rotation(EnvAction(2)).unwrap(), (1.0, 0.0));
        assert!(env.rotation(EnvAction(5)).is_err());
    }

    #[test]
    fn malformed_scenario_fails_reset() {
        let mut s = CrowdScenario::builtin("corner-NE").unwrap();
        s.dt = -1.0;
        let mut sim = sim(PolicyKind::Lo, PolicyKind::Hi);
        assert!(matches!(sim.reset(&s), Err(Error::Config(_))));
    }

    #[test]
    fn reset_is_byte_identical() {
        let s = CrowdScenario::builtin("corner-SE").unwrap();
        let mut sim = sim(PolicyKind::Lo, PolicyKind::Hi);
        let a = serde_json::to_vec(sim.reset(&s).unwrap()).unwrap();
        let b = serde_json::to_vec(sim.reset(&s).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn same_policy_with_identity_actions_stays_bit_identical() {
        for kind in PolicyKind::ALL {
            let s = CrowdScenario::builtin("corner-NE").unwrap();
            let mut sim = sim(kind, kind);
            sim.reset(&s).unwrap();
            for _ in 0..100 {
                if sim.is_terminal().unwrap() {
                    break;
                }
                sim.step(EnvAction(2)).unwrap();
                let st = sim.state().unwrap();
                assert_eq!(st.instances[0], st.instances[1]);
            }
        }
    }

    #[test]
    fn lo_and_hi_diverge_after_encounter() {
        let s = CrowdScenario::builtin("corner-NE").unwrap();
        let mut sim = sim(PolicyKind::Lo, PolicyKind::Hi);
        sim.reset(&s).unwrap();
        let mut first = None;
        for t in 0..100 {
            if sim.is_terminal().unwrap() {
                break;
            }
            let out = sim.step(EnvAction(2)).unwrap();
            if first.is_none() && out.agent_states[0] != out.agent_states[1] {
                first = Some(t);
            }
        }
        let t = first.expect("lo and hi should separate at some point");
        // Both start at full speed toward the goal; divergence needs a human nearby.
        assert!(t > 0);
    }

    #[test]
    fn invariants_hold_under_random_actions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for name in CrowdScenario::builtin_names() {
            let s = CrowdScenario::builtin(name).unwrap();
            for (a, b) in [(PolicyKind::Lo, PolicyKind::Med), (PolicyKind::Hi, PolicyKind::Hi)] {
                let mut sim = sim(a, b);
                sim.reset(&s).unwrap();
                let mut frozen: [Option<StateVector>; 2] = [None, None];
                for _ in 0..100 {
                    if sim.state().unwrap().terminal.iter().all(|k| k.is_terminal()) {
                        break;
                    }
                    sim.step(EnvAction(rng.gen_range(0..5))).unwrap();
                    let st = sim.state().unwrap();
                    for i in 0..2 {
                        let inst = &st.instances[i];
                        assert!(inst.robot.velocity.norm() <= inst.robot.max_speed + 1e-12);
                        for h in &inst.humans {
                            assert!(h.position.x >= h.radius && h.position.x <= 12.0 - h.radius);
                            assert!(h.position.y >= h.radius && h.position.y <= 12.0 - h.radius);
                        }
                        if let Some(f) = &frozen[i] {
                            assert_eq!(&st.agent_states[i], f);
                        } else if st.terminal[i].is_terminal() {
                            frozen[i] = Some(st.agent_states[i].clone());
                        }
                    }
                }
            }
        }
    }
}
