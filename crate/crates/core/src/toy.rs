//! A tiny analytic environment for exercising the coupled simulator and the
//! search against exhaustive enumeration.
//!
//! The environment state is a scalar "wind" driven by the environment action;
//! the agent state is a point in the plane that each policy pushes around in
//! response to the wind it observes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coupled::{Environment, Policy};
use crate::error::Result;
use crate::types::{ActionVector, EnvAction, StateVector, TerminalKind};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyEnv {
    /// Wind impulse added by each environment action.
    pub effects: Vec<f64>,
    /// Fraction of the previous wind that persists into the next step.
    pub persistence: f64,
    /// Agent reaches an absorbing state once `|x| >= threshold` or `|y| >= threshold`.
    pub terminal_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyInstance {
    pub wind: f64,
    pub position: [f64; 2],
    /// Every environment action this instance has received, in order.
    pub applied: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyObservation {
    pub wind: f64,
    pub position: [f64; 2],
}

impl ToyEnv {
    /// A landscape with `action_count` actions whose effects are drawn from a
    /// fixed generator keyed on `variant`.
    pub fn landscape(action_count: usize, variant: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7019_0000 ^ variant);
        let effects = (0..action_count).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let persistence = rng.gen_range(0.2..0.9);
        Self {
            effects,
            persistence,
            terminal_threshold: None,
        }
    }

    pub fn with_terminal_threshold(mut self, threshold: f64) -> Self {
        self.terminal_threshold = Some(threshold);
        self
    }
}

impl Environment for ToyEnv {
    type Instance = ToyInstance;
    type Observation = ToyObservation;
    type Init = ();

    fn env_action_count(&self) -> usize {
        self.effects.len()
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn init_id(&self, _init: &()) -> String {
        "toy".into()
    }

    fn reset_instance(&self, _init: &()) -> Result<ToyInstance> {
        Ok(ToyInstance {
            wind: 0.0,
            position: [0.0, 0.0],
            applied: Vec::new(),
        })
    }

    fn apply_env_action(&self, instance: &mut ToyInstance, action: EnvAction) -> Result<()> {
        instance.wind = self.persistence * instance.wind + self.effects[action.index()];
        instance.applied.push(action.index());
        Ok(())
    }

    fn observe(&self, instance: &ToyInstance) -> ToyObservation {
        ToyObservation {
            wind: instance.wind,
            position: instance.position,
        }
    }

    fn apply_agent_action(
        &self,
        instance: &mut ToyInstance,
        command: &ActionVector,
    ) -> Result<ActionVector> {
        let v = command.values();
        instance.position[0] += v[0];
        instance.position[1] += v[1];
        Ok(command.clone())
    }

    fn agent_state(&self, instance: &ToyInstance) -> StateVector {
        StateVector::new(instance.position.to_vec()).expect("toy positions are finite")
    }

    fn terminal(&self, instance: &ToyInstance) -> TerminalKind {
        match self.terminal_threshold {
            Some(th) if instance.position.iter().any(|p| p.abs() >= th) => TerminalKind::GoalReached,
            _ => TerminalKind::Running,
        }
    }
}

/// Responds to the wind with gain `gain` and drifts back toward the origin
/// along the second axis.
#[derive(Debug, Clone)]
pub struct ToyPolicy {
    name: String,
    pub gain: f64,
}

impl ToyPolicy {
    pub fn new(name: impl Into<String>, gain: f64) -> Self {
        Self {
            name: name.into(),
            gain,
        }
    }
}

impl Policy<ToyObservation> for ToyPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn act(&self, obs: &ToyObservation) -> ActionVector {
        let w = obs.wind;
        ActionVector::new(vec![
            self.gain * w,
            self.gain * w * w - 0.5 * obs.position[1],
        ])
        .expect("toy actions are finite")
    }
}
