//! Two simulation instances, one per agent, advanced in lockstep by a single
//! shared environment action.
//!
//! A step first applies the environment action to each instance's
//! environment state, then lets each agent act on its own instance. The two
//! instances start from the same initial state but keep their own
//! environment actors afterwards, so they may drift apart internally while
//! still seeing the same action sequence.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{ActionVector, EnvAction, StateVector, TerminalKind};

/// A deterministic mapping from an observation to a continuous action.
pub trait Policy<O>: Send + Sync {
    fn name(&self) -> &str;
    fn act(&self, observation: &O) -> ActionVector;
}

pub type PolicyRef<O> = Arc<dyn Policy<O>>;

/// A single-agent simulation whose environment can be perturbed by a discrete
/// environment action. Implementations must be deterministic.
pub trait Environment {
    /// Environment state plus the agent's own state for one instance.
    type Instance: Clone + PartialEq + fmt::Debug;
    type Observation;
    /// Fully specified initial state. Resetting must not sample anything.
    type Init;

    fn env_action_count(&self) -> usize;

    /// Dimension of the agent action vector.
    fn action_dim(&self) -> usize;

    fn init_id(&self, init: &Self::Init) -> String;

    fn reset_instance(&self, init: &Self::Init) -> Result<Self::Instance>;

    /// Updates the environment part of the instance. Must not touch the agent.
    fn apply_env_action(&self, instance: &mut Self::Instance, action: EnvAction) -> Result<()>;

    fn observe(&self, instance: &Self::Instance) -> Self::Observation;

    /// Executes an agent command and returns the action actually executed
    /// (after any clipping).
    fn apply_agent_action(
        &self,
        instance: &mut Self::Instance,
        command: &ActionVector,
    ) -> Result<ActionVector>;

    fn agent_state(&self, instance: &Self::Instance) -> StateVector;

    fn terminal(&self, instance: &Self::Instance) -> TerminalKind;
}

/// Full state of both instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledState<I> {
    pub instances: [I; 2],
    pub agent_states: [StateVector; 2],
    /// Actions executed by each agent on the most recent step (zeros after
    /// reset and for a frozen instance).
    pub last_actions: [ActionVector; 2],
    pub step_count: usize,
    pub terminal: [TerminalKind; 2],
}

impl<I> CoupledState<I> {
    pub fn is_terminal(&self) -> bool {
        self.terminal.iter().any(|k| k.is_terminal())
    }
}

/// Data produced by one coupled step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub env_action: EnvAction,
    pub executed_actions: [ActionVector; 2],
    pub agent_states: [StateVector; 2],
    pub terminal: [TerminalKind; 2],
    /// Step count after the step.
    pub step_count: usize,
}

/// Opaque token capturing a coupled state. Only valid for the simulator that
/// produced it, and only until that simulator is reset.
#[derive(Debug, Clone)]
pub struct Snapshot<I> {
    owner: u64,
    epoch: u64,
    state: CoupledState<I>,
}

impl<I> Snapshot<I> {
    pub fn step_count(&self) -> usize {
        self.state.step_count
    }
}

static NEXT_SIM_ID: AtomicU64 = AtomicU64::new(1);

pub struct CoupledSim<E: Environment> {
    env: E,
    policies: [PolicyRef<E::Observation>; 2],
    state: Option<CoupledState<E::Instance>>,
    id: u64,
    epoch: u64,
    steps_executed: u64,
}

impl<E: Environment> fmt::Debug for CoupledSim<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoupledSim")
            .field("policies", &[self.policies[0].name(), self.policies[1].name()])
            .field("state", &self.state)
            .field("epoch", &self.epoch)
            .finish()
    }
}

impl<E: Environment> CoupledSim<E> {
    pub fn new(env: E, first: PolicyRef<E::Observation>, second: PolicyRef<E::Observation>) -> Self {
        Self {
            env,
            policies: [first, second],
            state: None,
            id: NEXT_SIM_ID.fetch_add(1, Ordering::Relaxed),
            epoch: 0,
            steps_executed: 0,
        }
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn policy_names(&self) -> [&str; 2] {
        [self.policies[0].name(), self.policies[1].name()]
    }

    pub fn env_action_count(&self) -> usize {
        self.env.env_action_count()
    }

    /// Total coupled steps executed since construction, including steps that
    /// were later undone by `restore`.
    pub fn steps_executed(&self) -> u64 {
        self.steps_executed
    }

    pub fn state(&self) -> Result<&CoupledState<E::Instance>> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::InvalidState("coupled simulator has not been reset".into()))
    }

    pub fn reset(&mut self, init: &E::Init) -> Result<&CoupledState<E::Instance>> {
        let instance = self.env.reset_instance(init)?;
        let agent_state = self.env.agent_state(&instance);
        let kind = self.env.terminal(&instance);
        let zeros = ActionVector::zeros(self.env.action_dim());
        self.epoch += 1;
        self.state = Some(CoupledState {
            instances: [instance.clone(), instance],
            agent_states: [agent_state.clone(), agent_state],
            last_actions: [zeros.clone(), zeros],
            step_count: 0,
            terminal: [kind, kind],
        });
        self.state()
    }

    /// True iff either instance is in an absorbing state.
    pub fn is_terminal(&self) -> Result<bool> {
        Ok(self.state()?.is_terminal())
    }

    pub fn terminal_kinds(&self) -> Result<[TerminalKind; 2]> {
        Ok(self.state()?.terminal)
    }

    pub fn step(&mut self, action: EnvAction) -> Result<StepOutcome> {
        let count = self.env.env_action_count();
        EnvAction::checked(action.index(), count)?;
        let state = self
            .state
            .as_mut()
            .ok_or_else(|| Error::InvalidState("coupled simulator has not been reset".into()))?;
        if state.terminal.iter().all(|k| k.is_terminal()) {
            return Err(Error::InvalidState(
                "both instances are terminal; reset before stepping".into(),
            ));
        }
        let result = advance(&self.env, &self.policies, state, action);
        self.steps_executed += 1;
        if result.is_err() {
            // A faulted step may leave an instance half-updated.
            self.state = None;
        }
        result
    }

    pub fn snapshot(&self) -> Result<Snapshot<E::Instance>> {
        Ok(Snapshot {
            owner: self.id,
            epoch: self.epoch,
            state: self.state()?.clone(),
        })
    }

    pub fn restore(&mut self, token: &Snapshot<E::Instance>) -> Result<()> {
        if token.owner != self.id {
            return Err(Error::InvalidToken(
                "snapshot was taken from a different simulator".into(),
            ));
        }
        if token.epoch != self.epoch {
            return Err(Error::InvalidToken(
                "snapshot predates the most recent reset".into(),
            ));
        }
        self.state = Some(token.state.clone());
        Ok(())
    }
}

fn advance<E: Environment>(
    env: &E,
    policies: &[PolicyRef<E::Observation>; 2],
    state: &mut CoupledState<E::Instance>,
    action: EnvAction,
) -> Result<StepOutcome> {
    for i in 0..2 {
        if state.terminal[i].is_terminal() {
            state.last_actions[i] = ActionVector::zeros(env.action_dim());
            continue;
        }
        let instance = &mut state.instances[i];
        env.apply_env_action(instance, action)?;
        let observation = env.observe(instance);
        let command = policies[i].act(&observation);
        let executed = env.apply_agent_action(instance, &command)?;
        state.agent_states[i] = env.agent_state(instance);
        state.terminal[i] = env.terminal(instance);
        state.last_actions[i] = executed;
    }
    state.step_count += 1;
    Ok(StepOutcome {
        env_action: action,
        executed_actions: state.last_actions.clone(),
        agent_states: state.agent_states.clone(),
        terminal: state.terminal,
        step_count: state.step_count,
    })
}

/// Resets and applies a fixed action sequence, stopping early if the coupled
/// simulator becomes terminal.
pub fn replay_actions<E: Environment>(
    sim: &mut CoupledSim<E>,
    init: &E::Init,
    actions: &[EnvAction],
) -> Result<Vec<StepOutcome>> {
    sim.reset(init)?;
    let mut outcomes = Vec::with_capacity(actions.len());
    for &a in actions {
        if sim.is_terminal()? {
            return Err(Error::InvalidState(format!(
                "action sequence continues past a terminal state at step {}",
                outcomes.len()
            )));
        }
        outcomes.push(sim.step(a)?);
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy::{ToyEnv, ToyPolicy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_sim(g1: f64, g2: f64) -> CoupledSim<ToyEnv> {
        let env = ToyEnv::landscape(3, 0);
        CoupledSim::new(
            env,
            Arc::new(ToyPolicy::new("p1", g1)),
            Arc::new(ToyPolicy::new("p2", g2)),
        )
    }

    #[test]
    fn reset_is_deterministic_and_symmetric() {
        let mut sim = toy_sim(1.0, 0.5);
        let a = sim.reset(&()).unwrap().clone();
        let b = sim.reset(&()).unwrap().clone();
        assert_eq!(a, b);
        assert_eq!(a.agent_states[0], a.agent_states[1]);
        assert_eq!(a.step_count, 0);
        assert!(!sim.is_terminal().unwrap());
    }

    #[test]
    fn reset_after_steps_matches_fresh() {
        let mut sim = toy_sim(1.0, -0.5);
        let fresh = sim.reset(&()).unwrap().clone();
        for i in 0..50 {
            if sim.is_terminal().unwrap() {
                break;
            }
            sim.step(EnvAction(i % 3)).unwrap();
        }
        assert_eq!(sim.reset(&()).unwrap(), &fresh);
        let mut never_stepped = toy_sim(1.0, -0.5);
        assert_eq!(never_stepped.reset(&()).unwrap(), &fresh);
    }

    #[test]
    fn identical_policies_stay_identical() {
        let mut sim = toy_sim(0.7, 0.7);
        sim.reset(&()).unwrap();
        for i in 0..4 {
            let out = sim.step(EnvAction((i * 2) % 3)).unwrap();
            assert_eq!(out.agent_states[0], out.agent_states[1]);
            assert_eq!(out.executed_actions[0], out.executed_actions[1]);
        }
    }

    #[test]
    fn stepping_before_reset_or_out_of_range_fails() {
        let mut sim = toy_sim(1.0, 0.0);
        assert!(matches!(sim.step(EnvAction(0)), Err(Error::InvalidState(_))));
        sim.reset(&()).unwrap();
        assert!(matches!(sim.step(EnvAction(3)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn shared_action_reaches_both_instances() {
        let mut sim = toy_sim(1.3, -0.2);
        sim.reset(&()).unwrap();
        let seq = [2, 0, 1, 1];
        for &a in &seq {
            sim.step(EnvAction(a)).unwrap();
        }
        let state = sim.state().unwrap();
        assert_eq!(state.instances[0].applied, seq.to_vec());
        assert_eq!(state.instances[1].applied, seq.to_vec());
    }

    #[test]
    fn snapshot_restore_reproduces_evolution() {
        let mut sim = toy_sim(1.0, 0.25);
        sim.reset(&()).unwrap();
        sim.step(EnvAction(1)).unwrap();
        let token = sim.snapshot().unwrap();
        let was_terminal = sim.is_terminal().unwrap();
        let first: Vec<_> = [0, 2, 1].iter().map(|&a| sim.step(EnvAction(a)).unwrap()).collect();
        sim.restore(&token).unwrap();
        assert_eq!(sim.is_terminal().unwrap(), was_terminal);
        let second: Vec<_> = [0, 2, 1].iter().map(|&a| sim.step(EnvAction(a)).unwrap()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn foreign_and_stale_tokens_are_rejected() {
        let mut a = toy_sim(1.0, 0.0);
        let mut b = toy_sim(1.0, 0.0);
        a.reset(&()).unwrap();
        b.reset(&()).unwrap();
        let token = a.snapshot().unwrap();
        assert!(matches!(b.restore(&token), Err(Error::InvalidToken(_))));
        a.reset(&()).unwrap();
        assert!(matches!(a.restore(&token), Err(Error::InvalidToken(_))));
    }

    #[test]
    fn nested_snapshots_match_replay_from_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut sim = toy_sim(1.1, -0.6);
            sim.reset(&()).unwrap();
            let mut history: Vec<EnvAction> = Vec::new();
            let mut tokens: Vec<(Snapshot<_>, Vec<EnvAction>)> = Vec::new();
            for _ in 0..12 {
                match rng.gen_range(0..3) {
                    0 => tokens.push((sim.snapshot().unwrap(), history.clone())),
                    1 if !tokens.is_empty() => {
                        let (token, prefix) = &tokens[rng.gen_range(0..tokens.len())];
                        sim.restore(token).unwrap();
                        history = prefix.clone();
                    }
                    _ => {
                        if !sim.is_terminal().unwrap() && history.len() < 4 {
                            let a = EnvAction(rng.gen_range(0..3));
                            sim.step(a).unwrap();
                            history.push(a);
                        }
                    }
                }
                let current = sim.state().unwrap().clone();
                let mut oracle = toy_sim(1.1, -0.6);
                replay_actions(&mut oracle, &(), &history).unwrap();
                assert_eq!(oracle.state().unwrap(), &current);
            }
        }
    }

    #[test]
    fn fully_terminal_sim_refuses_to_step() {
        let env = ToyEnv::landscape(3, 0).with_terminal_threshold(0.5);
        let mut sim = CoupledSim::new(
            env,
            Arc::new(ToyPolicy::new("a", 1.0)),
            Arc::new(ToyPolicy::new("b", 1.0)),
        );
        sim.reset(&()).unwrap();
        let mut steps = 0;
        while !sim.is_terminal().unwrap() {
            sim.step(EnvAction(2)).unwrap();
            steps += 1;
            assert!(steps < 100);
        }
        assert!(matches!(sim.step(EnvAction(0)), Err(Error::InvalidState(_))));
    }

    #[test]
    fn terminal_instance_is_frozen() {
        let env = ToyEnv::landscape(3, 0).with_terminal_threshold(0.5);
        let mut sim = CoupledSim::new(
            env,
            Arc::new(ToyPolicy::new("fast", 1.0)),
            Arc::new(ToyPolicy::new("slow", 0.01)),
        );
        sim.reset(&()).unwrap();
        while !sim.is_terminal().unwrap() {
            sim.step(EnvAction(2)).unwrap();
        }
        let kinds = sim.terminal_kinds().unwrap();
        let done = kinds.iter().position(|k| k.is_terminal()).unwrap();
        let frozen = sim.state().unwrap().agent_states[done].clone();
        for _ in 0..5 {
            let out = sim.step(EnvAction(1)).unwrap();
            assert_eq!(out.agent_states[done], frozen);
            assert!(out.executed_actions[done].values().iter().all(|&v| v == 0.0));
            assert!(out.terminal[done].is_terminal());
        }
    }
}
