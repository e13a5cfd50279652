//! UCT over environment-action histories.
//!
//! Nodes are identified by the action prefix leading to them from the
//! initial state, so a node's statistics stay meaningful across episodes
//! that all restart from the same initial state. The tree keeps a movable
//! root: during an episode the root follows the committed actions, and it
//! returns to the origin when the next episode begins.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coupled::{CoupledSim, Environment};
use crate::divergence::{action_divergence, terminal_reward, RewardConfig};
use crate::error::{Error, Result};
use crate::types::EnvAction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MctsConfig {
    /// Simulated episodes per decision.
    pub simulations: usize,
    /// UCB1 exploration constant.
    pub exploration: f64,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            simulations: 30,
            exploration: 1.414,
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.simulations == 0 {
            return Err(Error::Config("simulations per decision must be at least 1".into()));
        }
        if !(self.exploration.is_finite() && self.exploration > 0.0) {
            return Err(Error::Config(format!(
                "exploration constant must be positive, got {}",
                self.exploration
            )));
        }
        Ok(())
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone)]
struct Node {
    parent: Option<NodeId>,
    children: Vec<Option<NodeId>>,
    visits: u64,
    value_sum: f64,
}

impl Node {
    fn new(parent: Option<NodeId>, action_count: usize) -> Self {
        Self {
            parent,
            children: vec![None; action_count],
            visits: 0,
            value_sum: 0.0,
        }
    }
}

/// One statistics update, recorded when backup logging is enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backup {
    pub node: NodeId,
    pub visits: u64,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<Node>,
    root: NodeId,
    action_count: usize,
    value_min: f64,
    value_max: f64,
    episode: Vec<(NodeId, f64)>,
    log: Option<Vec<Backup>>,
}

const ORIGIN: NodeId = 0;

impl SearchTree {
    pub fn new(action_count: usize) -> Self {
        assert!(action_count >= 1, "action set must not be empty");
        Self {
            nodes: vec![Node::new(None, action_count)],
            root: ORIGIN,
            action_count,
            value_min: f64::INFINITY,
            value_max: f64::NEG_INFINITY,
            episode: Vec::new(),
            log: None,
        }
    }

    pub fn with_backup_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn backup_log(&self) -> Option<&[Backup]> {
        self.log.as_deref()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn origin(&self) -> NodeId {
        ORIGIN
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn child(&self, node: NodeId, action: EnvAction) -> Option<NodeId> {
        self.nodes[node].children.get(action.index()).copied().flatten()
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.nodes[node].parent
    }

    pub fn visits(&self, node: NodeId) -> u64 {
        self.nodes[node].visits
    }

    /// Mean backed-up return of a node, `None` if it was never visited.
    pub fn mean_value(&self, node: NodeId) -> Option<f64> {
        let n = &self.nodes[node];
        (n.visits > 0).then(|| n.value_sum / n.visits as f64)
    }

    /// Action history leading from the origin to `node`.
    pub fn path_to(&self, mut node: NodeId) -> Vec<EnvAction> {
        let mut path = Vec::new();
        while let Some(parent) = self.nodes[node].parent {
            let a = self.nodes[parent]
                .children
                .iter()
                .position(|c| *c == Some(node))
                .expect("child is linked from its parent");
            path.push(EnvAction(a));
            node = parent;
        }
        path.reverse();
        path
    }

    /// Whether `node` lies in the subtree under the current root.
    pub fn reachable_from_root(&self, mut node: NodeId) -> bool {
        loop {
            if node == self.root {
                return true;
            }
            match self.nodes[node].parent {
                Some(p) => node = p,
                None => return false,
            }
        }
    }

    fn child_or_insert(&mut self, node: NodeId, action: usize) -> (NodeId, bool) {
        if let Some(c) = self.nodes[node].children[action] {
            return (c, false);
        }
        let id = self.nodes.len();
        self.nodes.push(Node::new(Some(node), self.action_count));
        self.nodes[node].children[action] = Some(id);
        (id, true)
    }

    fn record(&mut self, node: NodeId, visits: u64, value: f64) {
        let n = &mut self.nodes[node];
        n.visits += visits;
        n.value_sum += value;
        if let Some(log) = self.log.as_mut() {
            log.push(Backup { node, visits, value });
        }
    }

    fn observe_value(&mut self, value: f64) {
        self.value_min = self.value_min.min(value);
        self.value_max = self.value_max.max(value);
    }

    fn normalized(&self, mean: f64) -> f64 {
        let span = self.value_max - self.value_min;
        if span > 0.0 {
            (mean - self.value_min) / span
        } else {
            0.5
        }
    }

    /// UCB1 choice at `node`. Unvisited actions come first, lowest index
    /// first; otherwise the highest score wins with ties to the lowest index.
    /// Means are rescaled to [0, 1] by the range of returns seen so far.
    fn select(&self, node: NodeId, exploration: f64) -> usize {
        let n = &self.nodes[node];
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        let ln_parent = (n.visits.max(1) as f64).ln();
        for (a, child) in n.children.iter().enumerate() {
            let c = match child {
                Some(c) if self.nodes[*c].visits > 0 => &self.nodes[*c],
                _ => return a,
            };
            let mean = c.value_sum / c.visits as f64;
            let score =
                self.normalized(mean) + exploration * (ln_parent / c.visits as f64).sqrt();
            if score > best_score {
                best = a;
                best_score = score;
            }
        }
        best
    }

    /// Runs the configured number of simulated episodes from the simulator's
    /// current state and returns the root action with the highest mean
    /// return. The simulator is left in the state it was in on entry.
    pub fn get_action<E: Environment, R: Rng>(
        &mut self,
        sim: &mut CoupledSim<E>,
        reward: &RewardConfig,
        cfg: &MctsConfig,
        rng: &mut R,
    ) -> Result<EnvAction> {
        let state = sim.state()?;
        if state.is_terminal() || state.step_count >= reward.horizon {
            return Err(Error::InvalidState(
                "cannot choose an action from a terminal state".into(),
            ));
        }
        if self.action_count == 1 {
            return Ok(EnvAction(0));
        }
        for _ in 0..cfg.simulations {
            let token = sim.snapshot()?;
            let result = self.simulate(sim, reward, cfg, rng);
            sim.restore(&token)?;
            result?;
        }
        let root = &self.nodes[self.root];
        let mut best: Option<(usize, f64)> = None;
        for (a, child) in root.children.iter().enumerate() {
            let Some(mean) = child.and_then(|c| self.mean_value(c)) else {
                continue;
            };
            if best.map_or(true, |(_, m)| mean > m) {
                best = Some((a, mean));
            }
        }
        let (a, _) = best.expect("at least one simulation visits a root child");
        Ok(EnvAction(a))
    }

    fn simulate<E: Environment, R: Rng>(
        &mut self,
        sim: &mut CoupledSim<E>,
        reward: &RewardConfig,
        cfg: &MctsConfig,
        rng: &mut R,
    ) -> Result<()> {
        let mut node = self.root;
        let mut path: Vec<NodeId> = Vec::new();
        let mut rewards: Vec<f64> = Vec::new();

        // Selection and expansion.
        loop {
            let st = sim.state()?;
            if st.is_terminal() || st.step_count >= reward.horizon {
                break;
            }
            let a = self.select(node, cfg.exploration);
            let out = sim.step(EnvAction(a))?;
            rewards.push(action_divergence(&out.executed_actions[0], &out.executed_actions[1])?);
            let (child, created) = self.child_or_insert(node, a);
            path.push(child);
            node = child;
            if created {
                break;
            }
        }

        // Uniform rollout.
        loop {
            let st = sim.state()?;
            if st.is_terminal() || st.step_count >= reward.horizon {
                break;
            }
            let a = EnvAction(rng.gen_range(0..self.action_count));
            let out = sim.step(a)?;
            rewards.push(action_divergence(&out.executed_actions[0], &out.executed_actions[1])?);
        }

        let st = sim.state()?;
        let end = terminal_reward(&st.agent_states, st.terminal, st.step_count, reward)?
            .expect("rollout stops only at a terminal state or the horizon");

        // Returns-to-go for every step, then back up along the tree path.
        let mut to_go = vec![0.0; rewards.len()];
        let mut acc = end;
        for i in (0..rewards.len()).rev() {
            acc += rewards[i];
            to_go[i] = acc;
        }
        let root = self.root;
        self.record(root, 1, 0.0);
        for (i, &child) in path.iter().enumerate() {
            self.record(child, 1, to_go[i]);
            self.observe_value(to_go[i]);
        }
        Ok(())
    }

    /// Starts a new episode from the initial state.
    pub fn begin_episode(&mut self) {
        self.root = ORIGIN;
        self.episode.clear();
    }

    /// Commits an action taken in the real episode: the observed step reward
    /// is credited to the committed child and the root moves to it.
    pub fn update_policy(&mut self, action: EnvAction, observed_reward: f64) {
        let root = self.root;
        let (child, _) = self.child_or_insert(root, action.index());
        self.record(root, 1, 0.0);
        self.record(child, 1, observed_reward);
        self.episode.push((child, observed_reward));
        self.root = child;
    }

    /// Closes the episode: every committed node additionally receives the
    /// rest of its realised return (later step rewards plus the end reward).
    pub fn finish_episode(&mut self, end_reward: f64) {
        let episode = std::mem::take(&mut self.episode);
        let mut later = end_reward;
        let mut rest = vec![0.0; episode.len()];
        for i in (0..episode.len()).rev() {
            rest[i] = later;
            later += episode[i].1;
        }
        for (i, &(node, step_reward)) in episode.iter().enumerate() {
            self.record(node, 0, rest[i]);
            self.observe_value(step_reward + rest[i]);
        }
        self.root = ORIGIN;
    }

    /// Drops an unfinished episode without crediting the remaining returns.
    pub fn abort_episode(&mut self) {
        self.episode.clear();
        self.root = ORIGIN;
    }
}
