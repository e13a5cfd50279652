//! Line-delimited trajectory files.
//!
//! The first line is a header carrying everything needed to re-simulate the
//! episode (scenario, crowd parameters, reward weights, policies), then one
//! line per step, then a footer. Step and footer numbers are written as
//! shortest round-trip decimal strings so that every value reloads to the
//! same bits.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use contrast_core::coupled::CoupledSim;
use contrast_core::crowdnav::{CrowdEnv, CrowdParams, CrowdPolicy, CrowdScenario, HumanState, PolicyKind};
use contrast_core::divergence::{action_divergence, state_divergence, terminal_reward, RewardConfig};
use contrast_core::{trajectory_total_reward, EnvAction, StepRecord, TerminalKind, Trajectory};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{CliError, Result};

pub const FORMAT: &str = "contrast-trajectory";
pub const VERSION: u32 = 1;

/// A float that serializes as an exact decimal string.
#[derive(Clone, Copy)]
pub struct Num(pub f64);

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl fmt::Debug for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:?}", self.0))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let v: f64 = s.parse().map_err(de::Error::custom)?;
        if !v.is_finite() {
            return Err(de::Error::custom(format!("non-finite number {s:?}")));
        }
        Ok(Num(v))
    }
}

fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().copied().map(Num).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub pair: [String; 2],
    pub policies: [PolicyKind; 2],
    pub scenario_id: String,
    /// Where the trajectory came from: `search`, `baseline` or `bench`.
    pub source: String,
    pub scenario: CrowdScenario,
    pub crowd: CrowdParams,
    pub reward: RewardConfig,
}

/// Position and velocity of one human, `[x, y, vx, vy]`.
pub type HumanRecord = [Num; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub t: usize,
    pub env_action: usize,
    pub reward: Num,
    pub action_1: Vec<Num>,
    pub action_2: Vec<Num>,
    pub state_1: Vec<Num>,
    pub state_2: Vec<Num>,
    pub humans: [Vec<HumanRecord>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Footer {
    pub terminal: [TerminalKind; 2],
    pub terminal_reward: Num,
    pub total_reward: Num,
    pub final_state_divergence: Num,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub header: Header,
    pub records: Vec<Record>,
    pub footer: Footer,
}

fn human_record(h: &HumanState) -> HumanRecord {
    [
        Num(h.position.x),
        Num(h.position.y),
        Num(h.velocity.x),
        Num(h.velocity.y),
    ]
}

fn record(step: &StepRecord, humans: [Vec<HumanRecord>; 2]) -> Record {
    Record {
        t: step.t,
        env_action: step.env_action.index(),
        reward: Num(step.reward),
        action_1: nums(step.agent_actions[0].values()),
        action_2: nums(step.agent_actions[1].values()),
        state_1: nums(step.agent_states[0].values()),
        state_2: nums(step.agent_states[1].values()),
        humans,
    }
}

/// Result of re-running an action sequence from a header. On failure the
/// records simulated so far are kept and `failure` names the step.
#[derive(Debug)]
pub struct Resimulation {
    pub records: Vec<Record>,
    pub steps: Vec<StepRecord>,
    pub footer: Option<Footer>,
    pub failure: Option<(usize, String)>,
}

impl Header {
    pub fn new(
        config_hash: &str,
        seed: u64,
        pair: [(&str, PolicyKind); 2],
        source: &str,
        scenario: &CrowdScenario,
        crowd: &CrowdParams,
        reward: &RewardConfig,
    ) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            config_hash: config_hash.into(),
            seed,
            pair: [pair[0].0.into(), pair[1].0.into()],
            policies: [pair[0].1, pair[1].1],
            scenario_id: scenario.id.clone(),
            source: source.into(),
            scenario: scenario.clone(),
            crowd: crowd.clone(),
            reward: *reward,
        }
    }

    pub fn coupled_sim(&self) -> Result<CoupledSim<CrowdEnv>> {
        let env = CrowdEnv::new(self.crowd.clone())?;
        Ok(CoupledSim::new(
            env,
            Arc::new(CrowdPolicy::named(self.pair[0].clone(), self.policies[0])),
            Arc::new(CrowdPolicy::named(self.pair[1].clone(), self.policies[1])),
        ))
    }

    /// Re-simulates `actions` from the header's initial state.
    pub fn resimulate(&self, actions: &[usize]) -> Result<Resimulation> {
        let mut sim = self.coupled_sim()?;
        sim.reset(&self.scenario)?;
        let horizon = self.reward.horizon;
        let mut out = Resimulation {
            records: Vec::with_capacity(actions.len()),
            steps: Vec::with_capacity(actions.len()),
            footer: None,
            failure: None,
        };
        for (t, &a) in actions.iter().enumerate() {
            let st = sim.state()?;
            if st.is_terminal() || st.step_count >= horizon {
                out.failure = Some((t, "episode already ended before this step".into()));
                return Ok(out);
            }
            let stepped = match sim.step(EnvAction(a)) {
                Ok(s) => s,
                Err(e) => {
                    out.failure = Some((t, e.to_string()));
                    return Ok(out);
                }
            };
            let step = StepRecord {
                t,
                env_action: stepped.env_action,
                reward: action_divergence(&stepped.executed_actions[0], &stepped.executed_actions[1])?,
                agent_actions: stepped.executed_actions,
                agent_states: stepped.agent_states,
            };
            let st = sim.state()?;
            let humans = [0, 1].map(|i| st.instances[i].humans.iter().map(human_record).collect());
            out.records.push(record(&step, humans));
            out.steps.push(step);
        }
        let st = sim.state()?;
        let Some(end) = terminal_reward(&st.agent_states, st.terminal, st.step_count, &self.reward)?
        else {
            out.failure = Some((
                actions.len(),
                "episode has neither ended nor reached the horizon".into(),
            ));
            return Ok(out);
        };
        out.footer = Some(Footer {
            terminal: st.terminal,
            terminal_reward: Num(end),
            total_reward: Num(trajectory_total_reward(&out.steps, end)?),
            final_state_divergence: Num(state_divergence(&st.agent_states[0], &st.agent_states[1])?),
        });
        Ok(out)
    }
}

impl TrajectoryFile {
    /// Builds the file for a trajectory produced elsewhere, re-simulating to
    /// collect the crowd states and checking that every step agrees.
    pub fn from_trajectory(header: Header, trajectory: &Trajectory) -> Result<Self> {
        let actions: Vec<usize> = trajectory.steps.iter().map(|s| s.env_action.index()).collect();
        let sim = header.resimulate(&actions)?;
        if let Some((t, msg)) = sim.failure {
            return Err(CliError::Verification(format!("trajectory does not re-simulate at step {t}: {msg}")));
        }
        if sim.steps != trajectory.steps {
            return Err(CliError::Verification("re-simulated steps differ from the trajectory".into()));
        }
        let footer = sim.footer.expect("successful re-simulation has a footer");
        if footer.total_reward != Num(trajectory.total_reward)
            || footer.terminal_reward != Num(trajectory.terminal_reward)
            || footer.terminal != trajectory.terminal_kinds
        {
            return Err(CliError::Verification("re-simulated outcome differs from the trajectory".into()));
        }
        Ok(Self {
            header,
            records: sim.records,
            footer,
        })
    }

    pub fn actions(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.env_action).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string(&self.header).expect("header serializes");
        s.push('\n');
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s.push_str(&serde_json::to_string(&self.footer).expect("footer serializes"));
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        }
        let mut f = fs::File::create(path).map_err(CliError::io(path))?;
        f.write_all(self.to_text().as_bytes()).map_err(CliError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text).map_err(|msg| CliError::Format {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < 2 {
            return Err("expected at least a header and a footer".into());
        }
        let meta: serde_json::Value =
            serde_json::from_str(lines[0]).map_err(|e| format!("header: {e}"))?;
        if meta.get("format").and_then(|v| v.as_str()) != Some(FORMAT) {
            return Err(format!("not a {FORMAT} file"));
        }
        let version = meta.get("version").and_then(|v| v.as_u64());
        if version != Some(VERSION as u64) {
            return Err(format!("unsupported format version {version:?}, expected {VERSION}"));
        }
        let header: Header = serde_json::from_value(meta).map_err(|e| format!("header: {e}"))?;
        let last = lines.len() - 1;
        let footer: Footer =
            serde_json::from_str(lines[last]).map_err(|e| format!("footer: {e}"))?;
        let records = lines[1..last]
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let r: Record =
                    serde_json::from_str(l).map_err(|e| format!("record on line {}: {e}", i + 2))?;
                if r.t != i {
                    return Err(format!("record on line {} has t = {}, expected {i}", i + 2, r.t));
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>, String>>()?;
        Ok(Self {
            header,
            records,
            footer,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        let values = [
            0.1,
            -0.0,
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            5e-324,
            f64::MAX,
            123456789.123456789,
            -2.5e-17,
        ];
        for v in values {
            let s = serde_json::to_string(&Num(v)).unwrap();
            let back: Num = serde_json::from_str(&s).unwrap();
            assert_eq!(back.0.to_bits(), v.to_bits(), "{s}");
        }
        assert!(serde_json::from_str::<Num>("\"NaN\"").is_err());
        assert!(serde_json::from_str::<Num>("\"x\"").is_err());
    }

    #[test]
    fn record_fields_keep_their_order() {
        let r = Record {
            t: 0,
            env_action: 1,
            reward: Num(0.5),
            action_1: nums(&[1.0]),
            action_2: nums(&[2.0]),
            state_1: nums(&[3.0]),
            state_2: nums(&[4.0]),
            humans: [vec![], vec![]],
        };
        let s = serde_json::to_string(&r).unwrap();
        let keys = ["\"t\"", "\"env_action\"", "\"reward\"", "\"action_1\"", "\"action_2\"", "\"state_1\"", "\"state_2\"", "\"humans\""];
        let pos: Vec<usize> = keys.iter().map(|k| s.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{s}");
    }
}
