//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//! output_dir = "out"
//! scenarios = ["corner-NE", "corner-SE"]
//! agents = ["lo", "med", { id = "hi-twin", policy = "hi" }]
//!
//! [search]
//! iterations = 200
//! capacity = 10
//! simulations = 30
//! exploration = 1.414
//!
//! [reward]
//! alpha = 10.0
//! beta = 5.0
//! horizon = 100
//! ```
//!
//! Scenarios are built-in names or inline tables with the full initial
//! state. Agents are built-in policy names or `{ id, policy }` tables.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use contrast_core::crowdnav::{CrowdParams, CrowdScenario, PolicyKind, ScoreConfig};
use contrast_core::divergence::RewardConfig;
use contrast_core::search::{MctsConfig, SearchConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Builtin(String),
    Inline(CrowdScenario),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AgentSpec {
    Builtin(String),
    Named { id: String, policy: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub iterations: usize,
    pub capacity: usize,
    pub simulations: usize,
    pub exploration: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        let search = SearchConfig::default();
        Self {
            iterations: search.iterations,
            capacity: search.capacity,
            simulations: search.mcts.simulations,
            exploration: search.mcts.exploration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    /// Uniformly sampled episodes per (pair, scenario).
    pub episodes: usize,
    /// Keep sampling until this many coupled steps have been spent.
    pub step_budget: Option<u64>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            episodes: 6,
            step_budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub episodes: usize,
    /// Required mean-score margin between consecutive built-in policies.
    pub min_gap: f64,
    /// Write every benchmark episode as a trajectory file.
    pub persist: bool,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            episodes: 100,
            min_gap: 1.0,
            persist: false,
        }
    }
}

fn default_seed() -> u64 {
    0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub scenarios: Vec<ScenarioSpec>,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub crowd: CrowdParams,
    #[serde(default)]
    pub score: ScoreConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Agent {
    pub id: String,
    pub policy: PolicyKind,
}

/// A validated configuration with every name resolved.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub seed: u64,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub scenarios: Vec<CrowdScenario>,
    pub agents: Vec<Agent>,
    pub search: SearchSection,
    pub reward: RewardConfig,
    pub baseline: BaselineSection,
    pub bench: BenchSection,
    pub crowd: CrowdParams,
    pub score: ScoreConfig,
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub scenario: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn resolve(&self, overrides: &Overrides) -> Result<Resolved> {
        let mut scenarios = self
            .scenarios
            .iter()
            .map(|s| match s {
                ScenarioSpec::Builtin(name) => builtin(name),
                ScenarioSpec::Inline(s) => {
                    s.validate()?;
                    Ok(s.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(name) = &overrides.scenario {
            let picked = match scenarios.iter().find(|s| &s.id == name) {
                Some(s) => s.clone(),
                None => builtin(name)?,
            };
            scenarios = vec![picked];
        }
        if scenarios.is_empty() {
            return Err(CliError::Config("at least one scenario is required".into()));
        }
        unique("scenario", scenarios.iter().map(|s| s.id.as_str()))?;

        let agents = self
            .agents
            .iter()
            .map(|a| {
                let (id, policy) = match a {
                    AgentSpec::Builtin(name) => (name, name),
                    AgentSpec::Named { id, policy } => (id, policy),
                };
                Ok(Agent {
                    id: id.clone(),
                    policy: policy.parse()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        unique("agent", agents.iter().map(|a| a.id.as_str()))?;

        let resolved = Resolved {
            seed: overrides.seed.unwrap_or(self.seed),
            output_dir: overrides
                .output_dir
                .clone()
                .unwrap_or_else(|| self.output_dir.clone()),
            scenarios,
            agents,
            search: self.search,
            reward: self.reward,
            baseline: self.baseline,
            bench: self.bench,
            crowd: self.crowd.clone(),
            score: self.score,
        };
        resolved.search_config(0).validate(&resolved.reward)?;
        contrast_core::crowdnav::CrowdEnv::new(resolved.crowd.clone())?;
        if resolved.baseline.episodes == 0 {
            return Err(CliError::Config("baseline.episodes must be at least 1".into()));
        }
        if resolved.bench.episodes == 0 {
            return Err(CliError::Config("bench.episodes must be at least 1".into()));
        }
        Ok(resolved)
    }
}

fn builtin(name: &str) -> Result<CrowdScenario> {
    CrowdScenario::builtin(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown scenario {name:?} (built-ins: {})",
            CrowdScenario::builtin_names().join(", ")
        ))
    })
}

fn unique<'a>(what: &str, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if id.is_empty() {
            return Err(CliError::Config(format!("empty {what} id")));
        }
        if !seen.insert(id) {
            return Err(CliError::Config(format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(())
}

impl Resolved {
    pub fn search_config(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            iterations: self.search.iterations,
            capacity: self.search.capacity,
            horizon: self.reward.horizon,
            mcts: MctsConfig {
                simulations: self.search.simulations,
                exploration: self.search.exploration,
            },
            seed,
        }
    }

    pub fn agent(&self, id: &str) -> Result<&Agent> {
        self.agents
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| CliError::Config(format!("unknown agent {id:?}")))
    }

    /// Requires the two agents needed to form at least one pair.
    pub fn require_pairs(&self) -> Result<()> {
        if self.agents.len() < 2 {
            return Err(CliError::Config(format!(
                "at least two agents are required, got {}",
                self.agents.len()
            )));
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Per-job seed derived from the run seed and the job's labels.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for l in labels {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}
