//! Agent benchmark: each agent drives both instances of a coupled sim under
//! seeded uniform environment actions, and is scored on instance 1.
//!
//! Episode seeds depend only on the run seed, the scenario and the episode
//! index, so every agent faces the same sequence of environment actions.

use std::path::Path;
use std::sync::Arc;

use contrast_core::coupled::CoupledSim;
use contrast_core::crowdnav::{score_trajectory, CrowdEnv, CrowdPolicy, CrowdScenario, PolicyKind};
use contrast_core::search::n_first_baseline;
use contrast_core::TerminalKind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, Agent, Resolved};
use crate::error::{CliError, Result};
use crate::run::write_report;
use crate::trajfile::{Header, TrajectoryFile};

pub const REPORT: &str = "bench_report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentScore {
    pub agent: String,
    pub policy: PolicyKind,
    pub mean_score: f64,
    pub episodes: usize,
    pub goal: usize,
    pub collision: usize,
    pub timeout: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScores {
    pub scenario: String,
    pub agents: Vec<AgentScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    /// Built-in policies in expected order, as `(agent, mean score)`.
    pub compared: Vec<(String, f64)>,
    pub min_gap: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config_hash: String,
    pub seed: u64,
    pub per_scenario: Vec<ScenarioScores>,
    pub overall: Vec<AgentScore>,
    /// Agent ids by overall mean score, best first.
    pub ranking: Vec<String>,
    pub ordering: OrderingCheck,
    /// Persisted episode files relative to the output directory.
    pub files: Vec<String>,
}

struct Episode {
    score: f64,
    outcome: TerminalKind,
    file: Option<String>,
}

fn run_agent(cfg: &Resolved, agent: &Agent, scenario: &CrowdScenario) -> Result<Vec<Episode>> {
    let mut sim = CoupledSim::new(
        CrowdEnv::new(cfg.crowd.clone())?,
        Arc::new(CrowdPolicy::named(agent.id.clone(), agent.policy)),
        Arc::new(CrowdPolicy::named(agent.id.clone(), agent.policy)),
    );
    let hash = cfg.hash();
    (0..cfg.bench.episodes)
        .map(|e| {
            let seed = derive_seed(cfg.seed, &["bench", &scenario.id, &e.to_string()]);
            let traj = n_first_baseline(&mut sim, scenario, 1, &cfg.reward, seed)?.remove(0);
            let file = if cfg.bench.persist {
                let header = Header::new(
                    &hash,
                    seed,
                    [(&agent.id, agent.policy), (&agent.id, agent.policy)],
                    "bench",
                    scenario,
                    &cfg.crowd,
                    &cfg.reward,
                );
                let rel = Path::new("bench")
                    .join(&scenario.id)
                    .join(&agent.id)
                    .join(format!("episode_{e:03}.jsonl"));
                TrajectoryFile::from_trajectory(header, &traj)?.write(&cfg.output_dir.join(&rel))?;
                Some(rel.to_string_lossy().replace('\\', "/"))
            } else {
                None
            };
            Ok(Episode {
                score: score_trajectory(&traj, 0, scenario, &cfg.score),
                outcome: traj.terminal_kinds[0],
                file,
            })
        })
        .collect()
}

fn summarize(agent: &Agent, episodes: &[&Episode]) -> AgentScore {
    let count = |k: TerminalKind| episodes.iter().filter(|e| e.outcome == k).count();
    AgentScore {
        agent: agent.id.clone(),
        policy: agent.policy,
        mean_score: episodes.iter().map(|e| e.score).sum::<f64>() / episodes.len() as f64,
        episodes: episodes.len(),
        goal: count(TerminalKind::GoalReached),
        collision: count(TerminalKind::Collision),
        timeout: count(TerminalKind::Running),
    }
}

/// Strict lo < med < hi with at least `min_gap` between neighbours, over
/// whichever built-in policies are present (first agent of each kind).
fn check_ordering(overall: &[AgentScore], min_gap: f64) -> OrderingCheck {
    let compared: Vec<(String, f64)> = PolicyKind::ALL
        .iter()
        .filter_map(|k| overall.iter().find(|s| s.policy == *k))
        .map(|s| (s.agent.clone(), s.mean_score))
        .collect();
    let satisfied = compared.windows(2).all(|w| w[1].1 - w[0].1 > min_gap);
    OrderingCheck {
        compared,
        min_gap,
        satisfied,
    }
}

/// Runs the benchmark and writes `bench_report.json`.
pub fn bench_agents(cfg: &Resolved) -> Result<BenchReport> {
    if cfg.agents.is_empty() {
        return Err(CliError::Config("no agents to benchmark".into()));
    }
    let tasks: Vec<(&CrowdScenario, &Agent)> = cfg
        .scenarios
        .iter()
        .flat_map(|s| cfg.agents.iter().map(move |a| (s, a)))
        .collect();
    let results = tasks
        .par_iter()
        .map(|(s, a)| run_agent(cfg, a, s))
        .collect::<Result<Vec<_>>>()?;

    let per_agent = cfg.agents.len();
    let per_scenario = cfg
        .scenarios
        .iter()
        .zip(results.chunks(per_agent))
        .map(|(s, chunk)| ScenarioScores {
            scenario: s.id.clone(),
            agents: cfg
                .agents
                .iter()
                .zip(chunk)
                .map(|(a, eps)| summarize(a, &eps.iter().collect::<Vec<_>>()))
                .collect(),
        })
        .collect();
    let overall: Vec<AgentScore> = cfg
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let eps: Vec<&Episode> = results
                .iter()
                .skip(i)
                .step_by(per_agent)
                .flatten()
                .collect();
            summarize(a, &eps)
        })
        .collect();
    let mut ranking: Vec<&AgentScore> = overall.iter().collect();
    ranking.sort_by(|a, b| b.mean_score.total_cmp(&a.mean_score));
    let report = BenchReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        per_scenario,
        ranking: ranking.iter().map(|s| s.agent.clone()).collect(),
        ordering: check_ordering(&overall, cfg.bench.min_gap),
        overall,
        files: results
            .iter()
            .flatten()
            .filter_map(|e| e.file.clone())
            .collect(),
    };
    write_report(&cfg.output_dir.join(REPORT), &report)?;
    Ok(report)
}
