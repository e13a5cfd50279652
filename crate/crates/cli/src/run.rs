//! Search and baseline runs over every (pair, scenario) job.
//!
//! Jobs are independent and run on the rayon pool. Each writes only under
//! its own `<output_dir>/<scenario>/<pair>/` directory; the manifest is
//! written once all jobs are done, in job order.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use contrast_core::coupled::CoupledSim;
use contrast_core::crowdnav::{CrowdEnv, CrowdPolicy, CrowdScenario};
use contrast_core::search::{adaptive_scenario_search, budgeted_baseline, n_first_baseline, select_summary};
use contrast_core::{enumerate_pairs, AgentPair, TerminalKind, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, Resolved};
use crate::error::{CliError, Result};
use crate::trajfile::{Header, TrajectoryFile};

pub const MANIFEST: &str = "manifest.json";
pub const BASELINE_MANIFEST: &str = "baseline_manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pair: [String; 2],
    pub scenario: String,
    pub seed: u64,
    /// Selected summary, relative to the output directory.
    pub summary: String,
    pub total_reward: f64,
    pub terminal: [TerminalKind; 2],
    /// The whole queue, best first.
    pub queue: Vec<String>,
    pub queue_rewards: Vec<f64>,
    pub sim_steps: u64,
    pub duplicates: usize,
    pub faults: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub pair: [String; 2],
    pub scenario: String,
    pub seed: u64,
    /// The first `baseline.episodes` episodes.
    pub episodes: Vec<String>,
    /// Best of those episodes.
    pub summary: String,
    pub total_reward: f64,
    /// Total number of episodes sampled, including any beyond the first ones
    /// drawn to use up a step budget.
    pub sampled: usize,
    pub sim_steps: u64,
    /// Best of every sampled episode, when more than the first ones were drawn.
    pub budget_summary: Option<String>,
    pub budget_total_reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineManifest {
    pub config_hash: String,
    pub seed: u64,
    pub entries: Vec<BaselineEntry>,
}

/// One unit of work: a pair of agents on one scenario.
#[derive(Debug, Clone)]
pub struct Job {
    pub pair: AgentPair,
    pub scenario: CrowdScenario,
}

impl Job {
    pub fn dir(&self) -> PathBuf {
        Path::new(&self.scenario.id).join(self.pair.to_string())
    }
}

pub fn jobs(cfg: &Resolved) -> Result<Vec<Job>> {
    cfg.require_pairs()?;
    let ids: Vec<&str> = cfg.agents.iter().map(|a| a.id.as_str()).collect();
    let pairs = enumerate_pairs(&ids)?;
    Ok(pairs
        .iter()
        .flat_map(|p| {
            cfg.scenarios.iter().map(move |s| Job {
                pair: p.clone(),
                scenario: s.clone(),
            })
        })
        .collect())
}

fn sim_for(cfg: &Resolved, job: &Job) -> Result<CoupledSim<CrowdEnv>> {
    let a = cfg.agent(job.pair.first())?;
    let b = cfg.agent(job.pair.second())?;
    Ok(CoupledSim::new(
        CrowdEnv::new(cfg.crowd.clone())?,
        Arc::new(CrowdPolicy::named(a.id.clone(), a.policy)),
        Arc::new(CrowdPolicy::named(b.id.clone(), b.policy)),
    ))
}

fn header(cfg: &Resolved, job: &Job, seed: u64, source: &str) -> Result<Header> {
    let a = cfg.agent(job.pair.first())?;
    let b = cfg.agent(job.pair.second())?;
    Ok(Header::new(
        &cfg.hash(),
        seed,
        [(&a.id, a.policy), (&b.id, b.policy)],
        source,
        &job.scenario,
        &cfg.crowd,
        &cfg.reward,
    ))
}

fn persist(out: &Path, rel: PathBuf, header: &Header, traj: &Trajectory) -> Result<String> {
    TrajectoryFile::from_trajectory(header.clone(), traj)?.write(&out.join(&rel))?;
    Ok(rel.to_string_lossy().replace('\\', "/"))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("manifest serializes");
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(path))
}

pub fn search_seed(cfg: &Resolved, job: &Job) -> u64 {
    derive_seed(cfg.seed, &["search", job.pair.first(), job.pair.second(), &job.scenario.id])
}

pub fn baseline_seed(cfg: &Resolved, job: &Job) -> u64 {
    derive_seed(cfg.seed, &["baseline", job.pair.first(), job.pair.second(), &job.scenario.id])
}

/// Adaptive search for one job; persists the queue and the selected summary.
pub fn run_search_job(cfg: &Resolved, job: &Job) -> Result<ManifestEntry> {
    let seed = search_seed(cfg, job);
    let mut sim = sim_for(cfg, job)?;
    let outcome = adaptive_scenario_search(&mut sim, &job.scenario, &cfg.search_config(seed), &cfg.reward)?;
    let summary = select_summary(&outcome.trajectories).map_err(|_| {
        CliError::Core(contrast_core::Error::SimFault(format!(
            "{} on {}: every iteration faulted",
            job.pair, job.scenario.id
        )))
    })?;
    let head = header(cfg, job, seed, "search")?;
    let dir = job.dir();
    let queue = outcome
        .trajectories
        .iter()
        .enumerate()
        .map(|(rank, t)| persist(&cfg.output_dir, dir.join(format!("queue_{rank:02}.jsonl")), &head, t))
        .collect::<Result<Vec<_>>>()?;
    let summary_path = persist(&cfg.output_dir, dir.join("summary.jsonl"), &head, summary)?;
    Ok(ManifestEntry {
        pair: [job.pair.first().into(), job.pair.second().into()],
        scenario: job.scenario.id.clone(),
        seed,
        summary: summary_path,
        total_reward: summary.total_reward,
        terminal: summary.terminal_kinds,
        queue,
        queue_rewards: outcome.trajectories.iter().map(|t| t.total_reward).collect(),
        sim_steps: outcome.sim_steps,
        duplicates: outcome.duplicates,
        faults: outcome.faults,
    })
}

/// One adaptive search per (pair, scenario), ½N(N−1) pairs per scenario;
/// writes `manifest.json` under the output directory.
pub fn run_all_pairs(cfg: &Resolved) -> Result<Manifest> {
    let jobs = jobs(cfg)?;
    let entries = jobs
        .par_iter()
        .map(|job| run_search_job(cfg, job))
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        entries,
    };
    write_json(&cfg.output_dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// Uniformly sampled episodes for one job. With a step budget, sampling
/// continues past the first episodes until the budget is spent.
pub fn run_baseline_job(cfg: &Resolved, job: &Job, step_budget: Option<u64>) -> Result<BaselineEntry> {
    let seed = baseline_seed(cfg, job);
    let n = cfg.baseline.episodes;
    let mut sim = sim_for(cfg, job)?;
    let episodes = match step_budget {
        Some(b) => budgeted_baseline(&mut sim, &job.scenario, b, n, &cfg.reward, seed)?,
        None => n_first_baseline(&mut sim, &job.scenario, n, &cfg.reward, seed)?,
    };
    let head = header(cfg, job, seed, "baseline")?;
    let dir = job.dir().join("baseline");
    let first = &episodes[..n];
    let files = first
        .iter()
        .enumerate()
        .map(|(i, t)| persist(&cfg.output_dir, dir.join(format!("episode_{i:02}.jsonl")), &head, t))
        .collect::<Result<Vec<_>>>()?;
    let best = select_summary(first)?;
    let summary = persist(&cfg.output_dir, dir.join("summary.jsonl"), &head, best)?;
    let (budget_summary, budget_total_reward) = if episodes.len() > n {
        let b = select_summary(&episodes)?;
        (
            Some(persist(&cfg.output_dir, dir.join("budget_summary.jsonl"), &head, b)?),
            Some(b.total_reward),
        )
    } else {
        (None, None)
    };
    Ok(BaselineEntry {
        pair: [job.pair.first().into(), job.pair.second().into()],
        scenario: job.scenario.id.clone(),
        seed,
        episodes: files,
        summary,
        total_reward: best.total_reward,
        sampled: episodes.len(),
        sim_steps: episodes.iter().map(|t| t.steps.len() as u64).sum(),
        budget_summary,
        budget_total_reward,
    })
}

/// Baseline for every job, using `baseline.step_budget` if set; writes
/// `baseline_manifest.json`.
pub fn run_all_baselines(cfg: &Resolved) -> Result<BaselineManifest> {
    let jobs = jobs(cfg)?;
    let entries = jobs
        .par_iter()
        .map(|job| run_baseline_job(cfg, job, cfg.baseline.step_budget))
        .collect::<Result<Vec<_>>>()?;
    let manifest = BaselineManifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        entries,
    };
    write_json(&cfg.output_dir.join(BASELINE_MANIFEST), &manifest)?;
    Ok(manifest)
}

pub(crate) fn write_report<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)
}
