use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use contrast_cli::config::{Overrides, Resolved, RunConfig};
use contrast_cli::render::{render, Layout};
use contrast_cli::replay::{collect_files, verify_path};
use contrast_cli::run::{jobs, run_all_baselines, run_all_pairs, BASELINE_MANIFEST, MANIFEST};
use contrast_cli::{bench, CliError, Result};

/// Contrastive behaviour summaries for pairs of crowd-navigation agents.
#[derive(Parser)]
#[command(name = "contrast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Override the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run only this scenario (a configured id or a built-in name).
    #[arg(long)]
    scenario: Option<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<Resolved> {
        RunConfig::load(&self.config)?.resolve(&Overrides {
            seed: self.seed,
            output_dir: self.out.clone(),
            scenario: self.scenario.clone(),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Adaptive search for one pair of agents on every configured scenario.
    Search {
        #[command(flatten)]
        run: RunArgs,
        /// The two agent ids to contrast.
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        pair: Vec<String>,
    },
    /// Adaptive search for every pair of configured agents.
    Pairs {
        #[command(flatten)]
        run: RunArgs,
        /// Only list the jobs that would run.
        #[arg(long)]
        dry_run: bool,
    },
    /// Uniformly sampled episodes for every pair.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        /// Keep sampling until this many coupled steps are spent.
        #[arg(long)]
        step_budget: Option<u64>,
    },
    /// Score every agent on seeded episodes and check the lo < med < hi ordering.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Also write every episode as a trajectory file.
        #[arg(long)]
        persist: bool,
    },
    /// Write SVG frames and an HTML index for a trajectory file.
    Render {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// One panel per instance instead of overlaying them.
        #[arg(long)]
        side_by_side: bool,
    },
    /// Verify trajectory files (or directories of them) by re-simulation.
    Replay {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Search { run, pair } => {
            let mut cfg = run.resolve()?;
            let picked = [cfg.agent(&pair[0])?.clone(), cfg.agent(&pair[1])?.clone()];
            if picked[0] == picked[1] {
                return Err(CliError::Config("the pair needs two distinct agents".into()));
            }
            cfg.agents = picked.to_vec();
            let manifest = run_all_pairs(&cfg)?;
            for e in &manifest.entries {
                println!("{}__{} {}: total_reward {:?} -> {}", e.pair[0], e.pair[1], e.scenario, e.total_reward, e.summary);
            }
            println!("manifest: {}", cfg.output_dir.join(MANIFEST).display());
        }
        Command::Pairs { run, dry_run } => {
            let cfg = run.resolve()?;
            if dry_run {
                for j in jobs(&cfg)? {
                    println!("{} {}", j.pair, j.scenario.id);
                }
                return Ok(());
            }
            let manifest = run_all_pairs(&cfg)?;
            for e in &manifest.entries {
                println!("{}__{} {}: total_reward {:?} -> {}", e.pair[0], e.pair[1], e.scenario, e.total_reward, e.summary);
            }
            println!("{} summaries; manifest: {}", manifest.entries.len(), cfg.output_dir.join(MANIFEST).display());
        }
        Command::Baseline { run, step_budget } => {
            let mut cfg = run.resolve()?;
            if step_budget.is_some() {
                cfg.baseline.step_budget = step_budget;
            }
            let manifest = run_all_baselines(&cfg)?;
            for e in &manifest.entries {
                println!("{}__{} {}: best of first {} {:?} ({} episodes sampled)", e.pair[0], e.pair[1], e.scenario, e.episodes.len(), e.total_reward, e.sampled);
            }
            println!("manifest: {}", cfg.output_dir.join(BASELINE_MANIFEST).display());
        }
        Command::Bench { run, persist } => {
            let mut cfg = run.resolve()?;
            cfg.bench.persist |= persist;
            let report = bench::bench_agents(&cfg)?;
            for s in &report.overall {
                println!("{:>12} ({}): mean score {:.4}  goal {} collision {} timeout {}", s.agent, s.policy, s.mean_score, s.goal, s.collision, s.timeout);
            }
            println!("ranking: {}", report.ranking.join(" > "));
            if !report.ordering.satisfied {
                return Err(CliError::Verification(format!(
                    "expected lo < med < hi with gaps > {}, got {:?}",
                    report.ordering.min_gap, report.ordering.compared
                )));
            }
        }
        Command::Render { file, out, side_by_side } => {
            let layout = if side_by_side { Layout::SideBySide } else { Layout::Overlay };
            let r = render(&file, &out, layout)?;
            println!("{} frames; open {}", r.frames.len(), r.index.display());
        }
        Command::Replay { paths } => {
            let files = collect_files(&paths)?;
            let mut failed = 0;
            for f in &files {
                let verdict = match verify_path(f) {
                    Ok(v) => v.to_string(),
                    Err(e @ (CliError::Format { .. } | CliError::Io { .. })) => format!("FAIL: {e}"),
                    Err(e) => return Err(e),
                };
                if !verdict.starts_with("PASS") {
                    failed += 1;
                }
                println!("{}: {verdict}", f.display());
            }
            println!("{} of {} files passed", files.len() - failed, files.len());
            if failed > 0 || files.is_empty() {
                return Err(CliError::Verification(format!("{failed} of {} files failed replay", files.len())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
