//! Bit-exact replay verification of trajectory files.

use std::fmt;
use std::path::{Path, PathBuf};

use contrast_core::trajectory_total_reward;

use crate::error::{CliError, Result};
use crate::trajfile::{Num, Record, TrajectoryFile};

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Pass { steps: usize },
    /// `step` is the first divergent record, or `None` for a footer-only
    /// mismatch.
    Fail { step: Option<usize>, reason: String },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass { steps } => write!(f, "PASS ({steps} steps)"),
            Verdict::Fail { step: Some(t), reason } => write!(f, "FAIL at step {t}: {reason}"),
            Verdict::Fail { step: None, reason } => write!(f, "FAIL: {reason}"),
        }
    }
}

fn first_difference(expected: &Record, found: &Record) -> Option<&'static str> {
    if expected.env_action != found.env_action {
        Some("env_action")
    } else if expected.reward != found.reward {
        Some("reward")
    } else if expected.action_1 != found.action_1 {
        Some("action_1")
    } else if expected.action_2 != found.action_2 {
        Some("action_2")
    } else if expected.state_1 != found.state_1 {
        Some("state_1")
    } else if expected.state_2 != found.state_2 {
        Some("state_2")
    } else if expected.humans != found.humans {
        Some("humans")
    } else {
        None
    }
}

/// Re-simulates the file's action sequence and compares every record and
/// the footer bit for bit.
pub fn verify(file: &TrajectoryFile) -> Result<Verdict> {
    let sim = file.header.resimulate(&file.actions())?;
    for (i, (found, expected)) in file.records.iter().zip(&sim.records).enumerate() {
        if let Some(field) = first_difference(expected, found) {
            return Ok(Verdict::Fail {
                step: Some(i),
                reason: format!("{field} differs from re-simulation"),
            });
        }
    }
    if let Some((t, msg)) = sim.failure {
        return Ok(Verdict::Fail {
            step: Some(t),
            reason: msg,
        });
    }
    let footer = sim.footer.expect("successful re-simulation has a footer");

    // Independent re-accumulation of the file's own rewards.
    let steps_total = file.records.iter().fold(0.0, |acc, r| acc + r.reward.0);
    let summed = Num(steps_total + file.footer.terminal_reward.0);
    if summed != file.footer.total_reward {
        return Ok(Verdict::Fail {
            step: None,
            reason: format!(
                "footer total {:?} does not match the summed rewards {:?}",
                file.footer.total_reward, summed
            ),
        });
    }
    if footer != file.footer {
        return Ok(Verdict::Fail {
            step: None,
            reason: format!("footer differs from re-simulation: expected {footer:?}"),
        });
    }
    debug_assert_eq!(
        Num(trajectory_total_reward(&sim.steps, footer.terminal_reward.0)?),
        footer.total_reward
    );
    Ok(Verdict::Pass {
        steps: file.records.len(),
    })
}

pub fn verify_path(path: &Path) -> Result<Verdict> {
    verify(&TrajectoryFile::read(path)?)
}

/// Every `.jsonl` file under the given paths, in sorted order.
pub fn collect_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in walkdir::WalkDir::new(p).sort_by_file_name() {
                let entry = entry.map_err(|e| CliError::Io {
                    path: p.clone(),
                    source: e.into(),
                })?;
                if entry.file_type().is_file()
                    && entry.path().extension().is_some_and(|x| x == "jsonl")
                {
                    out.push(entry.into_path());
                }
            }
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}
