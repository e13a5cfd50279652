//! Configuration, orchestration, persistence, replay and rendering for
//! contrastive behaviour summaries of crowd-navigation agents.

pub mod bench;
pub mod config;
mod error;
pub mod render;
pub mod replay;
pub mod run;
pub mod trajfile;

pub use error::{CliError, Result};
