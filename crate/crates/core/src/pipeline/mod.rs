//! Task proposal and executability filtering, memory-bank construction
//! from rollouts, and line-delimited JSON persistence.

mod filter;
mod persist;
mod propose;

pub use filter::{
    apply_quality_list, filter_tasks, FilterReport, QualityList, RolloutAgent, ScriptedRolloutAgent, TaskRate,
    DEFAULT_FILTER_ROLLOUTS,
};
pub use persist::{
    load_jsonl, load_tasks, load_trajectories, save_jsonl, save_tasks, save_trajectories,
};
pub use propose::{
    page_context, parse_proposals, propose_tasks, Proposal, ProposerPort, ScriptedProposer, TaskCandidate,
    DEFAULT_PROPOSALS,
};

use thiserror::Error;

use crate::agent::Trajectory;
use crate::memory::{ingest, MemoryBank, MemoryError, SummarizerPort};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Line { path: String, line: usize, message: String },
    #[error("unknown page {0}")]
    UnknownPage(String),
    #[error("port failure: {0}")]
    Port(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// Ingests every successful trajectory into a fresh bank; returns the bank
/// and how many trajectories were skipped as unsuccessful.
pub fn build_bank(
    trajectories: &[Trajectory],
    summarizer: &dyn SummarizerPort,
    dim: usize,
) -> Result<(MemoryBank, usize), PipelineError> {
    let mut bank = MemoryBank::new(dim);
    let mut skipped = 0;
    for t in trajectories {
        if !t.success {
            skipped += 1;
            continue;
        }
        ingest(&mut bank, t, summarizer)?;
    }
    Ok((bank, skipped))
}
