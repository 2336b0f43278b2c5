//! Hybrid discrete/continuous experience memory with gated refresh.

mod bank;
mod encoder;
mod gate;
mod manager;
mod persist;
mod summarize;

pub use bank::{
    retrieve, retrieve_with, ContinuousSlots, DiscreteEntry, MemoryBank, MemoryContext, SharedBank,
    DEFAULT_TOP_K, N_SLOTS,
};
pub use encoder::{cosine, encode_text, tokenize, HashedEncoder, TextEncoder, DEFAULT_DIM, MIN_DIM};
pub use gate::{
    apply_update, apply_update_with, decide_update, gate_messages, parse_gate_output, GatePort, GateRequest,
    ScriptedGate, UpdateDecision,
};
pub use manager::MemoryManager;
pub use persist::{load_bank, save_bank, ENTRIES_FILE, SLOTS_FILE};
pub use summarize::{
    encode_continuous, ingest, instruction_keywords, summarize_trajectory, ScriptedSummarizer, SummarizerPort,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("cannot encode empty text")]
    EmptyText,
    #[error("text has no tokens: {0:?}")]
    NoTokens(String),
    #[error("encoder dimension {0} is below the minimum of {MIN_DIM}")]
    DimTooSmall(usize),
    #[error("shape mismatch: expected dimension {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid memory state: {0}")]
    Invalid(String),
    #[error("only successful trajectories can be summarized (task {0})")]
    NotSuccessful(String),
    #[error("trajectory has no steps")]
    EmptyTrajectory,
    #[error("port failure: {0}")]
    Port(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
}

impl From<crate::port::PortError> for MemoryError {
    fn from(e: crate::port::PortError) -> Self {
        MemoryError::Port(e.to_string())
    }
}
