use std::sync::Arc;

use crate::agent::MemoryPort;
use crate::client::PromptLibrary;
use crate::env::{Action, Observation, Task};
use crate::port::PortError;

use super::bank::{retrieve_with, MemoryContext, SharedBank, DEFAULT_TOP_K};
use super::encoder::{HashedEncoder, TextEncoder};
use super::gate::{apply_update_with, decide_update, GatePort, UpdateDecision};

/// Retrieves from a shared bank at episode start and consults the gate
/// every `gate_every` steps. Holds no trainable state.
pub struct MemoryManager {
    pub bank: SharedBank,
    pub gate: Arc<dyn GatePort>,
    pub encoder: Arc<dyn TextEncoder>,
    pub prompts: Arc<PromptLibrary>,
    pub k: usize,
    pub gate_every: usize,
    steps_seen: usize,
}

impl MemoryManager {
    pub fn new(bank: SharedBank, gate: Arc<dyn GatePort>) -> Self {
        let dim = bank.read().dim;
        MemoryManager {
            bank,
            gate,
            encoder: Arc::new(HashedEncoder { dim }),
            prompts: Arc::new(PromptLibrary::builtin().clone()),
            k: DEFAULT_TOP_K,
            gate_every: 1,
            steps_seen: 0,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_gate_every(mut self, every: usize) -> Self {
        self.gate_every = every.max(1);
        self
    }

    /// Fresh per-episode copy sharing the same bank and gate.
    pub fn fork(&self) -> Self {
        MemoryManager {
            bank: Arc::clone(&self.bank),
            gate: Arc::clone(&self.gate),
            encoder: Arc::clone(&self.encoder),
            prompts: Arc::clone(&self.prompts),
            k: self.k,
            gate_every: self.gate_every,
            steps_seen: 0,
        }
    }
}

impl MemoryPort for MemoryManager {
    fn begin(&mut self, task: &Task, _observation: &Observation) -> Result<MemoryContext, PortError> {
        self.steps_seen = 0;
        Ok(retrieve_with(&self.bank.read(), self.encoder.as_ref(), &task.instruction, self.k))
    }

    fn after_step(
        &mut self,
        task: &Task,
        recent_observations: &[Observation],
        recent_actions: &[Action],
        current: &MemoryContext,
    ) -> Result<Option<(UpdateDecision, MemoryContext)>, PortError> {
        self.steps_seen += 1;
        if !self.steps_seen.is_multiple_of(self.gate_every) {
            return Ok(None);
        }
        let decision = decide_update(
            task,
            recent_observations,
            recent_actions,
            current,
            self.gate.as_ref(),
            &self.prompts,
        )
        .map_err(|e| PortError::Other(e.to_string()))?;
        let ctx = apply_update_with(&self.bank.read(), self.encoder.as_ref(), &decision, current, self.k);
        Ok(Some((decision, ctx)))
    }
}
