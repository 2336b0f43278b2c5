use std::collections::BTreeMap;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use super::encoder::{HashedEncoder, TextEncoder, DEFAULT_DIM};
use super::MemoryError;

/// Latent rows per trajectory.
pub const N_SLOTS: usize = 8;

/// Default number of retrieved experiences.
pub const DEFAULT_TOP_K: usize = 10;

/// Text summary of one successful trajectory's key steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteEntry {
    pub entry_id: u64,
    pub source_task: String,
    pub instruction: String,
    pub key_steps: Vec<String>,
    pub keywords: Vec<String>,
    pub feature_vec: Vec<f64>,
}

impl DiscreteEntry {
    pub fn render(&self) -> String {
        let mut out = format!(
            "[{}] {} (keywords: {})",
            self.source_task,
            self.instruction,
            self.keywords.join(", ")
        );
        for step in &self.key_steps {
            out.push_str("\n  - ");
            out.push_str(step);
        }
        out
    }
}

/// Fixed-shape `N_SLOTS x dim` latent matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSlots {
    dim: usize,
    data: Vec<f32>,
}

impl ContinuousSlots {
    pub fn zeros(dim: usize) -> Self {
        ContinuousSlots {
            dim,
            data: vec![0.0; N_SLOTS * dim],
        }
    }

    pub fn from_rows(dim: usize, data: Vec<f32>) -> Result<Self, MemoryError> {
        if data.len() != N_SLOTS * dim {
            return Err(MemoryError::Shape {
                expected: N_SLOTS * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(MemoryError::Invalid("non-finite slot entry".into()));
        }
        Ok(ContinuousSlots { dim, data })
    }

    pub fn n_slots(&self) -> usize {
        N_SLOTS
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Element-wise mean; zeros when `items` is empty.
    pub fn mean<'a>(dim: usize, items: impl IntoIterator<Item = &'a ContinuousSlots>) -> Self {
        let mut acc = vec![0.0f64; N_SLOTS * dim];
        let mut n = 0usize;
        for s in items {
            for (a, x) in acc.iter_mut().zip(&s.data) {
                *a += f64::from(*x);
            }
            n += 1;
        }
        if n > 0 {
            acc.iter_mut().for_each(|a| *a /= n as f64);
        }
        ContinuousSlots {
            dim,
            data: acc.into_iter().map(|a| a as f32).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    pub dim: usize,
    pub entries: Vec<DiscreteEntry>,
    pub slots_by_entry: BTreeMap<u64, ContinuousSlots>,
}

/// Bank handle shared between concurrent episodes: many readers, one writer.
pub type SharedBank = Arc<RwLock<MemoryBank>>;

impl Default for MemoryBank {
    fn default() -> Self {
        MemoryBank::new(DEFAULT_DIM)
    }
}

impl MemoryBank {
    pub fn new(dim: usize) -> Self {
        MemoryBank {
            dim,
            entries: Vec::new(),
            slots_by_entry: BTreeMap::new(),
        }
    }

    pub fn shared(self) -> SharedBank {
        Arc::new(RwLock::new(self))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn next_entry_id(&self) -> u64 {
        self.entries.iter().map(|e| e.entry_id + 1).max().unwrap_or(0)
    }

    /// Appends an entry and its slots, assigning the next id.
    pub fn push(&mut self, mut entry: DiscreteEntry, slots: ContinuousSlots) -> Result<u64, MemoryError> {
        if slots.dim() != self.dim || entry.feature_vec.len() != self.dim {
            return Err(MemoryError::Shape {
                expected: self.dim,
                got: slots.dim(),
            });
        }
        if entry.key_steps.is_empty() {
            return Err(MemoryError::Invalid("entry has no key steps".into()));
        }
        let id = self.next_entry_id();
        entry.entry_id = id;
        self.entries.push(entry);
        self.slots_by_entry.insert(id, slots);
        Ok(id)
    }

    /// Checks the bank-level invariants: ids unique, every entry has slots
    /// and no slots are orphaned.
    pub fn check_invariants(&self) -> Result<(), MemoryError> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.entry_id) {
                return Err(MemoryError::Invalid(format!("duplicate entry id {}", e.entry_id)));
            }
            let slots = self
                .slots_by_entry
                .get(&e.entry_id)
                .ok_or_else(|| MemoryError::Invalid(format!("entry {} has no slots", e.entry_id)))?;
            if slots.dim() != self.dim {
                return Err(MemoryError::Shape {
                    expected: self.dim,
                    got: slots.dim(),
                });
            }
        }
        if self.slots_by_entry.keys().any(|id| !seen.contains(id)) {
            return Err(MemoryError::Invalid("slots for unknown entry".into()));
        }
        Ok(())
    }
}

/// What the planner receives from memory at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryContext {
    pub discrete: Vec<DiscreteEntry>,
    /// Cosine similarity of each retrieved entry, non-increasing.
    pub scores: Vec<f64>,
    pub continuous: ContinuousSlots,
    pub retrieval_query: String,
}

impl MemoryContext {
    pub fn empty(dim: usize) -> Self {
        MemoryContext {
            discrete: Vec::new(),
            scores: Vec::new(),
            continuous: ContinuousSlots::zeros(dim),
            retrieval_query: String::new(),
        }
    }

    /// Text block bound into the `{DISCRETE MEMORY}` prompt slot.
    pub fn render_discrete(&self) -> String {
        if self.discrete.is_empty() {
            return "None".to_string();
        }
        self.discrete
            .iter()
            .map(DiscreteEntry::render)
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn retrieve(bank: &MemoryBank, query_text: &str, k: usize) -> MemoryContext {
    retrieve_with(bank, &HashedEncoder { dim: bank.dim }, query_text, k)
}

/// Top-k entries by cosine similarity to the encoded query; ties go to the
/// smaller entry id. A query that cannot be encoded retrieves nothing.
pub fn retrieve_with(bank: &MemoryBank, encoder: &dyn TextEncoder, query_text: &str, k: usize) -> MemoryContext {
    let mut ctx = MemoryContext::empty(bank.dim);
    ctx.retrieval_query = query_text.to_string();
    if k == 0 || bank.is_empty() {
        return ctx;
    }
    let Ok(query) = encoder.encode(query_text) else {
        return ctx;
    };
    let mut scored: Vec<(f64, &DiscreteEntry)> = bank
        .entries
        .iter()
        .map(|e| (super::encoder::cosine(&query, &e.feature_vec), e))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.entry_id.cmp(&b.1.entry_id)));
    scored.truncate(k);
    ctx.continuous = ContinuousSlots::mean(
        bank.dim,
        scored.iter().filter_map(|(_, e)| bank.slots_by_entry.get(&e.entry_id)),
    );
    ctx.scores = scored.iter().map(|(s, _)| *s).collect();
    ctx.discrete = scored.into_iter().map(|(_, e)| e.clone()).collect();
    ctx
}
