use crate::agent::Trajectory;
use crate::port::PortError;

use super::bank::{ContinuousSlots, DiscreteEntry, MemoryBank, N_SLOTS};
use super::encoder::{encode_text, tokenize};
use super::MemoryError;

/// Produces the key-step lines of a successful trajectory.
pub trait SummarizerPort: Send + Sync {
    fn key_steps(&self, traj: &Trajectory) -> Result<Vec<String>, PortError>;
}

/// One line per state-changing step: `subgoal → action → page`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScriptedSummarizer;

impl SummarizerPort for ScriptedSummarizer {
    fn key_steps(&self, traj: &Trajectory) -> Result<Vec<String>, PortError> {
        Ok(traj
            .steps
            .iter()
            .filter(|s| s.changed)
            .filter_map(|s| {
                let action = s.action.as_ref()?;
                let page = s.result_page.as_deref().unwrap_or(&s.observation.page_id);
                Some(format!("{} → {} → {}", s.subgoal.text, action, page))
            })
            .collect())
    }
}

const STOPWORDS: &[&str] = &[
    "the", "and", "for", "with", "then", "that", "this", "from", "into", "its", "your", "you", "are", "was",
];

/// Up to `n` distinct instruction tokens of three or more characters,
/// in order of first appearance.
pub fn instruction_keywords(instruction: &str, n: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for tok in tokenize(instruction) {
        if out.len() == n {
            break;
        }
        if tok.len() >= 3 && !STOPWORDS.contains(&tok.as_str()) && !out.contains(&tok) {
            out.push(tok);
        }
    }
    out
}

/// The returned entry carries id 0; the bank assigns the real id on ingest.
pub fn summarize_trajectory(
    traj: &Trajectory,
    summarizer: &dyn SummarizerPort,
    dim: usize,
) -> Result<DiscreteEntry, MemoryError> {
    if !traj.success {
        return Err(MemoryError::NotSuccessful(traj.task.task_id.clone()));
    }
    let key_steps = summarizer.key_steps(traj)?;
    if key_steps.is_empty() {
        return Err(MemoryError::Invalid(format!(
            "trajectory for {} has no key steps",
            traj.task.task_id
        )));
    }
    let mut keywords = vec![traj.task.domain_tag.to_lowercase()];
    for k in instruction_keywords(&traj.task.instruction, 5) {
        if keywords.len() == 5 {
            break;
        }
        if !keywords.contains(&k) {
            keywords.push(k);
        }
    }
    Ok(DiscreteEntry {
        entry_id: 0,
        source_task: traj.task.task_id.clone(),
        instruction: traj.task.instruction.clone(),
        key_steps,
        keywords,
        feature_vec: encode_text(&traj.task.instruction, dim)?,
    })
}

/// Splits the steps into `N_SLOTS` contiguous chunks of `ceil(n / N_SLOTS)`
/// steps; each slot is the mean encoding of its chunk's subgoal and action
/// text, and chunks past the end stay zero.
pub fn encode_continuous(traj: &Trajectory, dim: usize) -> Result<ContinuousSlots, MemoryError> {
    let n = traj.steps.len();
    if n == 0 {
        return Err(MemoryError::EmptyTrajectory);
    }
    let chunk = n.div_ceil(N_SLOTS);
    let mut data = vec![0.0f32; N_SLOTS * dim];
    for (slot, steps) in traj.steps.chunks(chunk).enumerate() {
        let mut acc = vec![0.0f64; dim];
        for step in steps {
            let action = step.action.as_ref().map(|a| a.to_string()).unwrap_or_default();
            let v = encode_text(&format!("{} {}", step.subgoal.text, action), dim)?;
            acc.iter_mut().zip(&v).for_each(|(a, x)| *a += x);
        }
        let row = &mut data[slot * dim..(slot + 1) * dim];
        for (r, a) in row.iter_mut().zip(&acc) {
            *r = (a / steps.len() as f64) as f32;
        }
    }
    ContinuousSlots::from_rows(dim, data)
}

/// Appends a successful trajectory to the bank and returns its entry id.
pub fn ingest(bank: &mut MemoryBank, traj: &Trajectory, summarizer: &dyn SummarizerPort) -> Result<u64, MemoryError> {
    let entry = summarize_trajectory(traj, summarizer, bank.dim)?;
    let slots = encode_continuous(traj, bank.dim)?;
    bank.push(entry, slots)
}
