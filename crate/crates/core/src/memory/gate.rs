use std::sync::{Arc, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::client::{text_bindings, ChatMessage, PromptLibrary, TemplateId};
use crate::env::{Action, Observation, Task, WorldSpec};
use crate::port::PortError;

use super::bank::{retrieve_with, MemoryBank, MemoryContext};
use super::encoder::{tokenize, HashedEncoder, TextEncoder};
use super::MemoryError;

/// The gate's verdict: keep the current context (`delta = 0`) or re-retrieve
/// with fresh keywords (`delta = 1`).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateDecision {
    pub delta: u8,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    /// Set when the gate reply was unusable and NO_UPDATE was assumed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl UpdateDecision {
    pub fn keep() -> Self {
        UpdateDecision::default()
    }

    pub fn refresh(keywords: Vec<String>) -> Self {
        UpdateDecision {
            delta: 1,
            keywords,
            warning: None,
        }
    }
}

pub struct GateRequest<'a> {
    pub task: &'a Task,
    pub recent_observations: &'a [Observation],
    pub recent_actions: &'a [Action],
    pub current: &'a MemoryContext,
    pub messages: &'a [ChatMessage],
}

pub trait GatePort: Send + Sync {
    fn assess(&self, req: &GateRequest<'_>) -> Result<String, PortError>;
}

fn needs_update_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"NEEDS_UPDATE\s*:?\s*(.*)").unwrap())
}

fn no_update_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\bNO_UPDATE\b").unwrap())
}

/// Parses `NO_UPDATE` or `NEEDS_UPDATE: k1, k2, ...` (2 to 5 keywords).
/// Anything else, including a keyword count out of range, degrades to
/// NO_UPDATE with a warning.
pub fn parse_gate_output(text: &str) -> UpdateDecision {
    if let Some(caps) = needs_update_re().captures(text) {
        let rest = caps[1].lines().next().unwrap_or("").trim();
        let rest = rest.trim_matches(|c: char| c == '"' || c == '<' || c == '>' || c == '.');
        let sep: &[char] = if rest.contains(',') { &[','] } else { &[' ', '\t'] };
        let keywords: Vec<String> = rest
            .split(sep)
            .map(|k| k.trim().trim_matches(|c: char| !c.is_alphanumeric()).to_string())
            .filter(|k| !k.is_empty())
            .collect();
        if (2..=5).contains(&keywords.len()) {
            return UpdateDecision::refresh(keywords);
        }
        return degrade(text, format!("NEEDS_UPDATE with {} keywords", keywords.len()));
    }
    if no_update_re().is_match(text) {
        return UpdateDecision::keep();
    }
    degrade(text, "reply matches neither NO_UPDATE nor NEEDS_UPDATE".into())
}

fn degrade(text: &str, why: String) -> UpdateDecision {
    log::warn!("memory gate: {why}; assuming NO_UPDATE (reply {text:?})");
    UpdateDecision {
        warning: Some(why),
        ..UpdateDecision::default()
    }
}

fn numbered<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    if items.is_empty() {
        return "None".into();
    }
    items
        .iter()
        .enumerate()
        .map(|(i, x)| format!("{}. {}", i + 1, f(x)))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn gate_messages(
    prompts: &PromptLibrary,
    task: &Task,
    recent_observations: &[Observation],
    recent_actions: &[Action],
    current: &MemoryContext,
) -> Result<Vec<ChatMessage>, MemoryError> {
    prompts
        .render(
            TemplateId::MemoryGate,
            &text_bindings([
                ("QUERY", task.instruction.clone()),
                ("SCREENSHOTS", numbered(recent_observations, Observation::render)),
                ("ACTIONS", numbered(recent_actions, |a| a.to_string())),
                ("DISCRETE MEMORY", current.render_discrete()),
            ]),
        )
        .map_err(|e| MemoryError::Invalid(e.to_string()))
}

pub fn decide_update(
    task: &Task,
    recent_observations: &[Observation],
    recent_actions: &[Action],
    current: &MemoryContext,
    gate: &dyn GatePort,
    prompts: &PromptLibrary,
) -> Result<UpdateDecision, MemoryError> {
    if recent_observations.is_empty() {
        return Err(MemoryError::Invalid("gate needs at least one observation".into()));
    }
    let messages = gate_messages(prompts, task, recent_observations, recent_actions, current)?;
    let reply = gate.assess(&GateRequest {
        task,
        recent_observations,
        recent_actions,
        current,
        messages: &messages,
    })?;
    Ok(parse_gate_output(&reply))
}

/// `delta = 0` returns the prior context untouched; `delta = 1` re-retrieves
/// with the decision's keywords as the query.
pub fn apply_update(bank: &MemoryBank, decision: &UpdateDecision, prior: &MemoryContext, k: usize) -> MemoryContext {
    apply_update_with(bank, &HashedEncoder { dim: bank.dim }, decision, prior, k)
}

pub fn apply_update_with(
    bank: &MemoryBank,
    encoder: &dyn TextEncoder,
    decision: &UpdateDecision,
    prior: &MemoryContext,
    k: usize,
) -> MemoryContext {
    if decision.delta == 0 {
        return prior.clone();
    }
    retrieve_with(bank, encoder, &decision.keywords.join(" "), k)
}

/// Deterministic gate for simulation. The current activity is the first
/// topic of the page in the latest observation (or the task's domain tag
/// when the page has none); memory is judged related when any retrieved
/// entry lists that activity among its keywords. Otherwise it asks for the
/// page topics as new keywords, padded from the task when fewer than two.
pub struct ScriptedGate {
    pub spec: Arc<WorldSpec>,
}

impl ScriptedGate {
    pub fn new(spec: Arc<WorldSpec>) -> Self {
        ScriptedGate { spec }
    }
}

impl GatePort for ScriptedGate {
    fn assess(&self, req: &GateRequest<'_>) -> Result<String, PortError> {
        let obs = req
            .recent_observations
            .last()
            .ok_or_else(|| PortError::Other("no observation".into()))?;
        let topics: Vec<String> = self
            .spec
            .page(&obs.page_id)
            .map(|p| p.topic.iter().map(|t| t.to_lowercase()).collect())
            .unwrap_or_default();
        let activity = topics
            .first()
            .cloned()
            .unwrap_or_else(|| req.task.domain_tag.to_lowercase());
        let related = req
            .current
            .discrete
            .iter()
            .any(|e| e.keywords.iter().any(|k| k.to_lowercase() == activity));
        if related {
            return Ok("NO_UPDATE".into());
        }
        let mut keywords: Vec<String> = Vec::new();
        let padding = std::iter::once(req.task.domain_tag.to_lowercase())
            .chain(tokenize(&req.task.instruction).into_iter().filter(|t| t.len() > 2))
            .chain(["task".to_string(), "memory".to_string()]);
        for k in topics.into_iter() {
            if keywords.len() < 5 && !k.is_empty() && !keywords.contains(&k) {
                keywords.push(k);
            }
        }
        for k in padding {
            if keywords.len() >= 2 {
                break;
            }
            if !keywords.contains(&k) {
                keywords.push(k);
            }
        }
        Ok(format!("NEEDS_UPDATE: {}", keywords.join(", ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_verdicts() {
        assert_eq!(parse_gate_output("NO_UPDATE"), UpdateDecision::keep());
        let d = parse_gate_output("NEEDS_UPDATE: maps, directions");
        assert_eq!(d.delta, 1);
        assert_eq!(d.keywords, vec!["maps", "directions"]);
        let d = parse_gate_output("Thinking...\nNEEDS_UPDATE: hotel booking travel");
        assert_eq!(d.keywords, vec!["hotel", "booking", "travel"]);
    }

    #[test]
    fn garbage_degrades_to_no_update() {
        let d = parse_gate_output("maybe?");
        assert_eq!(d.delta, 0);
        assert!(d.keywords.is_empty());
        assert!(d.warning.is_some());
    }

    #[test]
    fn keyword_count_out_of_range_degrades() {
        assert_eq!(parse_gate_output("NEEDS_UPDATE: maps").delta, 0);
        assert_eq!(parse_gate_output("NEEDS_UPDATE: a, b, c, d, e, f").delta, 0);
        assert_eq!(parse_gate_output("NEEDS_UPDATE: a, b, c, d, e").delta, 1);
    }

    #[test]
    fn keep_leaves_context_identical() {
        let bank = MemoryBank::new(16);
        let mut prior = MemoryContext::empty(16);
        prior.retrieval_query = "anything".into();
        let out = apply_update(&bank, &UpdateDecision::keep(), &prior, 10);
        assert_eq!(serde_json::to_string(&out).unwrap(), serde_json::to_string(&prior).unwrap());
    }

    #[test]
    fn refresh_on_empty_bank_is_empty() {
        let bank = MemoryBank::new(16);
        let out = apply_update(
            &bank,
            &UpdateDecision::refresh(vec!["maps".into(), "directions".into()]),
            &MemoryContext::empty(16),
            10,
        );
        assert!(out.discrete.is_empty());
        assert_eq!(out.retrieval_query, "maps directions");
    }
}
