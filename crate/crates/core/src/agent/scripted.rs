//! Deterministic planner and actor implementations for tests, fixtures and
//! frozen training roles.

use std::sync::OnceLock;

use regex::Regex;

use super::parse::{format_plan_output, parse_action_output};
use super::ports::{ActorPort, ActorRequest, PlannerPort, PlannerRequest};
use super::types::{Plan, Subgoal};
use crate::env::{Action, ElementId, Observation, ScrollDirection, DEFAULT_SCROLL_WINDOW};
use crate::port::PortError;

/// Walks the task's reference plan one subgoal per step, then yields STOP.
#[derive(Clone, Debug, Default)]
pub struct ReferencePlanner;

impl PlannerPort for ReferencePlanner {
    fn propose(&mut self, req: &PlannerRequest<'_>) -> Result<String, PortError> {
        let script = &req.task.reference_plan;
        if script.is_empty() {
            return Err(PortError::Other(format!(
                "task {} has no reference plan",
                req.task.task_id
            )));
        }
        let plan = Plan::from_steps(
            script
                .iter()
                .enumerate()
                .map(|(i, s)| format!("{}. {s}", i + 1))
                .collect(),
        );
        let subgoal = Subgoal::new(script.get(req.step_index).map_or("STOP", String::as_str));
        Ok(format_plan_output(&plan, &subgoal))
    }
}

/// Replays fixed outputs in order, repeating the last one forever.
#[derive(Clone, Debug)]
pub struct CannedPlanner {
    outputs: Vec<String>,
    next: usize,
}

impl CannedPlanner {
    pub fn new<S: Into<String>>(outputs: impl IntoIterator<Item = S>) -> Self {
        let outputs: Vec<String> = outputs.into_iter().map(Into::into).collect();
        assert!(!outputs.is_empty(), "canned planner needs at least one output");
        CannedPlanner { outputs, next: 0 }
    }

    pub fn calls(&self) -> usize {
        self.next
    }
}

impl PlannerPort for CannedPlanner {
    fn propose(&mut self, _req: &PlannerRequest<'_>) -> Result<String, PortError> {
        let out = self.outputs[self.next.min(self.outputs.len() - 1)].clone();
        self.next += 1;
        Ok(out)
    }
}

#[derive(Clone, Debug)]
pub struct CannedActor {
    outputs: Vec<String>,
    next: usize,
}

impl CannedActor {
    pub fn new<S: Into<String>>(outputs: impl IntoIterator<Item = S>) -> Self {
        let outputs: Vec<String> = outputs.into_iter().map(Into::into).collect();
        assert!(!outputs.is_empty(), "canned actor needs at least one output");
        CannedActor { outputs, next: 0 }
    }

    pub fn calls(&self) -> usize {
        self.next
    }
}

impl ActorPort for CannedActor {
    fn act(&mut self, _req: &ActorRequest<'_>) -> Result<String, PortError> {
        let out = self.outputs[self.next.min(self.outputs.len() - 1)].clone();
        self.next += 1;
        Ok(out)
    }
}

/// Grounds short imperative subgoals against the visible tree text:
/// `click <label>`, `type <text> into <label>`, `select <option> in <label>`,
/// `scroll up|down [n]`, `answer <text>`, `tool <name> {json}`. A subgoal
/// that is already an action call passes through. Labels that are not on
/// screen produce a one-window scroll down.
#[derive(Clone, Copy, Debug, Default)]
pub struct GroundingActor;

impl ActorPort for GroundingActor {
    fn act(&mut self, req: &ActorRequest<'_>) -> Result<String, PortError> {
        Ok(ground_subgoal(&req.subgoal.text, req.observation).to_string())
    }
}

struct Patterns {
    numbering: Regex,
    line: Regex,
    click: Regex,
    type_into: Regex,
    select_in: Regex,
    scroll: Regex,
    answer: Regex,
    tool: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| {
        let re = |s: &str| Regex::new(s).expect("static regex");
        Patterns {
            numbering: re(r"^\s*\d+[.)]\s*"),
            line: re(r"^\[(\d+)\] \S+ (.*)$"),
            click: re(r"(?i)^click (?:on )?(?:the )?(.+)$"),
            type_into: re(r"(?i)^type (.+?) into (?:the )?(.+)$"),
            select_in: re(r"(?i)^select (.+?) (?:in|from) (?:the )?(.+)$"),
            scroll: re(r"(?i)^scroll (up|down)(?: (\d+))?$"),
            answer: re(r"(?i)^(?:answer|respond with) (.+)$"),
            tool: re(r"(?i)^tool (\S+)\s*(\{.*\})?$"),
        }
    })
}

/// Finds a visible element whose label matches (case-insensitively).
pub fn find_label(observation: &Observation, label: &str) -> Option<ElementId> {
    let want = label.trim().to_lowercase();
    let with_value = format!("{want} (");
    observation.tree_text.lines().find_map(|line| {
        let cap = patterns().line.captures(line)?;
        let rest = cap[2].to_lowercase();
        (rest == want || rest.starts_with(&with_value))
            .then(|| cap[1].parse().ok().map(ElementId))
            .flatten()
    })
}

pub fn ground_subgoal(subgoal: &str, observation: &Observation) -> Action {
    let p = patterns();
    let text = p.numbering.replace(subgoal.trim(), "");
    let text = text.trim().trim_end_matches('.');
    if let Ok(action) = parse_action_output(text) {
        return action;
    }
    let search = Action::Scroll {
        direction: ScrollDirection::Down,
        amount: DEFAULT_SCROLL_WINDOW as u32,
    };
    if let Some(c) = p.type_into.captures(text) {
        return find_label(observation, &c[2]).map_or(search, |id| Action::Type {
            element_id: id,
            text: c[1].to_string(),
        });
    }
    if let Some(c) = p.select_in.captures(text) {
        return find_label(observation, &c[2]).map_or(search, |id| Action::Select {
            element_id: id,
            option: c[1].to_string(),
        });
    }
    if let Some(c) = p.scroll.captures(text) {
        let direction = if c[1].eq_ignore_ascii_case("up") {
            ScrollDirection::Up
        } else {
            ScrollDirection::Down
        };
        let amount = c.get(2).and_then(|m| m.as_str().parse().ok()).unwrap_or(1);
        return Action::Scroll { direction, amount };
    }
    if let Some(c) = p.answer.captures(text) {
        return Action::Stop {
            answer: c[1].to_string(),
        };
    }
    if let Some(c) = p.tool.captures(text) {
        let params = c
            .get(2)
            .and_then(|m| serde_json::from_str::<std::collections::BTreeMap<String, String>>(m.as_str()).ok())
            .unwrap_or_default();
        return Action::ToolInvoke {
            tool_name: c[1].to_string(),
            tool_params: params,
        };
    }
    if let Some(c) = p.click.captures(text) {
        return find_label(observation, &c[1]).map_or(search, |id| Action::Click { element_id: id });
    }
    search
}
