use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{render_tree, Difficulty, Element, ElementKind, GoalCondition, Page, Task, WorldSpec};
use crate::port::PortError;

use super::PipelineError;

pub const DEFAULT_PROPOSALS: usize = 10;

/// One proposer output line, JSON encoded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub instruction: String,
    pub goal: Vec<GoalCondition>,
    #[serde(default)]
    pub difficulty: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference_plan: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskCandidate {
    pub task: Task,
    /// The proposer's difficulty label exactly as emitted.
    pub difficulty_label: String,
    pub rollout_successes: usize,
    pub rollout_total: usize,
}

impl TaskCandidate {
    pub fn new(task: Task) -> Self {
        let label = format!("{:?}", task.difficulty).to_lowercase();
        TaskCandidate {
            task,
            difficulty_label: label,
            rollout_successes: 0,
            rollout_total: 0,
        }
    }
}

/// Emits newline-separated JSON proposals for a page.
pub trait ProposerPort: Send + Sync {
    fn propose(&self, page: &Page, context: &str, k: usize) -> Result<String, PortError>;
}

/// Full-page tree text given to proposers.
pub fn page_context(page: &Page) -> String {
    format!("page: {}\n{}", page.page_id, render_tree(page, (0, page.height())))
}

/// Parses up to `k` proposals, one JSON object per non-blank line, and
/// returns a warning for each line that does not parse.
pub fn parse_proposals(text: &str, k: usize) -> (Vec<Proposal>, Vec<String>) {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match serde_json::from_str::<Proposal>(line) {
            Ok(p) if !p.instruction.trim().is_empty() => out.push(p),
            Ok(_) => warnings.push(format!("line {}: empty instruction", i + 1)),
            Err(e) => warnings.push(format!("line {}: {e}", i + 1)),
        }
    }
    for w in &warnings {
        log::warn!("skipping proposal, {w}");
    }
    out.truncate(k);
    (out, warnings)
}

fn difficulty_from(label: &str) -> Difficulty {
    match label.trim().to_lowercase().as_str() {
        "easy" => Difficulty::Easy,
        "hard" => Difficulty::Hard,
        _ => Difficulty::Medium,
    }
}

/// Asks the proposer for `k` tasks grounded in one page. Unparseable lines
/// are skipped, so fewer than `k` candidates may come back.
pub fn propose_tasks(
    spec: &WorldSpec,
    page_id: &str,
    proposer: &dyn ProposerPort,
    k: usize,
) -> Result<(Vec<TaskCandidate>, Vec<String>), PipelineError> {
    let page = spec
        .page(page_id)
        .ok_or_else(|| PipelineError::UnknownPage(page_id.to_string()))?;
    if k == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let text = proposer
        .propose(page, &page_context(page), k)
        .map_err(|e| PipelineError::Port(e.to_string()))?;
    let (proposals, warnings) = parse_proposals(&text, k);
    let fallback_domain = page.topic.first().cloned().unwrap_or_else(|| page_id.to_string());
    let candidates = proposals
        .into_iter()
        .enumerate()
        .map(|(i, p)| TaskCandidate {
            task: Task {
                task_id: format!("{page_id}-{:02}", i + 1),
                instruction: p.instruction,
                goal: p.goal,
                domain_tag: p.domain_tag.unwrap_or_else(|| fallback_domain.clone()),
                difficulty: difficulty_from(&p.difficulty),
                reference_plan: p.reference_plan,
            },
            difficulty_label: p.difficulty,
            rollout_successes: 0,
            rollout_total: 0,
        })
        .collect();
    Ok((candidates, warnings))
}

/// Builds template tasks from the page's interactive elements and the
/// world's lookup tables.
#[derive(Clone, Debug, Default)]
pub struct ScriptedProposer {
    pub lookup_tables: BTreeMap<String, BTreeMap<String, String>>,
    /// Texts proposed for input fields.
    pub sample_texts: Vec<String>,
}

impl ScriptedProposer {
    pub fn for_world(spec: &WorldSpec) -> Self {
        ScriptedProposer {
            lookup_tables: spec.lookup_tables.clone(),
            sample_texts: vec!["usb hub".into(), "laptop stand".into()],
        }
    }

    fn element_proposals(&self, el: &Element, out: &mut Vec<Proposal>) {
        let id = el.element_id;
        let label = &el.label;
        let mk = |instruction: String, goal, difficulty: &str, step: String| Proposal {
            instruction,
            goal,
            difficulty: difficulty.into(),
            domain_tag: None,
            reference_plan: vec![step],
        };
        match el.kind {
            ElementKind::Button | ElementKind::Link => {
                let mut goal = vec![GoalCondition::ElementClicked(id)];
                if let Some(t) = &el.target {
                    goal.push(GoalCondition::PageReached(t.clone()));
                }
                out.push(mk(format!("Click {label}"), goal, "easy", format!("click {label}")));
            }
            ElementKind::Input => {
                for text in &self.sample_texts {
                    out.push(mk(
                        format!("Enter {text} in the {label} field"),
                        vec![GoalCondition::ElementValueEquals {
                            element_id: id,
                            text: text.clone(),
                        }],
                        "easy",
                        format!("type {text} into {label}"),
                    ));
                }
            }
            ElementKind::Select => {
                for opt in &el.options {
                    out.push(mk(
                        format!("Set {label} to {opt}"),
                        vec![GoalCondition::ElementValueEquals {
                            element_id: id,
                            text: opt.clone(),
                        }],
                        "medium",
                        format!("select {opt} in {label}"),
                    ));
                }
            }
            ElementKind::StaticText => {}
        }
    }
}

impl ProposerPort for ScriptedProposer {
    fn propose(&self, page: &Page, _context: &str, k: usize) -> Result<String, PortError> {
        let mut props = Vec::new();
        for el in page.root.walk() {
            self.element_proposals(el, &mut props);
        }
        for (table, rows) in &self.lookup_tables {
            for (key, value) in rows {
                props.push(Proposal {
                    instruction: format!("Look up the {table} entry for {key}"),
                    goal: vec![GoalCondition::AnswerMatches(regex::escape(value))],
                    difficulty: "medium".into(),
                    domain_tag: None,
                    reference_plan: vec![format!("answer {value}")],
                });
            }
        }
        Ok(props
            .iter()
            .take(k)
            .map(|p| serde_json::to_string(p).expect("proposal serializes"))
            .collect::<Vec<_>>()
            .join("\n"))
    }
}
