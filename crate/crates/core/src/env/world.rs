use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::action::{Action, ScrollDirection};
use super::spec::{ElementId, ElementKind, GoalCondition, Page, Task, WorldSpec};
use super::tools::ToolRegistry;
use super::EnvError;

/// What the agent sees after each transition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub step_index: usize,
    pub page_id: String,
    pub tree_text: String,
    /// Visible rows as a half-open range `[start, end)`.
    pub visible_window: (usize, usize),
}

impl Observation {
    /// Text form used wherever a prompt expects a screenshot.
    pub fn render(&self) -> String {
        format!("page: {}\n{}", self.page_id, self.tree_text)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub terminal: bool,
    pub note: String,
    /// True when the action altered world state.
    pub changed: bool,
    /// True when the action hit an invalid target and was ignored.
    pub failed: bool,
}

/// Mutable part of a world, comparable and serializable for replay checks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub pages: BTreeMap<String, Page>,
    pub current_page: String,
    pub clicked_set: BTreeSet<ElementId>,
    pub answer: Option<String>,
    pub terminal: bool,
    pub step_count: usize,
}

impl WorldState {
    fn initial(spec: &WorldSpec) -> Self {
        WorldState {
            pages: spec
                .pages
                .iter()
                .map(|p| (p.page_id.clone(), p.clone()))
                .collect(),
            current_page: spec.start_page.clone(),
            clicked_set: BTreeSet::new(),
            answer: None,
            terminal: false,
            step_count: 0,
        }
    }
}

/// A running environment instance. Single-threaded; clone for parallel rollouts.
#[derive(Clone, Debug)]
pub struct World {
    spec: Arc<WorldSpec>,
    tools: ToolRegistry,
    state: WorldState,
    seed: u64,
}

pub fn load_world(path: impl AsRef<Path>) -> Result<World, EnvError> {
    Ok(World::new(Arc::new(WorldSpec::from_path(path)?), 0))
}

/// One line per element: `[id] kind label (value)`, value omitted when empty.
pub fn render_tree(page: &Page, window: (usize, usize)) -> String {
    let mut out = String::new();
    for el in page
        .root
        .walk()
        .into_iter()
        .skip(window.0)
        .take(window.1.saturating_sub(window.0))
    {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("[{}] {} {}", el.element_id, el.kind, el.label));
        if !el.value.is_empty() {
            out.push_str(&format!(" ({})", el.value));
        }
    }
    out
}

impl World {
    pub fn new(spec: Arc<WorldSpec>, seed: u64) -> Self {
        let tools = ToolRegistry::standard(&spec.lookup_tables);
        let state = WorldState::initial(&spec);
        World {
            spec,
            tools,
            state,
            seed,
        }
    }

    pub fn spec(&self) -> &Arc<WorldSpec> {
        &self.spec
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tools_mut(&mut self) -> &mut ToolRegistry {
        &mut self.tools
    }

    pub fn step_count(&self) -> usize {
        self.state.step_count
    }

    pub fn current_page(&self) -> &Page {
        &self.state.pages[&self.state.current_page]
    }

    pub fn answer(&self) -> Option<&str> {
        self.state.answer.as_deref()
    }

    pub fn is_terminal(&self) -> bool {
        self.state.terminal
    }

    /// Restores the spec-initial state for a new episode of `task`.
    pub fn reset(&mut self, task: &Task) -> Result<Observation, EnvError> {
        self.spec.check_task_refs(task)?;
        self.state = WorldState::initial(&self.spec);
        Ok(self.observe())
    }

    fn window(&self, page: &Page) -> (usize, usize) {
        let start = page.scroll_offset;
        (start, (start + self.spec.scroll_window).min(page.height()))
    }

    pub fn observe(&self) -> Observation {
        let page = self.current_page();
        let window = self.window(page);
        Observation {
            step_index: self.state.step_count,
            page_id: page.page_id.clone(),
            tree_text: render_tree(page, window),
            visible_window: window,
        }
    }

    fn max_offset(&self, page: &Page) -> usize {
        page.height().saturating_sub(self.spec.scroll_window)
    }

    /// Resolves an element on the current page inside the visible window.
    fn visible_target(&self, id: ElementId) -> Result<(ElementKind, Option<String>, Vec<String>), String> {
        let page = self.current_page();
        let Some(row) = page.row_of(id) else {
            return Err(format!("element {id} is not on the current page"));
        };
        let (start, end) = self.window(page);
        if row < start || row >= end {
            return Err(format!("element {id} is not visible; scroll first"));
        }
        let el = page.root.find(id).expect("row_of found it");
        Ok((el.kind, el.target.clone(), el.options.clone()))
    }

    fn element_mut(&mut self, id: ElementId) -> &mut super::spec::Element {
        let page = self.state.pages.get_mut(&self.state.current_page).expect("current page exists");
        page.root.find_mut(id).expect("target already resolved")
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome, EnvError> {
        if self.state.terminal {
            return Err(EnvError::EpisodeOver);
        }
        self.state.step_count += 1;
        let (note, changed, failed) = match self.apply(action) {
            Ok((note, changed)) => (note, changed, false),
            Err(note) => (note, false, true),
        };
        Ok(StepOutcome {
            observation: self.observe(),
            terminal: self.state.terminal,
            note,
            changed,
            failed,
        })
    }

    fn apply(&mut self, action: &Action) -> Result<(String, bool), String> {
        match action {
            Action::Click { element_id } => {
                let (_, target, _) = self.visible_target(*element_id)?;
                let mut changed = self.state.clicked_set.insert(*element_id);
                let mut note = format!("clicked element {element_id}");
                if let Some(target) = target {
                    if target != self.state.current_page {
                        self.state.current_page = target.clone();
                        if let Some(p) = self.state.pages.get_mut(&target) {
                            p.scroll_offset = 0;
                        }
                        changed = true;
                    }
                    note.push_str(&format!("; now on {target}"));
                }
                Ok((note, changed))
            }
            Action::Type { element_id, text } => {
                let (kind, _, _) = self.visible_target(*element_id)?;
                if kind != ElementKind::Input {
                    return Err("type target is not an input".into());
                }
                let el = self.element_mut(*element_id);
                let changed = el.value != *text;
                el.value = text.clone();
                Ok((format!("typed into element {element_id}"), changed))
            }
            Action::Select { element_id, option } => {
                let (kind, _, options) = self.visible_target(*element_id)?;
                if kind != ElementKind::Select {
                    return Err("select target is not a select".into());
                }
                if !options.contains(option) {
                    return Err(format!("option {option:?} is not available"));
                }
                let el = self.element_mut(*element_id);
                let changed = el.value != *option;
                el.value = option.clone();
                Ok((format!("selected {option:?} in element {element_id}"), changed))
            }
            Action::Scroll { direction, amount } => {
                let max = self.max_offset(self.current_page());
                let page = self
                    .state
                    .pages
                    .get_mut(&self.state.current_page)
                    .expect("current page exists");
                let before = page.scroll_offset;
                let amount = *amount as usize;
                page.scroll_offset = match direction {
                    ScrollDirection::Down => before.saturating_add(amount).min(max),
                    ScrollDirection::Up => before.saturating_sub(amount),
                };
                let after = page.scroll_offset;
                Ok((format!("scroll offset {before} -> {after}"), after != before))
            }
            Action::Stop { answer } => {
                self.state.answer = Some(answer.clone());
                self.state.terminal = true;
                Ok(("episode stopped".into(), true))
            }
            Action::ToolInvoke {
                tool_name,
                tool_params,
            } => {
                let out = self.tools.invoke(tool_name, tool_params)?;
                Ok((format!("tool {tool_name} returned: {out}"), false))
            }
        }
    }

    /// Number of goal conditions of `task` currently satisfied.
    pub fn goal_progress(&self, task: &Task, answer: Option<&str>) -> usize {
        task.goal.iter().filter(|c| self.condition_holds(c, answer)).count()
    }

    /// True iff every goal condition holds. Pure.
    pub fn check_goal(&self, task: &Task, answer: Option<&str>) -> bool {
        task.goal.iter().all(|c| self.condition_holds(c, answer))
    }

    fn condition_holds(&self, cond: &GoalCondition, answer: Option<&str>) -> bool {
        match cond {
            GoalCondition::ElementValueEquals { element_id, text } => self
                .state
                .pages
                .values()
                .find_map(|p| p.root.find(*element_id))
                .is_some_and(|el| el.value == *text),
            GoalCondition::PageReached(page) => self.state.current_page == *page,
            GoalCondition::AnswerMatches(pattern) => match (answer, Regex::new(pattern)) {
                (Some(a), Ok(re)) => re.is_match(a),
                _ => false,
            },
            GoalCondition::ElementClicked(id) => self.state.clicked_set.contains(id),
        }
    }
}
