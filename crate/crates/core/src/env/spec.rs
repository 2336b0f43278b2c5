//! World-spec documents: the on-disk description of pages, elements, tasks
//! and goal conditions, plus load-time validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::EnvError;

/// Index of an element in the accessibility tree. Unique across a world.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u32);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Button,
    Link,
    Input,
    Select,
    StaticText,
}

impl ElementKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Button => "button",
            ElementKind::Link => "link",
            ElementKind::Input => "input",
            ElementKind::Select => "select",
            ElementKind::StaticText => "static_text",
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Element {
    #[serde(rename = "id")]
    pub element_id: ElementId,
    pub kind: ElementKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub value: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<String>,
    /// Page navigated to when the element is clicked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Element>,
}

impl Element {
    /// Depth-first document order, the element itself first.
    pub fn walk(&self) -> Vec<&Element> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(el) = stack.pop() {
            out.push(el);
            stack.extend(el.children.iter().rev());
        }
        out
    }

    pub fn find(&self, id: ElementId) -> Option<&Element> {
        if self.element_id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(id))
    }

    pub fn find_mut(&mut self, id: ElementId) -> Option<&mut Element> {
        if self.element_id == id {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(id))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub page_id: String,
    /// Activity keywords for the page, most specific first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub topic: Vec<String>,
    pub root: Element,
    #[serde(default)]
    pub scroll_offset: usize,
}

impl Page {
    /// Number of element rows, the page height used for scroll clamping.
    pub fn height(&self) -> usize {
        self.root.walk().len()
    }

    pub fn row_of(&self, id: ElementId) -> Option<usize> {
        self.root.walk().iter().position(|e| e.element_id == id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

/// One conjunct of a task goal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalCondition {
    ElementValueEquals { element_id: ElementId, text: String },
    PageReached(String),
    AnswerMatches(String),
    ElementClicked(ElementId),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub instruction: String,
    /// Conjunctive list of conditions; empty means trivially satisfied.
    #[serde(default)]
    pub goal: Vec<GoalCondition>,
    pub domain_tag: String,
    pub difficulty: Difficulty,
    /// Known-good subgoal sequence, consumed by the scripted planner.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference_plan: Vec<String>,
}

/// A fixed plan with the subgoal schedule that executes it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanTemplate {
    pub name: String,
    pub plan: Vec<String>,
    pub schedule: Vec<String>,
}

pub const DEFAULT_SCROLL_WINDOW: usize = 20;

fn default_window() -> usize {
    DEFAULT_SCROLL_WINDOW
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub name: String,
    pub start_page: String,
    #[serde(default = "default_window")]
    pub scroll_window: usize,
    pub pages: Vec<Page>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub lookup_tables: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub plan_templates: Vec<PlanTemplate>,
}

impl WorldSpec {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| EnvError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let spec: WorldSpec = serde_json::from_str(text).map_err(|e| EnvError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.scroll_window == 0 {
            return Err(EnvError::Invalid("scroll_window must be at least 1".into()));
        }
        let mut page_ids = BTreeSet::new();
        for page in &self.pages {
            if !page_ids.insert(page.page_id.as_str()) {
                return Err(EnvError::DuplicatePage(page.page_id.clone()));
            }
        }
        if !page_ids.contains(self.start_page.as_str()) {
            return Err(EnvError::UnknownPage(self.start_page.clone()));
        }
        let mut ids = BTreeSet::new();
        for page in &self.pages {
            for el in page.root.walk() {
                if !ids.insert(el.element_id) {
                    return Err(EnvError::DuplicateElementId(el.element_id));
                }
                let is_select = el.kind == ElementKind::Select;
                if is_select == el.options.is_empty() {
                    return Err(EnvError::Invalid(format!(
                        "element {}: options must be present exactly when kind is select",
                        el.element_id
                    )));
                }
                if is_select && !el.value.is_empty() && !el.options.contains(&el.value) {
                    return Err(EnvError::Invalid(format!(
                        "element {}: initial value {:?} is not one of its options",
                        el.element_id, el.value
                    )));
                }
                if let Some(target) = &el.target {
                    if !page_ids.contains(target.as_str()) {
                        return Err(EnvError::DanglingTarget {
                            element: el.element_id,
                            target: target.clone(),
                        });
                    }
                }
            }
        }
        let mut task_ids = BTreeSet::new();
        for task in &self.tasks {
            if !task_ids.insert(task.task_id.as_str()) {
                return Err(EnvError::Invalid(format!("duplicate task id {}", task.task_id)));
            }
            validate_goal_syntax(task)?;
        }
        Ok(())
    }

    pub fn task(&self, task_id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.task_id == task_id)
    }

    pub fn page(&self, page_id: &str) -> Option<&Page> {
        self.pages.iter().find(|p| p.page_id == page_id)
    }

    pub fn element_count(&self) -> usize {
        self.pages.iter().map(|p| p.height()).sum()
    }

    pub fn contains_element(&self, id: ElementId) -> bool {
        self.pages.iter().any(|p| p.root.find(id).is_some())
    }

    /// Checks that every page and element a task mentions exists here.
    pub fn check_task_refs(&self, task: &Task) -> Result<(), EnvError> {
        validate_goal_syntax(task)?;
        for cond in &task.goal {
            match cond {
                GoalCondition::ElementValueEquals { element_id, .. }
                | GoalCondition::ElementClicked(element_id) => {
                    if !self.contains_element(*element_id) {
                        return Err(EnvError::UnknownReference(format!(
                            "task {} references missing element {}",
                            task.task_id, element_id
                        )));
                    }
                }
                GoalCondition::PageReached(page) => {
                    if self.page(page).is_none() {
                        return Err(EnvError::UnknownReference(format!(
                            "task {} references missing page {}",
                            task.task_id, page
                        )));
                    }
                }
                GoalCondition::AnswerMatches(_) => {}
            }
        }
        Ok(())
    }
}

fn validate_goal_syntax(task: &Task) -> Result<(), EnvError> {
    for cond in &task.goal {
        if let GoalCondition::AnswerMatches(pattern) = cond {
            Regex::new(pattern).map_err(|e| {
                EnvError::Invalid(format!("task {}: bad answer pattern: {e}", task.task_id))
            })?;
        }
    }
    Ok(())
}
