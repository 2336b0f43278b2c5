//! Deterministic simulated environment: pages of interactive elements,
//! parameterized actions, and machine-checkable task goals.

mod action;
mod spec;
mod tools;
mod world;

pub use action::{Action, ActionRecord, ActionType, ScrollDirection};
pub use spec::{
    Difficulty, Element, ElementId, ElementKind, GoalCondition, Page, PlanTemplate, Task,
    WorldSpec, DEFAULT_SCROLL_WINDOW,
};
pub use tools::{Calculator, Lookup, SimTool, ToolParams, ToolRegistry};
pub use world::{load_world, render_tree, Observation, StepOutcome, World, WorldState};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("world spec parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate element id {0}")]
    DuplicateElementId(ElementId),
    #[error("duplicate page id {0}")]
    DuplicatePage(String),
    #[error("unknown page {0}")]
    UnknownPage(String),
    #[error("element {element} links to missing page {target}")]
    DanglingTarget { element: ElementId, target: String },
    #[error("invalid world spec: {0}")]
    Invalid(String),
    #[error("unknown reference: {0}")]
    UnknownReference(String),
    #[error("malformed action: {0}")]
    MalformedAction(String),
    #[error("episode already terminated")]
    EpisodeOver,
}
