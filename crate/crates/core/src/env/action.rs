use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ElementId, EnvError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScrollDirection {
    Up,
    Down,
}

impl fmt::Display for ScrollDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScrollDirection::Up => "up",
            ScrollDirection::Down => "down",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionType {
    Click,
    Type,
    Scroll,
    Select,
    Stop,
    ToolInvoke,
}

impl ActionType {
    pub const ALL: [ActionType; 6] = [
        ActionType::Click,
        ActionType::Type,
        ActionType::Scroll,
        ActionType::Select,
        ActionType::Stop,
        ActionType::ToolInvoke,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionType::Click => "Click",
            ActionType::Type => "Type",
            ActionType::Scroll => "Scroll",
            ActionType::Select => "Select",
            ActionType::Stop => "Stop",
            ActionType::ToolInvoke => "ToolInvoke",
        }
    }
}

/// One parameterized interaction primitive. Required parameters are carried
/// by the variant, so a constructed `Action` is always well-formed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ActionRecord", into = "ActionRecord")]
pub enum Action {
    Click { element_id: ElementId },
    Type { element_id: ElementId, text: String },
    Scroll { direction: ScrollDirection, amount: u32 },
    Select { element_id: ElementId, option: String },
    Stop { answer: String },
    ToolInvoke { tool_name: String, tool_params: BTreeMap<String, String> },
}

impl Action {
    pub fn action_type(&self) -> ActionType {
        match self {
            Action::Click { .. } => ActionType::Click,
            Action::Type { .. } => ActionType::Type,
            Action::Scroll { .. } => ActionType::Scroll,
            Action::Select { .. } => ActionType::Select,
            Action::Stop { .. } => ActionType::Stop,
            Action::ToolInvoke { .. } => ActionType::ToolInvoke,
        }
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Canonical textual form, accepted back by the action parser.
impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Click { element_id } => write!(f, "Click({element_id})"),
            Action::Type { element_id, text } => write!(f, "Type({element_id}, {})", quote(text)),
            Action::Scroll { direction, amount } => write!(f, "Scroll({direction}, {amount})"),
            Action::Select { element_id, option } => {
                write!(f, "Select({element_id}, {})", quote(option))
            }
            Action::Stop { answer } => write!(f, "Stop({})", quote(answer)),
            Action::ToolInvoke {
                tool_name,
                tool_params,
            } => {
                let params = serde_json::to_string(tool_params).expect("maps always serialize");
                write!(f, "ToolInvoke({}, {params})", quote(tool_name))
            }
        }
    }
}

/// Flat wire form of an action: a type tag plus optional parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub action_type: Option<ActionType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_id: Option<ElementId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<ScrollDirection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_params: Option<BTreeMap<String, String>>,
}

impl TryFrom<ActionRecord> for Action {
    type Error = EnvError;

    fn try_from(r: ActionRecord) -> Result<Self, Self::Error> {
        let ty = r
            .action_type
            .ok_or_else(|| EnvError::MalformedAction("missing action_type".into()))?;
        let need = |what: &str| EnvError::MalformedAction(format!("{} requires {what}", ty.name()));
        Ok(match ty {
            ActionType::Click => Action::Click {
                element_id: r.element_id.ok_or_else(|| need("element_id"))?,
            },
            ActionType::Type => Action::Type {
                element_id: r.element_id.ok_or_else(|| need("element_id"))?,
                text: r.text.ok_or_else(|| need("text"))?,
            },
            ActionType::Scroll => Action::Scroll {
                direction: r.direction.ok_or_else(|| need("direction"))?,
                amount: r.amount.ok_or_else(|| need("amount"))?,
            },
            ActionType::Select => Action::Select {
                element_id: r.element_id.ok_or_else(|| need("element_id"))?,
                option: r.option.ok_or_else(|| need("option"))?,
            },
            ActionType::Stop => Action::Stop {
                answer: r.answer.ok_or_else(|| need("answer"))?,
            },
            ActionType::ToolInvoke => Action::ToolInvoke {
                tool_name: r.tool_name.ok_or_else(|| need("tool_name"))?,
                tool_params: r.tool_params.ok_or_else(|| need("tool_params"))?,
            },
        })
    }
}

impl From<Action> for ActionRecord {
    fn from(a: Action) -> Self {
        let mut r = ActionRecord {
            action_type: Some(a.action_type()),
            ..Default::default()
        };
        match a {
            Action::Click { element_id } => r.element_id = Some(element_id),
            Action::Type { element_id, text } => {
                r.element_id = Some(element_id);
                r.text = Some(text);
            }
            Action::Scroll { direction, amount } => {
                r.direction = Some(direction);
                r.amount = Some(amount);
            }
            Action::Select { element_id, option } => {
                r.element_id = Some(element_id);
                r.option = Some(option);
            }
            Action::Stop { answer } => r.answer = Some(answer),
            Action::ToolInvoke {
                tool_name,
                tool_params,
            } => {
                r.tool_name = Some(tool_name);
                r.tool_params = Some(tool_params);
            }
        }
        r
    }
}
