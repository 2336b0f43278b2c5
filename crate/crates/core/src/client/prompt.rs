//! Prompt templates and their rendering into chat messages.
//!
//! Template bodies are plain text with `{NAME}` placeholders. The first
//! paragraph becomes the system message and the remainder the user message.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::message::{ChatMessage, ContentPart, ImagePart, Role};
use super::ClientError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    PlanGenerate,
    PlanUpdate,
    ActionGenerate,
    MemoryGate,
    JudgeEval,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::PlanGenerate,
        TemplateId::PlanUpdate,
        TemplateId::ActionGenerate,
        TemplateId::MemoryGate,
        TemplateId::JudgeEval,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            TemplateId::PlanGenerate => "plan_generate.txt",
            TemplateId::PlanUpdate => "plan_update.txt",
            TemplateId::ActionGenerate => "action_generate.txt",
            TemplateId::MemoryGate => "memory_gate.txt",
            TemplateId::JudgeEval => "judge_eval.txt",
        }
    }

    fn builtin_body(self) -> &'static str {
        match self {
            TemplateId::PlanGenerate => include_str!("../../prompts/plan_generate.txt"),
            TemplateId::PlanUpdate => include_str!("../../prompts/plan_update.txt"),
            TemplateId::ActionGenerate => include_str!("../../prompts/action_generate.txt"),
            TemplateId::MemoryGate => include_str!("../../prompts/memory_gate.txt"),
            TemplateId::JudgeEval => include_str!("../../prompts/judge_eval.txt"),
        }
    }
}

/// Placeholders whose bindings may carry images instead of text.
const OBSERVATION_SLOTS: [&str; 2] = ["SCREENSHOTS", "SCREENSHOT"];

#[derive(Clone, Debug, PartialEq)]
pub enum Binding {
    Text(String),
    Images(Vec<ImagePart>),
}

impl From<String> for Binding {
    fn from(s: String) -> Self {
        Binding::Text(s)
    }
}

impl From<&str> for Binding {
    fn from(s: &str) -> Self {
        Binding::Text(s.to_string())
    }
}

pub type Bindings = BTreeMap<String, Binding>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub template_id: TemplateId,
    pub body: String,
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_ ]*)\}").expect("static regex"))
}

impl PromptTemplate {
    pub fn placeholders(&self) -> BTreeSet<String> {
        placeholder_re()
            .captures_iter(&self.body)
            .map(|c| c[1].to_string())
            .collect()
    }

    pub fn render(&self, bindings: &Bindings) -> Result<Vec<ChatMessage>, ClientError> {
        let wanted = self.placeholders();
        if let Some(name) = wanted.iter().find(|n| !bindings.contains_key(*n)) {
            return Err(ClientError::UnboundPlaceholder {
                template: self.template_id,
                name: name.clone(),
            });
        }
        if let Some(extra) = bindings.keys().find(|k| !wanted.contains(*k)) {
            return Err(ClientError::UnexpectedBinding {
                template: self.template_id,
                name: extra.clone(),
            });
        }
        for (name, b) in bindings {
            if matches!(b, Binding::Images(_)) && !OBSERVATION_SLOTS.contains(&name.as_str()) {
                return Err(ClientError::UnexpectedBinding {
                    template: self.template_id,
                    name: format!("{name} (images allowed only for observations)"),
                });
            }
        }
        let (system, user) = match self.body.split_once("\n\n") {
            Some((s, u)) => (s, u),
            None => (self.body.as_str(), ""),
        };
        let mut messages = Vec::new();
        for (role, text) in [(Role::System, system), (Role::User, user)] {
            let parts = substitute(text, bindings);
            if !parts.is_empty() {
                messages.push(ChatMessage { role, parts });
            }
        }
        Ok(messages)
    }
}

fn substitute(text: &str, bindings: &Bindings) -> Vec<ContentPart> {
    let mut parts = Vec::new();
    let mut buf = String::new();
    let mut last = 0;
    for cap in placeholder_re().captures_iter(text) {
        let m = cap.get(0).expect("whole match");
        buf.push_str(&text[last..m.start()]);
        match &bindings[&cap[1]] {
            Binding::Text(t) => buf.push_str(t),
            Binding::Images(images) => {
                if !buf.is_empty() {
                    parts.push(ContentPart::Text(std::mem::take(&mut buf)));
                }
                parts.extend(images.iter().cloned().map(ContentPart::Image));
            }
        }
        last = m.end();
    }
    buf.push_str(&text[last..]);
    if !buf.is_empty() {
        parts.push(ContentPart::Text(buf));
    }
    parts
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptLibrary {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl PromptLibrary {
    pub fn builtin() -> &'static PromptLibrary {
        static LIB: OnceLock<PromptLibrary> = OnceLock::new();
        LIB.get_or_init(|| PromptLibrary {
            templates: TemplateId::ALL
                .into_iter()
                .map(|id| {
                    (
                        id,
                        PromptTemplate {
                            template_id: id,
                            body: id.builtin_body().to_string(),
                        },
                    )
                })
                .collect(),
        })
    }

    /// Loads overrides from `dir`; templates without a file keep the
    /// bundled body.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, ClientError> {
        let mut lib = PromptLibrary::builtin().clone();
        for id in TemplateId::ALL {
            let path = dir.as_ref().join(id.file_name());
            if path.exists() {
                let body = std::fs::read_to_string(&path)
                    .map_err(|e| ClientError::Io(format!("{}: {e}", path.display())))?;
                lib.templates.insert(id, PromptTemplate { template_id: id, body });
            }
        }
        Ok(lib)
    }

    pub fn template(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn render(&self, id: TemplateId, bindings: &Bindings) -> Result<Vec<ChatMessage>, ClientError> {
        self.template(id).render(bindings)
    }
}

/// Renders a bundled template.
pub fn render_prompt(id: TemplateId, bindings: &Bindings) -> Result<Vec<ChatMessage>, ClientError> {
    PromptLibrary::builtin().render(id, bindings)
}

/// Builds a binding map from `(name, text)` pairs.
pub fn text_bindings<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> Bindings {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), Binding::Text(v)))
        .collect()
}
