//! Remote model access: chat messages, prompt templates and a retrying
//! chat-completion client, plus port adapters backed by it.

mod chat;
mod message;
mod prompt;
mod remote;

pub use chat::{chat, parse_response, request_body, ChatClient, ClientConfig, Sampling};
pub use message::{ChatMessage, ContentPart, ImagePart, Role};
pub use prompt::{render_prompt, text_bindings, Binding, Bindings, PromptLibrary, PromptTemplate, TemplateId};
pub use remote::{RemoteActor, RemoteEncoder, RemoteGate, RemoteJudge, RemotePlanner, JUDGE_TEMPERATURE};

use thiserror::Error;

use crate::port::PortError;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("template {template:?}: placeholder {{{name}}} is not bound")]
    UnboundPlaceholder { template: TemplateId, name: String },
    #[error("template {template:?}: unexpected binding {name:?}")]
    UnexpectedBinding { template: TemplateId, name: String },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("request failed after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
}

impl From<ClientError> for PortError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Transport { .. } | ClientError::Status { .. } => PortError::Transport(e.to_string()),
            ClientError::Protocol(m) => PortError::Protocol(m),
            other => PortError::Other(other.to_string()),
        }
    }
}
