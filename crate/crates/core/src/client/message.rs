use base64::Engine;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePart {
    pub base64: String,
    pub media_type: String,
}

impl ImagePart {
    pub fn from_bytes(bytes: &[u8], media_type: &str) -> Self {
        ImagePart {
            base64: base64::engine::general_purpose::STANDARD.encode(bytes),
            media_type: media_type.to_string(),
        }
    }

    pub fn data_url(&self) -> String {
        format!("data:{};base64,{}", self.media_type, self.base64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentPart {
    Text(String),
    Image(ImagePart),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        ChatMessage {
            role,
            parts: vec![ContentPart::Text(text.into())],
        }
    }

    /// Concatenated text parts, images skipped.
    pub fn text_content(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text(t) => Some(t.as_str()),
                ContentPart::Image(_) => None,
            })
            .collect()
    }

    /// Adds a text part, merging with a trailing text part when present.
    pub fn push_text(&mut self, text: &str) {
        match self.parts.last_mut() {
            Some(ContentPart::Text(t)) => t.push_str(text),
            _ => self.parts.push(ContentPart::Text(text.to_string())),
        }
    }
}
