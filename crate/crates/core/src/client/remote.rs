//! Port implementations that forward rendered prompts to a chat endpoint.

use std::sync::Arc;

use crate::agent::{ActorPort, ActorRequest, PlannerPort, PlannerRequest};
use crate::judge::{JudgePort, JudgeRequest};
use crate::memory::{GatePort, GateRequest, MemoryError, TextEncoder, MIN_DIM};
use crate::port::PortError;

use super::chat::{ChatClient, Sampling};

/// Default sampling temperature for judge votes, so K votes can differ.
pub const JUDGE_TEMPERATURE: f64 = 0.7;

pub struct RemotePlanner {
    pub client: Arc<ChatClient>,
    pub sampling: Sampling,
}

impl RemotePlanner {
    pub fn new(client: Arc<ChatClient>) -> Self {
        let sampling = client.config().sampling();
        RemotePlanner { client, sampling }
    }
}

impl PlannerPort for RemotePlanner {
    fn propose(&mut self, req: &PlannerRequest<'_>) -> Result<String, PortError> {
        Ok(self.client.chat(req.messages, self.sampling)?)
    }
}

pub struct RemoteActor {
    pub client: Arc<ChatClient>,
    pub sampling: Sampling,
}

impl RemoteActor {
    pub fn new(client: Arc<ChatClient>) -> Self {
        let sampling = client.config().sampling();
        RemoteActor { client, sampling }
    }
}

impl ActorPort for RemoteActor {
    fn act(&mut self, req: &ActorRequest<'_>) -> Result<String, PortError> {
        Ok(self.client.chat(req.messages, self.sampling)?)
    }
}

pub struct RemoteGate {
    pub client: Arc<ChatClient>,
    pub sampling: Sampling,
}

impl RemoteGate {
    pub fn new(client: Arc<ChatClient>) -> Self {
        let sampling = client.config().sampling();
        RemoteGate { client, sampling }
    }
}

impl GatePort for RemoteGate {
    fn assess(&self, req: &GateRequest<'_>) -> Result<String, PortError> {
        Ok(self.client.chat(req.messages, self.sampling)?)
    }
}

pub struct RemoteJudge {
    pub client: Arc<ChatClient>,
    pub sampling: Sampling,
}

impl RemoteJudge {
    pub fn new(client: Arc<ChatClient>) -> Self {
        let mut sampling = client.config().sampling();
        sampling.temperature = JUDGE_TEMPERATURE;
        RemoteJudge { client, sampling }
    }
}

impl JudgePort for RemoteJudge {
    fn evaluate(&self, req: &JudgeRequest<'_>) -> Result<String, PortError> {
        Ok(self.client.chat(req.messages, self.sampling)?)
    }
}

/// Embedding-endpoint encoder with the same contract as the hashed one.
pub struct RemoteEncoder {
    pub client: Arc<ChatClient>,
    pub url: String,
    pub dim: usize,
}

impl TextEncoder for RemoteEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Result<Vec<f64>, MemoryError> {
        if self.dim < MIN_DIM {
            return Err(MemoryError::DimTooSmall(self.dim));
        }
        if text.trim().is_empty() {
            return Err(MemoryError::EmptyText);
        }
        let mut v = self
            .client
            .embed(&self.url, text)
            .map_err(|e| MemoryError::Port(e.to_string()))?;
        if v.len() != self.dim {
            return Err(MemoryError::Shape {
                expected: self.dim,
                got: v.len(),
            });
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(MemoryError::Invalid("embedding has zero or non-finite norm".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}
