use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse, Speaker, estimate_tokens};

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub role_name: String,
    pub agent: String,
    pub turns: Vec<(Speaker, String)>,
    pub response: String,
}

impl Exchange {
    pub fn prompt(&self) -> &str {
        self.turns
            .iter()
            .rev()
            .find(|(s, _)| *s == Speaker::User)
            .map(|(_, t)| t.as_str())
            .unwrap_or("")
    }
}

/// Deterministic backend replaying canned responses.
///
/// A request consumes from the queue keyed by its agent name if one exists,
/// else the queue keyed by its role name, else the shared queue.
#[derive(Default)]
pub struct ScriptedBackend {
    shared: Mutex<VecDeque<String>>,
    keyed: Mutex<HashMap<String, VecDeque<String>>>,
    transcript: Mutex<Vec<Exchange>>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let backend = Self::default();
        backend.push_all(responses);
        backend
    }

    pub fn push_all<I, S>(&self, responses: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut q = self.shared.lock().expect("queue lock");
        q.extend(responses.into_iter().map(Into::into));
    }

    /// Appends responses to the queue for an agent or role name.
    pub fn push_keyed<I, S>(&self, key: &str, responses: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut keyed = self.keyed.lock().expect("queue lock");
        keyed
            .entry(key.to_string())
            .or_default()
            .extend(responses.into_iter().map(Into::into));
    }

    pub fn transcript(&self) -> Vec<Exchange> {
        self.transcript.lock().expect("transcript lock").clone()
    }

    /// Prompts sent by one agent, in order.
    pub fn prompts_for(&self, agent: &str) -> Vec<String> {
        self.transcript()
            .iter()
            .filter(|e| e.agent == agent)
            .map(|e| e.prompt().to_string())
            .collect()
    }

    pub fn calls_for(&self, agent: &str) -> usize {
        self.transcript().iter().filter(|e| e.agent == agent).count()
    }

    /// Responses not yet consumed across all queues.
    pub fn remaining(&self) -> usize {
        let keyed: usize = self.keyed.lock().expect("queue lock").values().map(VecDeque::len).sum();
        keyed + self.shared.lock().expect("queue lock").len()
    }

    fn next_for(&self, request: &LlmRequest) -> Option<String> {
        let mut keyed = self.keyed.lock().expect("queue lock");
        for key in [&request.agent, &request.role_name] {
            if let Some(q) = keyed.get_mut(key.as_str()) {
                return q.pop_front();
            }
        }
        drop(keyed);
        self.shared.lock().expect("queue lock").pop_front()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let text = self.next_for(request).ok_or_else(|| LlmError::QueueExhausted {
            role: request.role_name.clone(),
            agent: request.agent.clone(),
        })?;
        let input: u64 =
            request.turns.iter().map(|(_, t)| estimate_tokens(t)).sum::<u64>() + estimate_tokens(&request.system_text);
        self.transcript.lock().expect("transcript lock").push(Exchange {
            role_name: request.role_name.clone(),
            agent: request.agent.clone(),
            turns: request.turns.clone(),
            response: text.clone(),
        });
        Ok(LlmResponse {
            output_token_count: estimate_tokens(&text),
            input_token_count: input,
            text,
        })
    }
}
