// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendReply, ChatMessage, GenerationConfig, LlmBackend};
use crate::error::{Error, Result};

/// One scripted turn: either a reply or a transient transport failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockTurn {
    Reply(String),
    Fail(String),
}

impl MockTurn {
    pub fn reply(text: impl Into<String>) -> Self {
        MockTurn::Reply(text.into())
    }

    pub fn fail(cause: impl Into<String>) -> Self {
        MockTurn::Fail(cause.into())
    }
}

#[derive(Debug, Default)]
struct MockState {
    next_turn: usize,
    transcript: Vec<Vec<ChatMessage>>,
}

/// Deterministic backend keyed by turn index: call `i` gets scripted turn
/// `i`, whatever the conversation says. Every received conversation is kept
/// for later inspection.
#[derive(Debug)]
pub struct MockBackend {
    turns: Vec<MockTurn>,
    state: Mutex<MockState>,
}

impl MockBackend {
    pub fn new(turns: Vec<MockTurn>) -> Self {
        Self { turns, state: Mutex::new(MockState::default()) }
    }

    pub fn replies<I, S>(replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(replies.into_iter().map(MockTurn::reply).collect())
    }

    pub fn turns_consumed(&self) -> usize {
        self.state.lock().expect("mock state poisoned").next_turn
    }

    /// Every conversation received so far, in call order.
    pub fn transcript(&self) -> Vec<Vec<ChatMessage>> {
        self.state.lock().expect("mock state poisoned").transcript.clone()
    }
}

impl LlmBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn chat(
        &self,
        conversation: &[ChatMessage],
        _config: &GenerationConfig,
    ) -> std::result::Result<BackendReply, BackendError> {
        let mut state = self.state.lock().expect("mock state poisoned");
        let index = state.next_turn;
        state.next_turn += 1;
        state.transcript.push(conversation.to_vec());
        match self.turns.get(index) {
            Some(MockTurn::Reply(text)) => {
                let mut reply = BackendReply::text(text.clone());
                reply.meta.insert("turn".into(), index.to_string());
                Ok(reply)
            }
            Some(MockTurn::Fail(cause)) => Err(BackendError::transient(cause.clone())),
            None => Err(BackendError::permanent(format!("mock script exhausted after {} turn(s)", self.turns.len()))),
        }
    }
}

/// On-disk mock script: a default turn list plus optional per-case lists
/// used by benchmark runs.
///
/// ```toml
/// [[turn]]
/// reply = "module m; endmodule"
///
/// [[turn]]
/// fail = "connection reset"
///
/// [[cases.counter.turn]]
/// reply = "..."
/// ```
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default, rename = "turn")]
    pub turns: Vec<MockTurn>,
    #[serde(default)]
    pub cases: BTreeMap<String, CaseScript>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseScript {
    #[serde(default, rename = "turn")]
    pub turns: Vec<MockTurn>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("mock script: {e}")))
    }

    /// Turns for one benchmark case, falling back to the default list.
    pub fn turns_for(&self, case_id: Option<&str>) -> Vec<MockTurn> {
        case_id.and_then(|id| self.cases.get(id)).map(|c| c.turns.clone()).unwrap_or_else(|| self.turns.clone())
    }

    pub fn backend_for(&self, case_id: Option<&str>) -> MockBackend {
        MockBackend::new(self.turns_for(case_id))
    }
}
