// SPDX-License-Identifier: Apache-2.0

//! Provider-agnostic chat completion.
//!
//! Every backend implements [`LlmBackend`]; [`LlmGateway`] adds validation,
//! wall-clock latency measurement and retry with exponential backoff on
//! transient failures. Agents only ever talk to the gateway.

mod extract;
mod http;
mod mock;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use extract::extract_code_block;
pub use http::{AnthropicBackend, OpenAiBackend};
pub use mock::{CaseScript, MockBackend, MockScript, MockTurn};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

fn default_temperature() -> f64 {
    0.2
}

fn default_top_p() -> f64 {
    0.1
}

fn default_max_output_tokens() -> u32 {
    4096
}

fn default_model_id() -> String {
    "mock".into()
}

fn default_request_timeout() -> u64 {
    120
}

/// Sampling and request settings sent with every completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_model_id")]
    pub model_id: String,
    #[serde(default = "default_request_timeout", rename = "request_timeout_secs")]
    pub request_timeout_secs: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            temperature: default_temperature(),
            top_p: default_top_p(),
            max_output_tokens: default_max_output_tokens(),
            model_id: default_model_id(),
            request_timeout_secs: default_request_timeout(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(Error::Validation(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Validation(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if self.max_output_tokens == 0 {
            return Err(Error::Validation("max_output_tokens must be positive".into()));
        }
        if self.request_timeout_secs == 0 {
            return Err(Error::Validation("request_timeout_secs must be positive".into()));
        }
        Ok(())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs(self.request_timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
    pub attempts: u32,
    #[serde(default)]
    pub provider_meta: BTreeMap<String, String>,
}

/// Raw reply from a backend, before the gateway stamps latency on it.
#[derive(Debug, Clone, Default)]
pub struct BackendReply {
    pub text: String,
    pub meta: BTreeMap<String, String>,
}

impl BackendReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), meta: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendError {
    pub transient: bool,
    pub message: String,
}

impl BackendError {
    pub fn transient(message: impl Into<String>) -> Self {
        Self { transient: true, message: message.into() }
    }

    pub fn permanent(message: impl Into<String>) -> Self {
        Self { transient: false, message: message.into() }
    }
}

impl fmt::Display for BackendError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// A chat-completion provider. Implementations must tolerate concurrent
/// calls from independent pipeline runs.
pub trait LlmBackend: Send + Sync {
    fn name(&self) -> &str;

    fn chat(
        &self,
        conversation: &[ChatMessage],
        config: &GenerationConfig,
    ) -> std::result::Result<BackendReply, BackendError>;
}

fn default_max_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// Delay before the second attempt; doubled before each later one.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: default_max_attempts(), backoff_ms: default_backoff_ms() }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        Self { max_attempts, backoff_ms: 0 }
    }

    /// Sleep before attempt `attempt` (1-based; attempt 1 never waits).
    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt <= 1 {
            return Duration::ZERO;
        }
        let factor = 1u64 << (attempt - 2).min(16);
        Duration::from_millis(self.backoff_ms.saturating_mul(factor))
    }
}

/// Shared handle through which agents reach a backend.
#[derive(Clone)]
pub struct LlmGateway {
    backend: Arc<dyn LlmBackend>,
    retry: RetryPolicy,
}

impl fmt::Debug for LlmGateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LlmGateway").field("backend", &self.backend.name()).field("retry", &self.retry).finish()
    }
}

impl LlmGateway {
    pub fn new(backend: Arc<dyn LlmBackend>, retry: RetryPolicy) -> Self {
        Self { backend, retry }
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    /// Sends the conversation and returns the provider text verbatim.
    pub fn complete(&self, conversation: &[ChatMessage], config: &GenerationConfig) -> Result<Completion> {
        if conversation.is_empty() {
            return Err(Error::Validation("conversation must not be empty".into()));
        }
        if let Some(pos) = conversation.iter().skip(1).position(|m| m.role == Role::System) {
            return Err(Error::Validation(format!("system message only allowed first, found at position {}", pos + 1)));
        }
        if conversation.iter().any(|m| m.content.trim().is_empty()) {
            return Err(Error::Validation("chat message content must not be empty".into()));
        }
        config.validate()?;

        let max_attempts = self.retry.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 1..=max_attempts {
            let delay = self.retry.delay_before(attempt);
            if !delay.is_zero() {
                std::thread::sleep(delay);
            }
            let started = Instant::now();
            match self.backend.chat(conversation, config) {
                Ok(reply) => {
                    return Ok(Completion {
                        text: reply.text,
                        latency_ms: started.elapsed().as_millis() as u64,
                        attempts: attempt,
                        provider_meta: reply.meta,
                    });
                }
                Err(e) if e.transient => {
                    log::warn!("{}: attempt {attempt}/{max_attempts} failed: {e}", self.backend.name());
                    last_error = e.message;
                }
                Err(e) => {
                    return Err(Error::Llm { attempts: attempt, cause: e.message });
                }
            }
        }
        Err(Error::Llm { attempts: max_attempts, cause: last_error })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gateway(turns: Vec<MockTurn>, attempts: u32) -> (Arc<MockBackend>, LlmGateway) {
        let mock = Arc::new(MockBackend::new(turns));
        let gw = LlmGateway::new(mock.clone(), RetryPolicy::no_delay(attempts));
        (mock, gw)
    }

    #[test]
    fn defaults_match_reported_sampling() {
        let c = GenerationConfig::default();
        assert_eq!(c.temperature, 0.2);
        assert_eq!(c.top_p, 0.1);
        c.validate().unwrap();
    }

    #[test]
    fn out_of_range_sampling_rejected() {
        let mut c = GenerationConfig { temperature: 2.5, ..Default::default() };
        assert!(c.validate().is_err());
        c.temperature = 0.2;
        c.top_p = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mock_reply_passes_through() {
        let (_, gw) = gateway(vec![MockTurn::reply("module m; endmodule")], 3);
        let c = gw.complete(&[ChatMessage::user("make a module")], &GenerationConfig::default()).unwrap();
        assert_eq!(c.text, "module m; endmodule");
        assert_eq!(c.attempts, 1);
    }

    #[test]
    fn empty_conversation_rejected() {
        let (mock, gw) = gateway(vec![MockTurn::reply("x")], 3);
        let err = gw.complete(&[], &GenerationConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert_eq!(mock.turns_consumed(), 0);
    }

    #[test]
    fn transient_failures_are_retried() {
        let (mock, gw) = gateway(vec![MockTurn::fail("reset"), MockTurn::fail("reset"), MockTurn::reply("ok")], 3);
        let c = gw.complete(&[ChatMessage::user("hi")], &GenerationConfig::default()).unwrap();
        assert_eq!(c.text, "ok");
        assert_eq!(c.attempts, 3);
        assert_eq!(mock.turns_consumed(), 3);
    }

    #[test]
    fn retries_exhausted_surface_llm_failure() {
        let (_, gw) = gateway(vec![MockTurn::fail("a"), MockTurn::fail("b"), MockTurn::fail("timeout")], 3);
        let err = gw.complete(&[ChatMessage::user("hi")], &GenerationConfig::default()).unwrap_err();
        match err {
            Error::Llm { attempts, cause } => {
                assert_eq!(attempts, 3);
                assert_eq!(cause, "timeout");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_before(1), Duration::ZERO);
        assert_eq!(p.delay_before(2), Duration::from_secs(1));
        assert_eq!(p.delay_before(3), Duration::from_secs(2));
        assert_eq!(p.delay_before(4), Duration::from_secs(4));
    }
}
