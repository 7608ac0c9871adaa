// SPDX-License-Identifier: Apache-2.0

//! HTTP chat backends. `OpenAiBackend` speaks the widely cloned
//! `/chat/completions` protocol (OpenAI, vLLM, Ollama, Together, ...);
//! `AnthropicBackend` speaks the `/v1/messages` protocol.

use std::collections::BTreeMap;

use reqwest::blocking::Client;
use serde_json::{json, Value};

use super::{BackendError, BackendReply, ChatMessage, GenerationConfig, LlmBackend, Role};

fn classify(err: reqwest::Error) -> BackendError {
    if err.is_timeout() {
        BackendError::transient(format!("request timed out: {err}"))
    } else if err.is_connect() || err.is_request() {
        BackendError::transient(format!("transport error: {err}"))
    } else {
        BackendError::permanent(err.to_string())
    }
}

fn check_status(status: reqwest::StatusCode, body: &str) -> Result<(), BackendError> {
    if status.is_success() {
        return Ok(());
    }
    let msg = format!("HTTP {status}: {}", body.chars().take(500).collect::<String>());
    if status.as_u16() == 429 || status.is_server_error() {
        Err(BackendError::transient(msg))
    } else {
        Err(BackendError::permanent(msg))
    }
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

#[derive(Debug, Clone)]
pub struct OpenAiBackend {
    client: Client,
    endpoint: String,
    api_key: Option<String>,
}

impl OpenAiBackend {
    /// `endpoint` is the API base, e.g. `https://api.openai.com/v1`.
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self { client: Client::new(), endpoint: endpoint.into().trim_end_matches('/').to_string(), api_key }
    }

    fn request_body(conversation: &[ChatMessage], config: &GenerationConfig) -> Value {
        let messages: Vec<Value> =
            conversation.iter().map(|m| json!({ "role": role_name(m.role), "content": m.content })).collect();
        json!({
            "model": config.model_id,
            "messages": messages,
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_output_tokens,
        })
    }
}

impl LlmBackend for OpenAiBackend {
    fn name(&self) -> &str {
        "openai"
    }

    fn chat(&self, conversation: &[ChatMessage], config: &GenerationConfig) -> Result<BackendReply, BackendError> {
        let mut req = self
            .client
            .post(format!("{}/chat/completions", self.endpoint))
            .timeout(config.request_timeout())
            .json(&Self::request_body(conversation, config));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(classify)?;
        let status = resp.status();
        let body = resp.text().map_err(classify)?;
        check_status(status, &body)?;
        let v: Value =
            serde_json::from_str(&body).map_err(|e| BackendError::permanent(format!("malformed response: {e}")))?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| BackendError::permanent("response has no choices[0].message.content"))?
            .to_string();
        let mut meta = BTreeMap::new();
        for key in ["id", "model"] {
            if let Some(s) = v[key].as_str() {
                meta.insert(key.to_string(), s.to_string());
            }
        }
        if let Some(reason) = v["choices"][0]["finish_reason"].as_str() {
            meta.insert("finish_reason".into(), reason.into());
        }
        Ok(BackendReply { text, meta })
    }
}

#[derive(Debug, Clone)]
pub struct AnthropicBackend {
    client: Client,
    endpoint: String,
    api_key: String,
}

impl AnthropicBackend {
    /// `endpoint` is the API base, e.g. `https://api.anthropic.com`.
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>) -> Self {
        Self {
            client: Client::new(),
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
        }
    }

    fn request_body(conversation: &[ChatMessage], config: &GenerationConfig) -> Value {
        let system: Vec<&str> =
            conversation.iter().filter(|m| m.role == Role::System).map(|m| m.content.as_str()).collect();
        let messages: Vec<Value> = conversation
            .iter()
            .filter(|m| m.role != Role::System)
            .map(|m| json!({ "role": role_name(m.role), "content": m.content }))
            .collect();
        let mut body = json!({
            "model": config.model_id,
            "messages": messages,
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_output_tokens,
        });
        if !system.is_empty() {
            body["system"] = Value::String(system.join("\n\n"));
        }
        body
    }
}

impl LlmBackend for AnthropicBackend {
    fn name(&self) -> &str {
        "anthropic"
    }

    fn chat(&self, conversation: &[ChatMessage], config: &GenerationConfig) -> Result<BackendReply, BackendError> {
        let resp = self
            .client
            .post(format!("{}/v1/messages", self.endpoint))
            .timeout(config.request_timeout())
            .header("x-api-key", &self.api_key)
            .header("anthropic-version", "2023-06-01")
            .json(&Self::request_body(conversation, config))
            .send()
            .map_err(classify)?;
        let status = resp.status();
        let body = resp.text().map_err(classify)?;
        check_status(status, &body)?;
        let v: Value =
            serde_json::from_str(&body).map_err(|e| BackendError::permanent(format!("malformed response: {e}")))?;
        let text: String = v["content"]
            .as_array()
            .map(|blocks| {
                blocks
                    .iter()
                    .filter(|b| b["type"] == "text")
                    .filter_map(|b| b["text"].as_str())
                    .collect::<Vec<_>>()
                    .join("")
            })
            .unwrap_or_default();
        if text.is_empty() {
            return Err(BackendError::permanent("response has no text content"));
        }
        let mut meta = BTreeMap::new();
        for key in ["id", "model", "stop_reason"] {
            if let Some(s) = v[key].as_str() {
                meta.insert(key.to_string(), s.to_string());
            }
        }
        Ok(BackendReply { text, meta })
    }
}
