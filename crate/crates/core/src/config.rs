// SPDX-License-Identifier: Apache-2.0

//! TOML run configuration. Relative paths resolve against the directory of
//! the config file.
//!
//! ```toml
//! language = "verilog"
//! max_syntax_iters = 10
//! max_functional_iters = 10
//! workdir_root = "runs"
//!
//! [generation]
//! model_id = "gpt-4o"
//! temperature = 0.2
//!
//! [llm]
//! backend = "openai"        # mock | openai | anthropic
//! api_key_env = "OPENAI_API_KEY"
//!
//! [toolchain]
//! profile = "iverilog"      # builtin name, "stub", or an inline table
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::ParseRuleSet;
use crate::error::{Error, Result};
use crate::llm::{AnthropicBackend, GenerationConfig, LlmBackend, LlmGateway, MockScript, OpenAiBackend, RetryPolicy};
use crate::model::HdlLanguage;
use crate::orchestrator::RunConfig;
use crate::prompts::PromptSet;
use crate::toolchain::{self, stub, ToolProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    OpenAi,
    Anthropic,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mock" => Ok(Self::Mock),
            "openai" => Ok(Self::OpenAi),
            "anthropic" => Ok(Self::Anthropic),
            other => Err(Error::Config(format!("unknown backend `{other}` (mock, openai, anthropic)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub mock_script: Option<PathBuf>,
    pub max_attempts: u32,
    pub backoff_ms: u64,
}

impl Default for LlmSection {
    fn default() -> Self {
        let retry = RetryPolicy::default();
        Self {
            backend: BackendKind::Mock,
            endpoint: None,
            api_key_env: None,
            mock_script: None,
            max_attempts: retry.max_attempts,
            backoff_ms: retry.backoff_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Named(String),
    Inline(ToolProfile),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolchainSection {
    /// Defaults to the open-source simulator for the run language.
    pub profile: Option<ProfileRef>,
    /// Builtin rule-set name or path to a rules TOML file.
    pub rule_set: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub language: HdlLanguage,
    pub max_syntax_iters: u32,
    pub max_functional_iters: u32,
    pub interactive: bool,
    pub workdir_root: PathBuf,
    pub prompts_dir: Option<PathBuf>,
    pub generation: GenerationConfig,
    pub llm: LlmSection,
    pub toolchain: ToolchainSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self {
            language: HdlLanguage::Verilog,
            max_syntax_iters: 10,
            max_functional_iters: 10,
            interactive: false,
            workdir_root: PathBuf::from("runs"),
            prompts_dir: None,
            generation: GenerationConfig::default(),
            llm: LlmSection::default(),
            toolchain: ToolchainSection::default(),
        }
    }
}

/// A parsed config plus the directory its relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub file: ConfigFile,
    pub base_dir: PathBuf,
}

impl Default for Settings {
    fn default() -> Self {
        Self { file: ConfigFile::default(), base_dir: PathBuf::from(".") }
    }
}

impl Settings {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self { file, base_dir: base_dir.into() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, if base.as_os_str().is_empty() { PathBuf::from(".") } else { base })
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn workdir_root(&self) -> PathBuf {
        self.resolve(&self.file.workdir_root)
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy { max_attempts: self.file.llm.max_attempts, backoff_ms: self.file.llm.backoff_ms }
    }

    fn api_key(&self, default_env: &str) -> Option<String> {
        let var = self.file.llm.api_key_env.as_deref().unwrap_or(default_env);
        std::env::var(var).ok().filter(|k| !k.is_empty())
    }

    /// Backend for one run; `case_id` selects a per-case mock script.
    pub fn backend(&self, case_id: Option<&str>) -> Result<Arc<dyn LlmBackend>> {
        let llm = &self.file.llm;
        Ok(match llm.backend {
            BackendKind::Mock => {
                let path = llm
                    .mock_script
                    .as_ref()
                    .ok_or_else(|| Error::Config("the mock backend needs `llm.mock_script`".into()))?;
                Arc::new(MockScript::load(&self.resolve(path))?.backend_for(case_id))
            }
            BackendKind::OpenAi => {
                let endpoint = llm.endpoint.clone().unwrap_or_else(|| "https://api.openai.com/v1".into());
                Arc::new(OpenAiBackend::new(endpoint, self.api_key("OPENAI_API_KEY")))
            }
            BackendKind::Anthropic => {
                let endpoint = llm.endpoint.clone().unwrap_or_else(|| "https://api.anthropic.com".into());
                let key = self.api_key("ANTHROPIC_API_KEY").ok_or_else(|| {
                    Error::Config("anthropic backend needs an API key (see `llm.api_key_env`)".into())
                })?;
                Arc::new(AnthropicBackend::new(endpoint, key))
            }
        })
    }

    pub fn gateway(&self, case_id: Option<&str>) -> Result<LlmGateway> {
        Ok(LlmGateway::new(self.backend(case_id)?, self.retry_policy()))
    }

    /// Resolves the tool profile. The name `stub` installs the scripted
    /// stand-in toolchain under `<workdir_root>/.tools`.
    pub fn profile(&self) -> Result<ToolProfile> {
        let language = self.file.language;
        let profile = match &self.file.toolchain.profile {
            None => toolchain::default_profile_for(language),
            Some(ProfileRef::Named(name)) if name == "stub" => {
                stub::install(&self.workdir_root().join(".tools"), language)?
            }
            Some(ProfileRef::Named(name)) => toolchain::builtin_profile(name)?,
            Some(ProfileRef::Inline(p)) => p.clone(),
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Explicit `rule_set` first, else the builtin rules matching the
    /// profile name.
    pub fn rules(&self, profile: &ToolProfile) -> Result<ParseRuleSet> {
        match &self.file.toolchain.rule_set {
            Some(name) if toolchain::builtin_tool_names().contains(&name.as_str()) => toolchain::builtin_rules(name),
            Some(path) => ParseRuleSet::load(&self.resolve(Path::new(path))),
            None if profile.name == "stub" => Ok(stub::rules()),
            None => toolchain::builtin_rules(&profile.name).map_err(|_| {
                Error::Config(format!("profile `{}` has no builtin rules; set `toolchain.rule_set`", profile.name))
            }),
        }
    }

    pub fn prompts(&self) -> Result<PromptSet> {
        match &self.file.prompts_dir {
            Some(dir) => PromptSet::with_overrides(&self.resolve(dir)),
            None => Ok(PromptSet::builtin()),
        }
    }

    /// A fresh `<workdir_root>/<run-id>` directory path.
    pub fn new_run_dir(&self) -> PathBuf {
        self.workdir_root().join(run_id())
    }

    pub fn run_config(&self, workdir: PathBuf) -> Result<RunConfig> {
        let profile = self.profile()?;
        let config = RunConfig {
            language: self.file.language,
            max_syntax_iters: self.file.max_syntax_iters,
            max_functional_iters: self.file.max_functional_iters,
            interactive: self.file.interactive,
            generation: self.file.generation.clone(),
            rules: self.rules(&profile)?,
            profile,
            prompts: self.prompts()?,
            workdir,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Timestamp plus a random suffix, e.g. `20260101-120000-1a2b3c4d`.
pub fn run_id() -> String {
    let id = uuid::Uuid::new_v4().simple().to_string();
    format!("{}-{}", chrono::Utc::now().format("%Y%m%d-%H%M%S"), &id[..8])
}
