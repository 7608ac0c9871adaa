// SPDX-License-Identifier: Apache-2.0

//! Domain types shared by every stage of the pipeline, and the revision
//! history that backs change tracking and rollback of generated sources.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Target hardware description language. RTL and testbench of one run
/// always share it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HdlLanguage {
    Verilog,
    Vhdl,
}

impl HdlLanguage {
    /// File extension used for sources written into a workdir.
    pub fn extension(self) -> &'static str {
        match self {
            HdlLanguage::Verilog => "v",
            HdlLanguage::Vhdl => "vhd",
        }
    }

    /// Lowercase tag used on fenced code blocks.
    pub fn fence_tags(self) -> &'static [&'static str] {
        match self {
            HdlLanguage::Verilog => &["verilog", "systemverilog", "sv", "v"],
            HdlLanguage::Vhdl => &["vhdl", "vhd"],
        }
    }
}

impl fmt::Display for HdlLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HdlLanguage::Verilog => f.write_str("Verilog"),
            HdlLanguage::Vhdl => f.write_str("VHDL"),
        }
    }
}

impl FromStr for HdlLanguage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "verilog" | "v" | "sv" | "systemverilog" => Ok(HdlLanguage::Verilog),
            "vhdl" | "vhd" => Ok(HdlLanguage::Vhdl),
            other => Err(Error::Validation(format!("unknown HDL language `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clarification {
    pub question: String,
    pub answer: String,
}

/// Natural-language design request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    prompt_text: String,
    language: HdlLanguage,
    #[serde(default)]
    module_name_hint: Option<String>,
    #[serde(default)]
    clarifications: Vec<Clarification>,
}

impl DesignSpec {
    pub fn new(prompt_text: impl Into<String>, language: HdlLanguage) -> Result<Self> {
        let prompt_text = prompt_text.into();
        if prompt_text.trim().is_empty() {
            return Err(Error::Validation("design prompt must not be empty".into()));
        }
        Ok(Self { prompt_text, language, module_name_hint: None, clarifications: Vec::new() })
    }

    pub fn with_module_name(mut self, name: impl Into<String>) -> Self {
        self.module_name_hint = Some(name.into());
        self
    }

    pub fn prompt_text(&self) -> &str {
        &self.prompt_text
    }

    pub fn language(&self) -> HdlLanguage {
        self.language
    }

    pub fn module_name_hint(&self) -> Option<&str> {
        self.module_name_hint.as_deref()
    }

    pub fn clarifications(&self) -> &[Clarification] {
        &self.clarifications
    }

    /// Clarifications are append-only.
    pub fn add_clarification(&mut self, question: impl Into<String>, answer: impl Into<String>) {
        self.clarifications.push(Clarification { question: question.into(), answer: answer.into() });
    }

    /// Prompt text followed by the module-name hint and any clarifications,
    /// as fed to the generation prompts.
    pub fn render(&self) -> String {
        let mut out = self.prompt_text.trim().to_string();
        if let Some(name) = &self.module_name_hint {
            out.push_str(&format!("\n\nThe top-level design unit must be named `{name}`."));
        }
        if !self.clarifications.is_empty() {
            out.push_str("\n\nClarifications:");
            for c in &self.clarifications {
                out.push_str(&format!("\nQ: {}\nA: {}", c.question.trim(), c.answer.trim()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Rtl,
    Testbench,
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArtifactKind::Rtl => f.write_str("RTL"),
            ArtifactKind::Testbench => f.write_str("testbench"),
        }
    }
}

/// SHA-256 of the text, lowercase hex.
pub fn content_hash(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// One revision of one HDL source file. Only a [`RevisionHistory`] mints these.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceArtifact {
    kind: ArtifactKind,
    language: HdlLanguage,
    text: String,
    revision_id: u32,
    parent_revision: Option<u32>,
    content_hash: String,
}

impl SourceArtifact {
    pub fn kind(&self) -> ArtifactKind {
        self.kind
    }

    pub fn language(&self) -> HdlLanguage {
        self.language
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn revision_id(&self) -> u32 {
        self.revision_id
    }

    pub fn parent_revision(&self) -> Option<u32> {
        self.parent_revision
    }

    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    /// Conventional file name inside a workdir, e.g. `rtl.v` or `tb.vhd`.
    pub fn file_name(&self) -> String {
        let stem = match self.kind {
            ArtifactKind::Rtl => "rtl",
            ArtifactKind::Testbench => "tb",
        };
        format!("{stem}.{}", self.language.extension())
    }
}

/// Full lineage of one artifact kind within a run.
///
/// Rollback copies an old revision forward; nothing is ever removed. Error
/// counts are scored per revision and the best (lowest) one is tracked,
/// ties keeping the earlier revision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionHistory {
    kind: ArtifactKind,
    language: HdlLanguage,
    artifacts: Vec<SourceArtifact>,
    best_revision: Option<u32>,
    #[serde(default)]
    error_counts: BTreeMap<u32, usize>,
}

impl RevisionHistory {
    pub fn new(kind: ArtifactKind, language: HdlLanguage) -> Self {
        Self { kind, language, artifacts: Vec::new(), best_revision: None, error_counts: BTreeMap::new() }
    }

    pub fn kind(&self) -> ArtifactKind {
        self.kind
    }

    pub fn language(&self) -> HdlLanguage {
        self.language
    }

    pub fn len(&self) -> usize {
        self.artifacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.artifacts.is_empty()
    }

    pub fn artifacts(&self) -> &[SourceArtifact] {
        &self.artifacts
    }

    pub fn latest(&self) -> Option<&SourceArtifact> {
        self.artifacts.last()
    }

    pub fn get(&self, revision_id: u32) -> Result<&SourceArtifact> {
        // ids are contiguous from 1, so the id doubles as a 1-based index
        revision_id
            .checked_sub(1)
            .and_then(|i| self.artifacts.get(i as usize))
            .ok_or(Error::UnknownRevision(revision_id))
    }

    pub fn best_revision(&self) -> Option<u32> {
        self.best_revision
    }

    pub fn best(&self) -> Option<&SourceArtifact> {
        self.best_revision.and_then(|id| self.get(id).ok())
    }

    pub fn error_count(&self, revision_id: u32) -> Option<usize> {
        self.error_counts.get(&revision_id).copied()
    }

    pub fn best_error_count(&self) -> Option<usize> {
        self.best_revision.and_then(|id| self.error_count(id))
    }

    fn next_id(&self) -> u32 {
        self.artifacts.len() as u32 + 1
    }

    /// Appends `text` as a child of the latest revision.
    pub fn append_revision(&mut self, text: impl Into<String>) -> Result<SourceArtifact> {
        let parent = self.latest().map(SourceArtifact::revision_id);
        self.push(text.into(), parent)
    }

    /// Appends `text` as a child of an explicit existing revision.
    pub fn append_child(&mut self, text: impl Into<String>, parent: u32) -> Result<SourceArtifact> {
        self.get(parent)?;
        self.push(text.into(), Some(parent))
    }

    fn push(&mut self, text: String, parent_revision: Option<u32>) -> Result<SourceArtifact> {
        if text.trim().is_empty() {
            return Err(Error::Validation(format!("{} source text must not be empty", self.kind)));
        }
        let artifact = SourceArtifact {
            kind: self.kind,
            language: self.language,
            content_hash: content_hash(&text),
            text,
            revision_id: self.next_id(),
            parent_revision,
        };
        self.artifacts.push(artifact.clone());
        Ok(artifact)
    }

    /// Scores a revision. Returns true when it became the new best.
    pub fn record_error_count(&mut self, revision_id: u32, error_count: usize) -> Result<bool> {
        self.get(revision_id)?;
        self.error_counts.insert(revision_id, error_count);
        let improved = match self.best_error_count() {
            None => true,
            Some(best) => error_count < best,
        };
        if improved {
            self.best_revision = Some(revision_id);
        }
        Ok(improved)
    }

    /// Forgets every score and the best revision. Used when the meaning of
    /// an error count changes, e.g. from compile errors to failing tests.
    pub fn reset_scores(&mut self) {
        self.error_counts.clear();
        self.best_revision = None;
    }

    /// Copies `revision_id` forward as a fresh revision whose parent is the
    /// target.
    pub fn rollback_to(&mut self, revision_id: u32) -> Result<SourceArtifact> {
        let text = self.get(revision_id)?.text.clone();
        self.push(text, Some(revision_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

/// One structured compiler finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    /// `None` when the tool gave no usable line number.
    pub line: Option<u32>,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_code: Option<String>,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
}

impl Diagnostic {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// Which generated artifact the diagnostic points at, judged by the
    /// conventional workdir file names.
    pub fn artifact_kind(&self) -> Option<ArtifactKind> {
        let name = self.file.rsplit(['/', '\\']).next().unwrap_or(&self.file);
        let stem = name.split('.').next().unwrap_or(name);
        match stem {
            "rtl" => Some(ArtifactKind::Rtl),
            "tb" => Some(ArtifactKind::Testbench),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Syntax,
    Functional,
}

impl fmt::Display for LoopKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopKind::Syntax => f.write_str("syntax"),
            LoopKind::Functional => f.write_str("functional"),
        }
    }
}

/// What an iteration did after its check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationAction {
    /// Corrective prompt sent, new revision produced.
    Revised,
    /// Regressed revision replaced by the best one, then revised.
    RolledBack,
    /// Check passed; the loop is done.
    Accepted,
    /// Check failed on the last budgeted iteration; nothing was revised.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    #[serde(rename = "loop")]
    pub loop_kind: LoopKind,
    pub index: u32,
    pub llm_ms: u64,
    pub tool_ms: u64,
    pub error_count_after: u32,
    pub action: IterationAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStatus {
    Success,
    SyntaxExhausted,
    FunctionalExhausted,
    ToolFailure,
    LlmFailure,
}

impl fmt::Display for PipelineStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PipelineStatus::Success => "success",
            PipelineStatus::SyntaxExhausted => "syntax_exhausted",
            PipelineStatus::FunctionalExhausted => "functional_exhausted",
            PipelineStatus::ToolFailure => "tool_failure",
            PipelineStatus::LlmFailure => "llm_failure",
        };
        f.write_str(s)
    }
}

/// Terminal outcome of one pipeline run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub status: PipelineStatus,
    pub final_rtl: Option<SourceArtifact>,
    pub final_testbench: Option<SourceArtifact>,
    pub iterations: Vec<IterationRecord>,
    pub total_llm_ms: u64,
    pub total_tool_ms: u64,
    /// Whether the final RTL/testbench pair passed its last joint compile.
    pub syntax_clean: bool,
    /// Testbench hash frozen at functional-loop entry.
    #[serde(default)]
    pub pinned_testbench_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl PipelineResult {
    pub fn new(
        status: PipelineStatus,
        final_rtl: Option<SourceArtifact>,
        final_testbench: Option<SourceArtifact>,
        iterations: Vec<IterationRecord>,
    ) -> Result<Self> {
        if status == PipelineStatus::Success && (final_rtl.is_none() || final_testbench.is_none()) {
            return Err(Error::InvariantViolation("a successful run must carry both final artifacts".into()));
        }
        let total_llm_ms = iterations.iter().map(|r| r.llm_ms).sum();
        let total_tool_ms = iterations.iter().map(|r| r.tool_ms).sum();
        Ok(Self {
            status,
            final_rtl,
            final_testbench,
            iterations,
            total_llm_ms,
            total_tool_ms,
            syntax_clean: false,
            pinned_testbench_hash: None,
            failure: None,
        })
    }

    pub fn iteration_count(&self, kind: LoopKind) -> usize {
        self.iterations.iter().filter(|r| r.loop_kind == kind).count()
    }

    pub fn syntax_iterations(&self) -> usize {
        self.iteration_count(LoopKind::Syntax)
    }

    pub fn functional_iterations(&self) -> usize {
        self.iteration_count(LoopKind::Functional)
    }

    /// (llm, tool) milliseconds spent in one loop.
    pub fn loop_durations(&self, kind: LoopKind) -> (u64, u64) {
        self.iterations.iter().filter(|r| r.loop_kind == kind).fold((0, 0), |(l, t), r| (l + r.llm_ms, t + r.tool_ms))
    }

    /// Checks that the duration totals equal the per-iteration sums and that
    /// iteration indices are unique and contiguous per loop.
    pub fn check_ledger(&self) -> Result<()> {
        let llm: u64 = self.iterations.iter().map(|r| r.llm_ms).sum();
        let tool: u64 = self.iterations.iter().map(|r| r.tool_ms).sum();
        if llm != self.total_llm_ms || tool != self.total_tool_ms {
            return Err(Error::InvariantViolation(format!(
                "duration ledger mismatch: llm {} vs {llm}, tool {} vs {tool}",
                self.total_llm_ms, self.total_tool_ms
            )));
        }
        for kind in [LoopKind::Syntax, LoopKind::Functional] {
            let indices: Vec<u32> = self.iterations.iter().filter(|r| r.loop_kind == kind).map(|r| r.index).collect();
            if indices.iter().enumerate().any(|(i, &idx)| idx != i as u32 + 1) {
                return Err(Error::InvariantViolation(format!("{kind} iteration indices not contiguous: {indices:?}")));
            }
        }
        if self.status == PipelineStatus::Success && (self.final_rtl.is_none() || self.final_testbench.is_none()) {
            return Err(Error::InvariantViolation("a successful run must carry both final artifacts".into()));
        }
        Ok(())
    }

    /// Copy with every measured duration zeroed, for comparing runs.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        for r in &mut out.iterations {
            r.llm_ms = 0;
            r.tool_ms = 0;
        }
        out.total_llm_ms = 0;
        out.total_tool_ms = 0;
        out
    }
}
