// SPDX-License-Identifier: Apache-2.0

//! Runs one request end to end: clarification, testbench, RTL, then the
//! syntax loop and the functional loop, each bounded by its own budget.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use crate::agents::{
    build_functional_corrective_prompt, build_syntax_corrective_prompt, CodeAgent, ReviewAgent, Verdict,
    VerificationAgent,
};
use crate::diagnostics::ParseRuleSet;
use crate::error::{Error, Result};
use crate::llm::{GenerationConfig, LlmGateway};
use crate::model::{
    ArtifactKind, DesignSpec, HdlLanguage, IterationAction, IterationRecord, LoopKind, PipelineResult, PipelineStatus,
    RevisionHistory, SourceArtifact,
};
use crate::prompts::PromptSet;
use crate::toolchain::{RawToolLog, ToolProfile};

pub const RESULT_FILE: &str = "result.json";
pub const LOG_DIR: &str = "logs";

/// Everything one run needs besides the LLM connection.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub language: HdlLanguage,
    pub max_syntax_iters: u32,
    pub max_functional_iters: u32,
    pub interactive: bool,
    pub generation: GenerationConfig,
    pub profile: ToolProfile,
    pub rules: ParseRuleSet,
    pub prompts: PromptSet,
    /// Run workspace: sources, `logs/` and `result.json` end up here.
    pub workdir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_syntax_iters == 0 || self.max_functional_iters == 0 {
            return Err(Error::Validation("iteration budgets must be at least 1".into()));
        }
        if self.profile.language != self.language {
            return Err(Error::Validation(format!(
                "tool profile `{}` is for {}, run language is {}",
                self.profile.name, self.profile.language, self.language
            )));
        }
        self.profile.validate()?;
        self.generation.validate()
    }
}

/// Source of answers to clarification questions.
pub trait Clarifier {
    /// One answer per question, in order.
    fn answer(&mut self, questions: &[String]) -> Result<Vec<String>>;
}

/// Fixed answers, mostly for tests and scripted runs.
#[derive(Debug, Clone, Default)]
pub struct CannedClarifier(pub Vec<String>);

impl Clarifier for CannedClarifier {
    fn answer(&mut self, questions: &[String]) -> Result<Vec<String>> {
        Ok(questions.iter().enumerate().map(|(i, _)| self.0.get(i).cloned().unwrap_or_default()).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RollbackDecision {
    /// Keep revising the latest revision.
    Revised,
    /// Restore revision `to` and revise that instead.
    RolledBack { to: u32 },
}

/// Rolls back when the latest error count is strictly worse than the best
/// scored revision; ties keep the latest.
pub fn apply_rollback_policy(history: &RevisionHistory, latest_error_count: usize) -> RollbackDecision {
    match (history.best_revision(), history.best_error_count()) {
        (Some(best), Some(best_count)) if latest_error_count > best_count => RollbackDecision::RolledBack { to: best },
        _ => RollbackDecision::Revised,
    }
}

fn failure_status(err: &Error) -> Option<PipelineStatus> {
    match err {
        Error::Llm { .. } | Error::Extraction(_) => Some(PipelineStatus::LlmFailure),
        Error::Tool(_) => Some(PipelineStatus::ToolFailure),
        _ => None,
    }
}

struct Run<'a> {
    config: &'a RunConfig,
    code: CodeAgent,
    review: ReviewAgent,
    verifier: VerificationAgent,
    rtl: RevisionHistory,
    tb: RevisionHistory,
    iterations: Vec<IterationRecord>,
    /// Corrective prompt produced for each checked revision.
    feedback: HashMap<(ArtifactKind, u32), String>,
    /// RTL revisions known to compile against the final testbench.
    compiled_clean: HashSet<u32>,
    pinned: Option<String>,
    syntax_clean: bool,
}

impl Run<'_> {
    fn write_log(&self, name: &str, log: &RawToolLog) {
        let path = self.config.workdir.join(LOG_DIR).join(name);
        let body = format!(
            "exit_code: {}\ntimed_out: {}\nduration_ms: {}\n--- stdout\n{}\n--- stderr\n{}\n",
            log.exit_code, log.timed_out, log.duration_ms, log.stdout, log.stderr
        );
        if let Err(e) = std::fs::write(&path, body) {
            log::warn!("could not write {}: {e}", path.display());
        }
    }

    fn history(&mut self, kind: ArtifactKind) -> &mut RevisionHistory {
        match kind {
            ArtifactKind::Rtl => &mut self.rtl,
            ArtifactKind::Testbench => &mut self.tb,
        }
    }

    fn latest(&self, kind: ArtifactKind) -> SourceArtifact {
        let h = if kind == ArtifactKind::Rtl { &self.rtl } else { &self.tb };
        h.latest().expect("generated before the loops start").clone()
    }

    fn generate(&mut self, mut spec: DesignSpec, clarifier: Option<&mut dyn Clarifier>) -> Result<u64> {
        let mut llm_ms = 0;
        let (outcome, ms) = self.code.assess_spec(&spec)?;
        llm_ms += ms;
        if outcome.verdict == Verdict::NeedsClarification {
            match clarifier {
                Some(c) => {
                    let answers = c.answer(&outcome.questions)?;
                    for (q, a) in outcome.questions.iter().zip(answers) {
                        spec.add_clarification(q.clone(), a);
                    }
                }
                None => log::warn!("specification needs clarification but no one can answer; continuing"),
            }
        }
        let tb = self.code.generate_testbench(&spec, &mut self.tb)?;
        llm_ms += tb.llm_ms;
        llm_ms += self.code.generate_rtl(&spec, &tb.artifact, &mut self.rtl)?.llm_ms;
        Ok(llm_ms)
    }

    fn syntax_loop(&mut self, mut carried_llm_ms: u64) -> Result<bool> {
        let max = self.config.max_syntax_iters;
        for index in 1..=max {
            let rtl = self.latest(ArtifactKind::Rtl);
            let tb = self.latest(ArtifactKind::Testbench);
            let (verdict, log) = self.review.review(&rtl, &tb, &self.config.workdir)?;
            self.write_log(&format!("syntax-{index:02}-compile.log"), &log);
            let report = verdict.report;
            let mut record = IterationRecord {
                loop_kind: LoopKind::Syntax,
                index,
                llm_ms: std::mem::take(&mut carried_llm_ms),
                tool_ms: log.duration_ms,
                error_count_after: report.error_count() as u32,
                action: IterationAction::Revised,
            };
            log::info!("syntax iteration {index}/{max}: {} error(s)", record.error_count_after);
            if verdict.clean {
                record.action = IterationAction::Accepted;
                self.iterations.push(record);
                self.compiled_clean.insert(rtl.revision_id());
                return Ok(true);
            }
            for (kind, artifact) in [(ArtifactKind::Rtl, &rtl), (ArtifactKind::Testbench, &tb)] {
                let count = report.errors_for(kind).count();
                self.history(kind).record_error_count(artifact.revision_id(), count)?;
                if count > 0 {
                    let prompt =
                        build_syntax_corrective_prompt(&self.config.prompts, &report.restricted_to(kind), &rtl, &tb)?;
                    self.feedback.insert((kind, artifact.revision_id()), prompt);
                }
            }
            if index == max {
                record.action = IterationAction::Exhausted;
                self.iterations.push(record);
                return Ok(false);
            }
            let mut progressed = false;
            for (kind, artifact) in [(ArtifactKind::Rtl, &rtl), (ArtifactKind::Testbench, &tb)] {
                let Some(prompt) = self.feedback.get(&(kind, artifact.revision_id())).cloned() else {
                    continue;
                };
                let count = report.errors_for(kind).count();
                let (base, prompt) = match apply_rollback_policy(self.history(kind), count) {
                    RollbackDecision::RolledBack { to } => {
                        log::info!("{kind} regressed; rolling back to revision {to}");
                        let copy = self.history(kind).rollback_to(to)?;
                        record.action = IterationAction::RolledBack;
                        let best_prompt = self.feedback.get(&(kind, to)).cloned().unwrap_or(prompt);
                        (copy, best_prompt)
                    }
                    RollbackDecision::Revised => (artifact.clone(), prompt),
                };
                let code = self.code.clone();
                let g = code.revise(&base, &prompt, self.history(kind))?;
                record.llm_ms += g.llm_ms;
                progressed |= g.artifact.content_hash() != base.content_hash();
            }
            if !progressed {
                log::warn!("revision identical to its predecessor; ending the syntax loop");
                record.action = IterationAction::Exhausted;
                self.iterations.push(record);
                return Ok(false);
            }
            self.iterations.push(record);
        }
        unreachable!("the last iteration always returns")
    }

    fn functional_loop(&mut self) -> Result<bool> {
        let tb = self.latest(ArtifactKind::Testbench);
        let pinned = tb.content_hash().to_string();
        self.pinned = Some(pinned.clone());
        self.rtl.reset_scores();
        let mut cases_seen = 0;
        let max = self.config.max_functional_iters;
        for index in 1..=max {
            let rtl = self.latest(ArtifactKind::Rtl);
            let (verdict, logs) = self.verifier.verify(&rtl, &tb, &pinned, &self.config.workdir)?;
            self.write_log(&format!("functional-{index:02}-compile.log"), &logs.compile);
            if let Some(sim) = &logs.simulate {
                self.write_log(&format!("functional-{index:02}-simulate.log"), sim);
            }
            let score = verdict.score(cases_seen);
            cases_seen = cases_seen.max(verdict.report.outcomes.len());
            if verdict.syntax_regression.is_none() {
                self.compiled_clean.insert(rtl.revision_id());
            }
            let mut record = IterationRecord {
                loop_kind: LoopKind::Functional,
                index,
                llm_ms: 0,
                tool_ms: logs.duration_ms(),
                error_count_after: score as u32,
                action: IterationAction::Revised,
            };
            log::info!("functional iteration {index}/{max}: score {score}");
            self.rtl.record_error_count(rtl.revision_id(), score)?;
            if verdict.all_passed {
                record.action = IterationAction::Accepted;
                self.iterations.push(record);
                return Ok(true);
            }
            let prompt = match verdict.corrective_prompt {
                Some(p) => p,
                None => build_functional_corrective_prompt(&self.config.prompts, &verdict.report, &rtl)?,
            };
            self.feedback.insert((ArtifactKind::Rtl, rtl.revision_id()), prompt.clone());
            if index == max {
                record.action = IterationAction::Exhausted;
                self.iterations.push(record);
                return Ok(false);
            }
            let (base, prompt) = match apply_rollback_policy(&self.rtl, score) {
                RollbackDecision::RolledBack { to } => {
                    log::info!("RTL regressed; rolling back to revision {to}");
                    record.action = IterationAction::RolledBack;
                    let best_prompt = self.feedback.get(&(ArtifactKind::Rtl, to)).cloned().unwrap_or(prompt);
                    (self.rtl.rollback_to(to)?, best_prompt)
                }
                RollbackDecision::Revised => (rtl, prompt),
            };
            let g = self.code.revise(&base, &prompt, &mut self.rtl)?;
            record.llm_ms = g.llm_ms;
            if g.artifact.content_hash() == base.content_hash() {
                log::warn!("revision identical to its predecessor; ending the functional loop");
                record.action = IterationAction::Exhausted;
                self.iterations.push(record);
                return Ok(false);
            }
            self.iterations.push(record);
        }
        unreachable!("the last iteration always returns")
    }

    fn drive(&mut self, spec: DesignSpec, clarifier: Option<&mut dyn Clarifier>) -> Result<PipelineStatus> {
        let generation_ms = self.generate(spec, clarifier)?;
        if !self.syntax_loop(generation_ms)? {
            return Ok(PipelineStatus::SyntaxExhausted);
        }
        self.syntax_clean = true;
        if self.functional_loop()? {
            Ok(PipelineStatus::Success)
        } else {
            Ok(PipelineStatus::FunctionalExhausted)
        }
    }
}

fn write_outputs(dir: &Path, result: &PipelineResult) -> Result<()> {
    for artifact in [&result.final_rtl, &result.final_testbench].into_iter().flatten() {
        let path = dir.join(artifact.file_name());
        std::fs::write(&path, artifact.text()).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(RESULT_FILE);
    std::fs::write(&path, serde_json::to_vec_pretty(result)?).map_err(|e| Error::io(&path, e))
}

/// Runs the whole pipeline for one request.
///
/// LLM and toolchain failures end the run with the matching status and
/// whatever artifacts exist; only an invalid configuration or an unusable
/// workspace is returned as an error.
pub fn run_pipeline(
    spec: DesignSpec,
    config: &RunConfig,
    gateway: LlmGateway,
    clarifier: Option<&mut dyn Clarifier>,
) -> Result<PipelineResult> {
    config.validate()?;
    if spec.language() != config.language {
        return Err(Error::Validation(format!(
            "request is {}, run is configured for {}",
            spec.language(),
            config.language
        )));
    }
    let logs = config.workdir.join(LOG_DIR);
    std::fs::create_dir_all(&logs).map_err(|e| Error::io(&logs, e))?;

    let review = ReviewAgent::new(config.profile.clone(), config.rules.clone(), config.prompts.clone());
    let mut run = Run {
        config,
        code: CodeAgent::new(gateway, config.generation.clone(), config.prompts.clone(), config.interactive),
        verifier: VerificationAgent::new(review.clone()),
        review,
        rtl: RevisionHistory::new(ArtifactKind::Rtl, config.language),
        tb: RevisionHistory::new(ArtifactKind::Testbench, config.language),
        iterations: Vec::new(),
        feedback: HashMap::new(),
        compiled_clean: HashSet::new(),
        pinned: None,
        syntax_clean: false,
    };

    let (status, failure) = match run.drive(spec, clarifier) {
        Ok(status) => (status, None),
        Err(e) => match failure_status(&e) {
            Some(status) => {
                log::error!("run failed: {e}");
                (status, Some(e.to_string()))
            }
            None => return Err(e),
        },
    };

    let (final_rtl, final_tb) = match status {
        PipelineStatus::Success => (run.rtl.latest().cloned(), run.tb.latest().cloned()),
        PipelineStatus::SyntaxExhausted => (run.rtl.best().cloned(), run.tb.best().cloned()),
        PipelineStatus::FunctionalExhausted => (run.rtl.best().cloned(), run.tb.latest().cloned()),
        _ => (run.rtl.latest().cloned(), run.tb.latest().cloned()),
    };
    let syntax_clean = match (&final_rtl, status) {
        (_, PipelineStatus::SyntaxExhausted) => false,
        (Some(rtl), _) => run.syntax_clean && run.compiled_clean.contains(&rtl.revision_id()),
        (None, _) => false,
    };
    let mut result = PipelineResult::new(status, final_rtl, final_tb, std::mem::take(&mut run.iterations))?;
    result.syntax_clean = syntax_clean;
    result.pinned_testbench_hash = run.pinned.take();
    result.failure = failure;
    result.check_ledger()?;
    write_outputs(&config.workdir, &result)?;
    Ok(result)
}
