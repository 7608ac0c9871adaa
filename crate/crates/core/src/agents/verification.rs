// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::review::ReviewAgent;
use crate::diagnostics::{parse_sim_log, CompileReport, SimReport};
use crate::error::{Error, Result};
use crate::model::{content_hash, ArtifactKind, SourceArtifact};
use crate::prompts::{render, PromptSet};
use crate::toolchain::{self, RawToolLog};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalVerdict {
    pub all_passed: bool,
    pub report: SimReport,
    /// Absent when everything passed, or when a timed-out run left nothing
    /// to report.
    pub corrective_prompt: Option<String>,
    /// Hash of the testbench that was actually simulated.
    pub testbench_hash: String,
    /// Set when the RTL no longer compiles against the testbench; the
    /// corrective prompt is then a syntax prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub syntax_regression: Option<CompileReport>,
}

impl FunctionalVerdict {
    /// Failing test cases; a syntax regression or a silent hang counts as
    /// worse than any number of failing cases seen so far.
    pub fn score(&self, case_count_hint: usize) -> usize {
        if self.all_passed {
            0
        } else if self.syntax_regression.is_some() || (self.report.timed_out && self.report.outcomes.is_empty()) {
            case_count_hint.max(self.report.failure_count()) + 1
        } else {
            self.report.failure_count().max(1)
        }
    }
}

/// Describes the failing test cases, the tail of the simulation output and
/// the current RTL, and tells the model the testbench is authoritative.
pub fn build_functional_corrective_prompt(
    prompts: &PromptSet,
    report: &SimReport,
    rtl: &SourceArtifact,
) -> Result<String> {
    if report.all_passed {
        return Err(Error::ContractViolation("no corrective prompt for a passing simulation".into()));
    }
    let mut failures = String::new();
    for (i, f) in report.failures().enumerate() {
        let msg = if f.message.is_empty() { "(no message)" } else { &f.message };
        let _ = writeln!(failures, "{}. Test case {}: {msg}", i + 1, f.case_id);
    }
    if report.timed_out {
        failures.push_str(
            "The simulation did not finish within its time limit. The design probably hangs: look for a handshake \
             or state machine that never reaches the state the testbench waits for.\n",
        );
    } else if report.failure_count() == 0 {
        failures.push_str(
            "No test case reported FAIL, but the testbench never printed ALL TESTS PASSED. The simulation stopped \
             early or some checks never ran; look for runtime errors in the output below.\n",
        );
    }
    let tail = if report.raw_tail.trim().is_empty() { "(no output captured)" } else { report.raw_tail.trim_end() };
    Ok(render(
        &prompts.functional,
        &[("failures", failures.trim_end()), ("raw_tail", tail), ("rtl", rtl.text().trim_end())],
    ))
}

/// Raw tool output behind one verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolLogs {
    pub compile: RawToolLog,
    /// Absent when the compile failed.
    pub simulate: Option<RawToolLog>,
}

impl ToolLogs {
    pub fn duration_ms(&self) -> u64 {
        self.compile.duration_ms + self.simulate.as_ref().map_or(0, |l| l.duration_ms)
    }
}

/// Compiles and simulates RTL against the frozen testbench.
#[derive(Debug, Clone)]
pub struct VerificationAgent {
    review: ReviewAgent,
}

impl VerificationAgent {
    pub fn new(review: ReviewAgent) -> Self {
        Self { review }
    }

    /// Returns the verdict and the tool output behind it. Rejects any
    /// testbench whose hash differs from `pinned_hash`.
    pub fn verify(
        &self,
        rtl: &SourceArtifact,
        tb: &SourceArtifact,
        pinned_hash: &str,
        workdir: &Path,
    ) -> Result<(FunctionalVerdict, ToolLogs)> {
        if tb.kind() != ArtifactKind::Testbench {
            return Err(Error::Validation("verify needs a testbench artifact".into()));
        }
        if tb.content_hash() != pinned_hash || content_hash(tb.text()) != pinned_hash {
            return Err(Error::InvariantViolation(format!(
                "testbench hash {} does not match the pinned {pinned_hash}",
                tb.content_hash()
            )));
        }
        let testbench_hash = pinned_hash.to_string();
        let (syntax, compile_log) = self.review.review(rtl, tb, workdir)?;
        if !syntax.clean {
            let report = SimReport {
                outcomes: Vec::new(),
                all_passed: false,
                raw_tail: compile_log.tail(crate::diagnostics::TAIL_LINES),
                timed_out: false,
                exit_code: compile_log.exit_code,
            };
            let verdict = FunctionalVerdict {
                all_passed: false,
                report,
                corrective_prompt: syntax.corrective_prompt,
                testbench_hash,
                syntax_regression: Some(syntax.report),
            };
            return Ok((verdict, ToolLogs { compile: compile_log, simulate: None }));
        }

        let sim_log = toolchain::simulate(self.review.profile(), workdir)?;
        let report = parse_sim_log(&sim_log, self.review.rules());
        let silent_hang = report.timed_out && report.outcomes.is_empty() && report.raw_tail.trim().is_empty();
        let corrective_prompt = if report.all_passed || silent_hang {
            None
        } else {
            Some(build_functional_corrective_prompt(self.review.prompts(), &report, rtl)?)
        };
        let verdict = FunctionalVerdict {
            all_passed: report.all_passed,
            report,
            corrective_prompt,
            testbench_hash,
            syntax_regression: None,
        };
        Ok((verdict, ToolLogs { compile: compile_log, simulate: Some(sim_log) }))
    }
}
