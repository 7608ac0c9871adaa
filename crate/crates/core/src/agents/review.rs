// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{extract_snippet, parse_compile_log, CompileReport, ParseRuleSet, DEFAULT_SNIPPET_WINDOW};
use crate::error::{Error, Result};
use crate::model::{ArtifactKind, Diagnostic, SourceArtifact};
use crate::prompts::{render, PromptSet};
use crate::toolchain::{self, RawToolLog, ToolProfile};

/// Errors rendered into one corrective prompt; the rest are summarised.
pub const MAX_RENDERED_ERRORS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxVerdict {
    pub clean: bool,
    pub report: CompileReport,
    /// Present exactly when the compile was not clean.
    pub corrective_prompt: Option<String>,
}

/// Short repair advice keyed on the wording of common compiler messages.
pub fn hint_for(message: &str) -> &'static str {
    let m = message.to_ascii_lowercase();
    if m.contains("';'") || m.contains("semicolon") || m.contains("expecting ;") {
        "a statement or declaration is probably missing its terminating semicolon"
    } else if m.contains("unknown module") || m.contains("cannot find") || m.contains("not found in library") {
        "the instantiated module or entity name must match the declaration exactly"
    } else if m.contains("undeclared")
        || m.contains("unable to bind")
        || m.contains("not declared")
        || m.contains("no declaration")
    {
        "declare the identifier before use, or fix its spelling to match the declaration"
    } else if m.contains("port") {
        "check the port list: names, directions and count must match between declaration and instantiation"
    } else if m.contains("width") || m.contains("bits") {
        "make the widths on both sides of the assignment or connection agree"
    } else if m.contains("l-value") || m.contains("lvalue") || m.contains("not a valid l-value") {
        "only variables (reg/logic) may be assigned in procedural blocks; use a continuous assignment for nets"
    } else if m.contains("syntax error") || m.contains("unexpected") {
        "look at the marked line and the line before it for unbalanced begin/end, parentheses or a missing keyword"
    } else {
        "read the message carefully and correct the construct on the marked line"
    }
}

fn role_name(diag: &Diagnostic) -> String {
    match diag.artifact_kind() {
        Some(ArtifactKind::Rtl) => format!("RTL ({})", diag.file),
        Some(ArtifactKind::Testbench) => format!("testbench ({})", diag.file),
        None if diag.file.is_empty() => "toolchain output".into(),
        None => diag.file.clone(),
    }
}

fn snippet_for(diag: &Diagnostic, rtl: &SourceArtifact, tb: &SourceArtifact) -> String {
    let source = match diag.artifact_kind() {
        Some(ArtifactKind::Rtl) => Some(rtl),
        Some(ArtifactKind::Testbench) => Some(tb),
        None => None,
    };
    match (diag.line, source) {
        (Some(line), Some(src)) => {
            extract_snippet(src, line, DEFAULT_SNIPPET_WINDOW).unwrap_or_else(|_| "(source not available)".into())
        }
        _ => match &diag.snippet {
            Some(tail) if !tail.trim().is_empty() => format!("(raw tool output)\n{tail}"),
            _ => "(source not available)".into(),
        },
    }
}

/// Renders every error of `report` (up to [`MAX_RENDERED_ERRORS`]) with its
/// role, line number, message, a source excerpt and a repair hint.
pub fn build_syntax_corrective_prompt(
    prompts: &PromptSet,
    report: &CompileReport,
    rtl: &SourceArtifact,
    tb: &SourceArtifact,
) -> Result<String> {
    if report.clean {
        return Err(Error::ContractViolation("no corrective prompt for a clean compile".into()));
    }
    let errors: Vec<&Diagnostic> = report.errors().collect();
    if errors.is_empty() {
        return Err(Error::ContractViolation("failing compile report carries no errors".into()));
    }
    let mut parts = vec![prompts.syntax_header.trim_end().to_string()];
    for diag in errors.iter().take(MAX_RENDERED_ERRORS) {
        let line = diag.line.map_or_else(|| "unknown".to_string(), |l| l.to_string());
        parts.push(
            render(
                &prompts.syntax_section,
                &[
                    ("role", &role_name(diag)),
                    ("line", &line),
                    ("message", &diag.message),
                    ("snippet", &snippet_for(diag, rtl, tb)),
                    ("hint", hint_for(&diag.message)),
                ],
            )
            .trim_end()
            .to_string(),
        );
    }
    if errors.len() > MAX_RENDERED_ERRORS {
        parts.push(format!(
            "... and {} more error(s) not shown; fix the ones above first.",
            errors.len() - MAX_RENDERED_ERRORS
        ));
    }
    parts.push(prompts.syntax_footer.trim_end().to_string());
    Ok(parts.join("\n\n"))
}

/// Compiles RTL and testbench together and turns the result into a verdict.
#[derive(Debug, Clone)]
pub struct ReviewAgent {
    profile: ToolProfile,
    rules: ParseRuleSet,
    prompts: PromptSet,
}

impl ReviewAgent {
    pub fn new(profile: ToolProfile, rules: ParseRuleSet, prompts: PromptSet) -> Self {
        Self { profile, rules, prompts }
    }

    pub fn profile(&self) -> &ToolProfile {
        &self.profile
    }

    pub fn rules(&self) -> &ParseRuleSet {
        &self.rules
    }

    pub fn prompts(&self) -> &PromptSet {
        &self.prompts
    }

    pub fn review(
        &self,
        rtl: &SourceArtifact,
        tb: &SourceArtifact,
        workdir: &Path,
    ) -> Result<(SyntaxVerdict, RawToolLog)> {
        if rtl.kind() != ArtifactKind::Rtl || tb.kind() != ArtifactKind::Testbench {
            return Err(Error::Validation("review needs an RTL and a testbench artifact".into()));
        }
        if rtl.language() != tb.language() {
            return Err(Error::Validation("RTL and testbench languages differ".into()));
        }
        let log = toolchain::compile(&[rtl.clone(), tb.clone()], &self.profile, workdir)?;
        let mut report = parse_compile_log(&log, &self.rules);
        for diag in &mut report.diagnostics {
            if diag.snippet.is_none() {
                if let (Some(line), Some(kind)) = (diag.line, diag.artifact_kind()) {
                    let src = if kind == ArtifactKind::Rtl { rtl } else { tb };
                    diag.snippet = extract_snippet(src, line, DEFAULT_SNIPPET_WINDOW).ok();
                }
            }
        }
        let corrective_prompt =
            if report.clean { None } else { Some(build_syntax_corrective_prompt(&self.prompts, &report, rtl, tb)?) };
        Ok((SyntaxVerdict { clean: report.clean, report, corrective_prompt }, log))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HdlLanguage, RevisionHistory, Severity};
    use crate::toolchain::stub;

    fn pair(rtl: &str, tb: &str) -> (SourceArtifact, SourceArtifact) {
        let mut r = RevisionHistory::new(ArtifactKind::Rtl, HdlLanguage::Verilog);
        let mut t = RevisionHistory::new(ArtifactKind::Testbench, HdlLanguage::Verilog);
        (r.append_revision(rtl).unwrap(), t.append_revision(tb).unwrap())
    }

    fn error(file: &str, line: Option<u32>, message: &str) -> Diagnostic {
        Diagnostic {
            file: file.into(),
            line,
            severity: Severity::Error,
            tool_code: None,
            message: message.into(),
            snippet: None,
        }
    }

    fn dirty(diagnostics: Vec<Diagnostic>) -> CompileReport {
        CompileReport { diagnostics, exit_code: 1, clean: false }
    }

    #[test]
    fn prompt_names_line_and_marks_source() {
        let (rtl, tb) = pair("module m;\n  wire a\n  wire b;\nendmodule\n", "module tb; endmodule\n");
        let report = dirty(vec![error("rtl.v", Some(3), "syntax error")]);
        let p = build_syntax_corrective_prompt(&PromptSet::builtin(), &report, &rtl, &tb).unwrap();
        assert!(p.contains("line 3"));
        assert!(p.contains(">  3 |") || p.contains("> 3 |"));
        assert!(p.contains("wire b;"));
        assert!(p.contains("RTL (rtl.v)"));
    }

    #[test]
    fn clean_report_is_contract_violation() {
        let (rtl, tb) = pair("module m; endmodule", "module tb; endmodule");
        let clean = CompileReport { diagnostics: vec![], exit_code: 0, clean: true };
        let err = build_syntax_corrective_prompt(&PromptSet::builtin(), &clean, &rtl, &tb).unwrap_err();
        assert!(matches!(err, Error::ContractViolation(_)));
    }

    #[test]
    fn caps_rendered_errors() {
        let text: String = (1..=30).map(|i| format!("line{i}\n")).collect();
        let (rtl, tb) = pair(&text, "module tb; endmodule");
        let report = dirty((1..=30).map(|i| error("rtl.v", Some(i), "syntax error")).collect());
        let p = build_syntax_corrective_prompt(&PromptSet::builtin(), &report, &rtl, &tb).unwrap();
        assert_eq!(p.matches("Error in the").count(), MAX_RENDERED_ERRORS);
        assert!(p.contains("10 more error(s)"));
    }

    #[test]
    fn unknown_line_uses_log_tail() {
        let (rtl, tb) = pair("module m; endmodule", "module tb; endmodule");
        let mut d = error("", None, "iverilog exited with code 2");
        d.snippet = Some("internal error: out of cheese".into());
        let p = build_syntax_corrective_prompt(&PromptSet::builtin(), &dirty(vec![d]), &rtl, &tb).unwrap();
        assert!(p.contains("out of cheese"));
        assert!(p.contains("line unknown"));
    }

    #[test]
    fn hints_follow_messages() {
        assert!(hint_for("syntax error, unexpected endmodule, expecting ';'").contains("semicolon"));
        assert!(hint_for("Unknown module type: foo").contains("module"));
        assert!(hint_for("Unable to bind wire/reg/memory `q'").contains("declare"));
        assert!(hint_for("something odd").contains("marked line"));
    }

    #[test]
    fn review_with_stub() {
        let tools = tempfile::tempdir().unwrap();
        let work = tempfile::tempdir().unwrap();
        let profile = stub::install(tools.path(), HdlLanguage::Verilog).unwrap();
        let agent = ReviewAgent::new(profile, stub::rules(), PromptSet::builtin());

        let (rtl, tb) = pair("module m;\n  wire x // SYNTAX_ERROR\nendmodule\n", "module tb;\nendmodule\n");
        let (v, log) = agent.review(&rtl, &tb, work.path()).unwrap();
        assert!(!v.clean);
        assert_eq!(log.exit_code, 1);
        assert!(v.report.diagnostics[0].snippet.as_deref().unwrap().contains("SYNTAX_ERROR"));
        assert!(v.corrective_prompt.unwrap().contains("line 2"));

        let (rtl, tb) = pair("module m;\nendmodule\n", "module tb;\nendmodule\n");
        let (v, _) = agent.review(&rtl, &tb, work.path()).unwrap();
        assert!(v.clean);
        assert!(v.corrective_prompt.is_none());
    }
}
