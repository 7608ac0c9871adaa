// SPDX-License-Identifier: Apache-2.0

//! Turns raw tool logs into structured reports.
//!
//! Parsing is driven by a [`ParseRuleSet`]: an ordered list of regular
//! expressions with named groups `file`, `line`, `message` (and optionally
//! `code`), each tagged with a severity. The first pattern that matches a
//! line wins. Simulation output is read against the testbench protocol:
//! `TESTCASE <id> PASS|FAIL: <message>` per case, then `ALL TESTS PASSED`.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArtifactKind, Diagnostic, Severity, SourceArtifact};
use crate::toolchain::RawToolLog;

/// Lines of output kept in reports and fallback diagnostics.
pub const TAIL_LINES: usize = 20;

pub const DEFAULT_SNIPPET_WINDOW: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub pattern: String,
    pub severity: Severity,
}

fn default_pass() -> String {
    r"TESTCASE\s+(?P<case>[A-Za-z0-9_.\-]+)\s+PASS\b:?\s*(?P<message>.*)$".into()
}

fn default_fail() -> String {
    r"TESTCASE\s+(?P<case>[A-Za-z0-9_.\-]+)\s+FAIL\b:?\s*(?P<message>.*)$".into()
}

fn default_sentinel() -> String {
    r"ALL TESTS PASSED".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationPatterns {
    #[serde(default = "default_pass")]
    pub pass_pattern: String,
    #[serde(default = "default_fail")]
    pub fail_pattern: String,
    #[serde(default = "default_sentinel")]
    pub all_pass_sentinel: String,
}

impl Default for SimulationPatterns {
    fn default() -> Self {
        Self { pass_pattern: default_pass(), fail_pattern: default_fail(), all_pass_sentinel: default_sentinel() }
    }
}

/// Declarative form of a rule set, as stored in tool asset files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSetSpec {
    pub tool_name: String,
    pub error_patterns: Vec<PatternSpec>,
    #[serde(default)]
    pub simulation: SimulationPatterns,
}

/// Compiled rule set for one tool.
#[derive(Debug, Clone)]
pub struct ParseRuleSet {
    spec: RuleSetSpec,
    error_patterns: Vec<(Regex, Severity)>,
    pass: Regex,
    fail: Regex,
    sentinel: Regex,
}

fn compile_re(source: &str, what: &str) -> Result<Regex> {
    Regex::new(source).map_err(|e| Error::Config(format!("{what}: {e}")))
}

impl ParseRuleSet {
    pub fn new(spec: RuleSetSpec) -> Result<Self> {
        if spec.error_patterns.is_empty() {
            return Err(Error::Config(format!("rule set `{}` has no error patterns", spec.tool_name)));
        }
        let mut error_patterns = Vec::with_capacity(spec.error_patterns.len());
        for p in &spec.error_patterns {
            let re = compile_re(&p.pattern, &format!("rule set `{}`", spec.tool_name))?;
            if !re.capture_names().flatten().any(|n| n == "message") {
                return Err(Error::Config(format!(
                    "rule set `{}`: pattern `{}` lacks a `message` group",
                    spec.tool_name, p.pattern
                )));
            }
            error_patterns.push((re, p.severity));
        }
        let sim = &spec.simulation;
        if sim.all_pass_sentinel == sim.pass_pattern || sim.all_pass_sentinel == sim.fail_pattern {
            return Err(Error::Config(format!(
                "rule set `{}`: sentinel must differ from the per-case patterns",
                spec.tool_name
            )));
        }
        let pass = compile_re(&sim.pass_pattern, "pass_pattern")?;
        let fail = compile_re(&sim.fail_pattern, "fail_pattern")?;
        for (re, name) in [(&pass, "pass_pattern"), (&fail, "fail_pattern")] {
            if !re.capture_names().flatten().any(|n| n == "case") {
                return Err(Error::Config(format!("{name} lacks a `case` group")));
            }
        }
        let sentinel = compile_re(&sim.all_pass_sentinel, "all_pass_sentinel")?;
        Ok(Self { spec, error_patterns, pass, fail, sentinel })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: RuleSetSpec = toml::from_str(text).map_err(|e| Error::Config(format!("rule set: {e}")))?;
        Self::new(spec)
    }

    /// Loads a rule-set file. Either a bare rule set or a tool asset with a
    /// `[rules]` table is accepted.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: toml::Value =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let table = value.get("rules").cloned().unwrap_or(value);
        let spec: RuleSetSpec = table.try_into().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::new(spec)
    }

    pub fn tool_name(&self) -> &str {
        &self.spec.tool_name
    }

    pub fn spec(&self) -> &RuleSetSpec {
        &self.spec
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileReport {
    pub diagnostics: Vec<Diagnostic>,
    pub exit_code: i32,
    pub clean: bool,
}

impl CompileReport {
    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.is_error())
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    /// Error diagnostics attributed to one artifact. Errors that name no
    /// generated file are charged to the RTL.
    pub fn errors_for(&self, kind: ArtifactKind) -> impl Iterator<Item = &Diagnostic> {
        self.errors().filter(move |d| d.artifact_kind().unwrap_or(ArtifactKind::Rtl) == kind)
    }

    /// Copy restricted to the errors of one artifact; warnings are dropped.
    pub fn restricted_to(&self, kind: ArtifactKind) -> CompileReport {
        let diagnostics: Vec<Diagnostic> = self.errors_for(kind).cloned().collect();
        CompileReport { clean: diagnostics.is_empty() && self.clean, exit_code: self.exit_code, diagnostics }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub case_id: String,
    pub passed: bool,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimReport {
    pub outcomes: Vec<TestOutcome>,
    pub all_passed: bool,
    pub raw_tail: String,
    pub timed_out: bool,
    pub exit_code: i32,
}

impl SimReport {
    pub fn failures(&self) -> impl Iterator<Item = &TestOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }

    pub fn failure_count(&self) -> usize {
        self.failures().count()
    }
}

fn capture<'a>(caps: &regex::Captures<'a>, name: &str) -> Option<&'a str> {
    caps.name(name).map(|m| m.as_str()).filter(|s| !s.is_empty())
}

/// Maps every log line matching an error pattern to a [`Diagnostic`].
///
/// A failing exit without any recognised error yields one synthetic error
/// with an unknown line whose snippet is the log tail, so a failing tool
/// never looks clean.
pub fn parse_compile_log(raw: &RawToolLog, rules: &ParseRuleSet) -> CompileReport {
    let mut diagnostics: Vec<Diagnostic> = Vec::new();
    for line in raw.lines() {
        let line = line.trim_end();
        let Some((caps, severity)) =
            rules.error_patterns.iter().find_map(|(re, sev)| re.captures(line).map(|c| (c, *sev)))
        else {
            continue;
        };
        let diag = Diagnostic {
            file: capture(&caps, "file").unwrap_or_default().to_string(),
            line: capture(&caps, "line").and_then(|l| l.parse().ok()).filter(|&l| l > 0),
            severity,
            tool_code: capture(&caps, "code").map(str::to_string),
            message: capture(&caps, "message").unwrap_or(line).trim().to_string(),
            snippet: None,
        };
        if !diagnostics.contains(&diag) {
            diagnostics.push(diag);
        }
    }

    let failed = raw.exit_code != 0 || raw.timed_out;
    if failed && !diagnostics.iter().any(Diagnostic::is_error) {
        let message = if raw.timed_out {
            format!("{} timed out without reporting an error", rules.tool_name())
        } else {
            format!("{} exited with code {} without a recognizable error message", rules.tool_name(), raw.exit_code)
        };
        diagnostics.push(Diagnostic {
            file: String::new(),
            line: None,
            severity: Severity::Error,
            tool_code: None,
            message,
            snippet: Some(raw.tail(TAIL_LINES)),
        });
    }
    let clean = !failed && !diagnostics.iter().any(Diagnostic::is_error);
    CompileReport { diagnostics, exit_code: raw.exit_code, clean }
}

/// Reads per-case results and the all-pass sentinel from simulator output.
/// A case reported more than once fails if any report says FAIL.
pub fn parse_sim_log(raw: &RawToolLog, rules: &ParseRuleSet) -> SimReport {
    let mut outcomes: Vec<TestOutcome> = Vec::new();
    let mut sentinel_seen = false;
    for line in raw.lines() {
        let line = line.trim_end();
        let hit =
            rules.fail.captures(line).map(|c| (c, false)).or_else(|| rules.pass.captures(line).map(|c| (c, true)));
        if let Some((caps, passed)) = hit {
            let case_id = caps["case"].to_string();
            let message = capture(&caps, "message").unwrap_or_default().trim().to_string();
            match outcomes.iter_mut().find(|o| o.case_id == case_id) {
                Some(existing) if existing.passed && !passed => {
                    existing.passed = false;
                    existing.message = message;
                }
                Some(_) => {}
                None => outcomes.push(TestOutcome { case_id, passed, message }),
            }
        } else if rules.sentinel.is_match(line) {
            sentinel_seen = true;
        }
    }
    let all_passed = sentinel_seen && outcomes.iter().all(|o| o.passed) && !raw.timed_out;
    SimReport {
        outcomes,
        all_passed,
        raw_tail: raw.tail(TAIL_LINES),
        timed_out: raw.timed_out,
        exit_code: raw.exit_code,
    }
}

/// Numbered excerpt of `source` around `line` (1-based), `window` lines
/// each side, with the offending line marked `>`. A line past the end
/// yields the last `window + 1` lines and a note.
pub fn extract_snippet(source: &SourceArtifact, line: u32, window: usize) -> Result<String> {
    if line == 0 {
        return Err(Error::Validation("snippet line numbers start at 1".into()));
    }
    let lines: Vec<&str> = source.text().lines().collect();
    let total = lines.len();
    let line = line as usize;
    let (start, end, marked, note) = if line > total {
        let start = total.saturating_sub(window).max(1);
        (start, total, None, Some(format!("(line {line} is past the end of the file, which has {total} lines)")))
    } else {
        (line.saturating_sub(window).max(1), (line + window).min(total), Some(line), None)
    };
    let width = end.max(1).to_string().len();
    let mut out: Vec<String> = Vec::new();
    if total > 0 {
        for n in start..=end {
            let mark = if Some(n) == marked { '>' } else { ' ' };
            out.push(format!("{mark} {n:>width$} | {}", lines[n - 1]));
        }
    }
    out.extend(note);
    Ok(out.join("\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HdlLanguage, RevisionHistory};
    use crate::toolchain::builtin_rules;
    use proptest::prelude::*;

    fn log(stdout: &str, stderr: &str, exit_code: i32) -> RawToolLog {
        RawToolLog { stdout: stdout.into(), stderr: stderr.into(), exit_code, duration_ms: 0, timed_out: false }
    }

    fn iverilog() -> ParseRuleSet {
        builtin_rules("iverilog").unwrap()
    }

    fn numbered_file(n: usize) -> SourceArtifact {
        let mut h = RevisionHistory::new(ArtifactKind::Rtl, HdlLanguage::Verilog);
        let text: Vec<String> = (1..=n).map(|i| format!("line{i}")).collect();
        h.append_revision(text.join("\n")).unwrap()
    }

    #[test]
    fn syntax_error_line_is_extracted() {
        let r = parse_compile_log(&log("", "tb.v:7: syntax error\n", 1), &iverilog());
        assert!(!r.clean);
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.diagnostics[0].line, Some(7));
        assert_eq!(r.diagnostics[0].file, "tb.v");
        assert_eq!(r.diagnostics[0].severity, Severity::Error);
    }

    #[test]
    fn empty_clean_log() {
        let r = parse_compile_log(&log("", "", 0), &iverilog());
        assert!(r.clean);
        assert!(r.diagnostics.is_empty());
    }

    #[test]
    fn unparseable_failure_gets_synthetic_diagnostic() {
        let r = parse_compile_log(&log("", "something odd happened\n", 2), &iverilog());
        assert!(!r.clean);
        assert_eq!(r.diagnostics.len(), 1);
        assert_eq!(r.diagnostics[0].line, None);
        assert!(r.diagnostics[0].snippet.as_deref().unwrap().contains("something odd"));
    }

    #[test]
    fn warnings_do_not_dirty_a_clean_exit() {
        let r = parse_compile_log(&log("", "rtl.v:3: warning: implicit wire\n", 0), &iverilog());
        assert!(r.clean);
        assert_eq!(r.diagnostics[0].severity, Severity::Warning);
    }

    #[test]
    fn errors_split_by_artifact() {
        let r = parse_compile_log(
            &log("", "rtl.v:2: syntax error\ntb.v:9: syntax error\nmystery failure: x\n", 1),
            &iverilog(),
        );
        assert_eq!(r.errors_for(ArtifactKind::Rtl).count(), 1);
        assert_eq!(r.errors_for(ArtifactKind::Testbench).count(), 1);
        assert!(!r.restricted_to(ArtifactKind::Testbench).clean);
    }

    #[test]
    fn failing_case_message_is_kept() {
        let raw = log("TESTCASE 1 PASS: ok\nTESTCASE 2 FAIL: shift_ena should be 0 after 4 clock cycles\n", "", 0);
        let r = parse_sim_log(&raw, &iverilog());
        assert_eq!(r.outcomes.len(), 2);
        assert!(!r.all_passed);
        assert_eq!(r.outcomes[1].message, "shift_ena should be 0 after 4 clock cycles");
    }

    #[test]
    fn sentinel_with_only_passes() {
        let raw = log("TESTCASE 1 PASS: a\nTESTCASE 2 PASS: b\nALL TESTS PASSED\n", "", 0);
        assert!(parse_sim_log(&raw, &iverilog()).all_passed);
    }

    #[test]
    fn missing_sentinel_is_not_a_pass() {
        let raw = log("TESTCASE 1 PASS: a\n", "", 0);
        assert!(!parse_sim_log(&raw, &iverilog()).all_passed);
    }

    #[test]
    fn timeout_dominates() {
        let mut raw = log("TESTCASE 1 PASS: a\nALL TESTS PASSED\n", "", 124);
        raw.timed_out = true;
        let r = parse_sim_log(&raw, &iverilog());
        assert!(!r.all_passed);
        assert!(r.timed_out);
    }

    #[test]
    fn vhdl_report_prefix_is_tolerated() {
        let raw = log("", "tb.vhd:45:9:@40ns:(report note): TESTCASE 1 FAIL: q should be 3\n", 0);
        let r = parse_sim_log(&raw, &builtin_rules("ghdl").unwrap());
        assert_eq!(r.outcomes[0].case_id, "1");
        assert!(!r.outcomes[0].passed);
    }

    #[test]
    fn repeated_case_fails_if_any_report_fails() {
        let raw = log("TESTCASE 3 PASS: a\nTESTCASE 3 FAIL: b\nALL TESTS PASSED\n", "", 0);
        let r = parse_sim_log(&raw, &iverilog());
        assert_eq!(r.outcomes.len(), 1);
        assert!(!r.all_passed);
    }

    #[test]
    fn snippet_interior_window() {
        let s = extract_snippet(&numbered_file(10), 5, 2).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].contains("line3"));
        assert!(lines[2].starts_with('>') && lines[2].contains("line5"));
        assert!(lines[4].contains("line7"));
    }

    #[test]
    fn snippet_clamps_at_start() {
        let s = extract_snippet(&numbered_file(10), 1, 2).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with('>'));
        assert!(lines[2].contains("line3"));
    }

    #[test]
    fn snippet_clamps_past_end() {
        let s = extract_snippet(&numbered_file(10), 99, 2).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].contains("line8"));
        assert!(lines[2].contains("line10"));
        assert!(lines[3].contains("past the end"));
        assert!(!s.contains('>'));
    }

    #[test]
    fn snippet_rejects_line_zero() {
        assert!(extract_snippet(&numbered_file(3), 0, 2).is_err());
    }

    #[test]
    fn rule_set_needs_patterns() {
        let err = ParseRuleSet::from_toml("tool_name = \"x\"\nerror_patterns = []\n");
        assert!(err.is_err());
        let err = ParseRuleSet::from_toml(
            "tool_name = \"x\"\n[[error_patterns]]\npattern = '(?P<line>\\d+)'\nseverity = \"error\"\n",
        );
        assert!(err.is_err(), "message group is mandatory");
    }

    fn arb_log() -> impl Strategy<Value = RawToolLog> {
        let line = prop_oneof![
            (1u32..200).prop_map(|n| format!("rtl.v:{n}: syntax error")),
            (1u32..200).prop_map(|n| format!("tb.v:{n}: warning: unused")),
            (1u32..9).prop_map(|n| format!("TESTCASE {n} PASS: ok")),
            (1u32..9).prop_map(|n| format!("TESTCASE {n} FAIL: bad")),
            Just("ALL TESTS PASSED".to_string()),
            "[a-z ]{0,20}",
        ];
        (proptest::collection::vec(line, 0..12), prop_oneof![Just(0), Just(1), Just(2)], any::<bool>()).prop_map(
            |(lines, exit_code, timed_out)| RawToolLog {
                stdout: lines.join("\n"),
                stderr: String::new(),
                exit_code: if timed_out { 124 } else { exit_code },
                duration_ms: 0,
                timed_out,
            },
        )
    }

    proptest! {
        #[test]
        fn compile_clean_biconditional(raw in arb_log()) {
            let r = parse_compile_log(&raw, &iverilog());
            let errors = r.diagnostics.iter().filter(|d| d.is_error()).count();
            prop_assert_eq!(r.clean, r.exit_code == 0 && errors == 0);
            prop_assert_eq!(serde_json::to_string(&r).unwrap(), serde_json::to_string(&parse_compile_log(&raw, &iverilog())).unwrap());
        }

        #[test]
        fn sim_all_passed_biconditional(raw in arb_log()) {
            let r = parse_sim_log(&raw, &iverilog());
            let sentinel = raw.stdout.lines().any(|l| l.contains("ALL TESTS PASSED"));
            prop_assert_eq!(r.all_passed, sentinel && r.failure_count() == 0 && !raw.timed_out);
            let mut ids: Vec<&str> = r.outcomes.iter().map(|o| o.case_id.as_str()).collect();
            ids.sort();
            let n = ids.len();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
        }
    }
}
