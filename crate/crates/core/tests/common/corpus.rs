// SPDX-License-Identifier: Apache-2.0

//! Checks every log in `fixtures/logs` against `fixtures/manifest.toml`.

use std::collections::BTreeSet;
use std::path::PathBuf;

use hdlrefine::diagnostics::{parse_compile_log, parse_sim_log};
use hdlrefine::toolchain::{builtin_rules, RawToolLog};
use serde::Deserialize;

#[derive(Deserialize)]
struct Manifest {
    compile: Vec<CompileEntry>,
    sim: Vec<SimEntry>,
}

#[derive(Deserialize)]
struct CompileEntry {
    file: String,
    tool: String,
    exit_code: i32,
    errors: Vec<(String, u32)>,
}

#[derive(Deserialize)]
struct SimEntry {
    file: String,
    tool: String,
    all_passed: bool,
    cases: usize,
    failed: Vec<String>,
}

#[derive(Debug, Default)]
pub struct CorpusStats {
    pub verilog_compile: usize,
    pub vhdl_compile: usize,
    pub sim: usize,
    pub expected_errors: usize,
}

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn read_log(name: &str, exit_code: i32) -> Result<RawToolLog, String> {
    let text = std::fs::read_to_string(fixtures_dir().join("logs").join(name)).map_err(|e| format!("{name}: {e}"))?;
    Ok(RawToolLog { stdout: String::new(), stderr: text, exit_code, duration_ms: 0, timed_out: false })
}

/// Returns corpus sizes, or a description of the first mismatch.
pub fn check_corpus() -> Result<CorpusStats, String> {
    let text = std::fs::read_to_string(fixtures_dir().join("manifest.toml")).map_err(|e| e.to_string())?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| e.to_string())?;
    let mut stats = CorpusStats::default();
    for entry in &manifest.compile {
        let rules = builtin_rules(&entry.tool).map_err(|e| e.to_string())?;
        let report = parse_compile_log(&read_log(&entry.file, entry.exit_code)?, &rules);
        let got: BTreeSet<(String, u32)> =
            report.errors().filter_map(|d| d.line.map(|l| (d.file.clone(), l))).collect();
        let want: BTreeSet<(String, u32)> = entry.errors.iter().cloned().collect();
        if got != want {
            return Err(format!("{}: extracted {got:?}, expected {want:?}", entry.file));
        }
        if report.clean != want.is_empty() {
            return Err(format!("{}: clean = {}, expected {}", entry.file, report.clean, want.is_empty()));
        }
        if report.errors().any(|d| d.line.is_none()) {
            return Err(format!("{}: unexpected error without a line number", entry.file));
        }
        stats.expected_errors += want.len();
        if entry.tool == "ghdl" {
            stats.vhdl_compile += 1;
        } else {
            stats.verilog_compile += 1;
        }
    }
    for entry in &manifest.sim {
        let rules = builtin_rules(&entry.tool).map_err(|e| e.to_string())?;
        let report = parse_sim_log(&read_log(&entry.file, 0)?, &rules);
        let failed: Vec<String> = report.failures().map(|o| o.case_id.clone()).collect();
        if report.all_passed != entry.all_passed || report.outcomes.len() != entry.cases || failed != entry.failed {
            return Err(format!(
                "{}: all_passed {} cases {} failed {failed:?}",
                entry.file,
                report.all_passed,
                report.outcomes.len()
            ));
        }
        stats.sim += 1;
    }
    Ok(stats)
}
