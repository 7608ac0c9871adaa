// SPDX-License-Identifier: Apache-2.0

//! Uniform adapter over external HDL compilers and simulators.
//!
//! A [`ToolProfile`] holds two command templates. They are split into an
//! argument vector (shell-style quoting, but no shell) and the placeholders
//! `{sources}`, `{workdir}` and `{top}` are expanded per argument; a bare
//! `{sources}` argument expands to one argument per source file.

mod catalog;
mod process;
pub mod stub;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArtifactKind, HdlLanguage, RevisionHistory, SourceArtifact};
use crate::prompts::render;

pub use catalog::{builtin_profile, builtin_rules, builtin_tool_names, default_profile_for};

/// Exit code reported for a process killed at its timeout.
pub const TIMEOUT_EXIT_CODE: i32 = 124;

const MANIFEST: &str = "hdlrefine-sources.json";

fn default_compile_timeout() -> u64 {
    60
}

fn default_simulate_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolProfile {
    pub name: String,
    pub language: HdlLanguage,
    pub compile_template: String,
    pub simulate_template: String,
    #[serde(default = "default_compile_timeout")]
    pub compile_timeout_secs: u64,
    #[serde(default = "default_simulate_timeout")]
    pub simulate_timeout_secs: u64,
}

impl ToolProfile {
    pub fn validate(&self) -> Result<()> {
        if !self.compile_template.contains("{sources}") {
            return Err(Error::Config(format!("profile `{}`: compile_template must reference {{sources}}", self.name)));
        }
        if !["{sources}", "{workdir}", "{top}"].iter().any(|p| self.simulate_template.contains(p)) {
            return Err(Error::Config(format!(
                "profile `{}`: simulate_template must reference {{sources}}, {{workdir}} or {{top}}",
                self.name
            )));
        }
        if self.compile_timeout_secs == 0 || self.simulate_timeout_secs == 0 {
            return Err(Error::Config(format!("profile `{}`: timeouts must be positive", self.name)));
        }
        for t in [&self.compile_template, &self.simulate_template] {
            let argv = shell_words::split(t)
                .map_err(|e| Error::Config(format!("profile `{}`: bad template `{t}`: {e}", self.name)))?;
            if argv.is_empty() {
                return Err(Error::Config(format!("profile `{}`: empty command template", self.name)));
            }
        }
        Ok(())
    }

    pub fn compile_timeout(&self) -> Duration {
        Duration::from_secs(self.compile_timeout_secs)
    }

    pub fn simulate_timeout(&self) -> Duration {
        Duration::from_secs(self.simulate_timeout_secs)
    }

    /// Executables the two templates invoke, deduplicated.
    pub fn binaries(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in [&self.compile_template, &self.simulate_template] {
            if let Some(first) = shell_words::split(t).ok().and_then(|v| v.into_iter().next()) {
                // the simulate step of some flows runs a binary the compile step builds
                if first.contains('{') {
                    continue;
                }
                if !out.contains(&first) {
                    out.push(first);
                }
            }
        }
        out
    }
}

/// Everything a tool wrote while running, plus how it ended.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawToolLog {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
    pub duration_ms: u64,
    pub timed_out: bool,
}

impl RawToolLog {
    /// stdout followed by stderr, line by line.
    pub fn lines(&self) -> impl Iterator<Item = &str> {
        self.stdout.lines().chain(self.stderr.lines())
    }

    pub fn tail(&self, n: usize) -> String {
        let lines: Vec<&str> = self.lines().collect();
        lines[lines.len().saturating_sub(n)..].join("\n")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SourceManifest {
    sources: Vec<String>,
    top: String,
}

fn verilog_module_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?m)^\s*module\s+([A-Za-z_][A-Za-z0-9_$]*)").unwrap())
}

fn vhdl_entity_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?im)^\s*entity\s+([A-Za-z][A-Za-z0-9_]*)\s+is\b").unwrap())
}

/// Name of the first module (Verilog) or entity (VHDL) declared in `text`.
pub fn detect_top(text: &str, language: HdlLanguage) -> Option<String> {
    let re = match language {
        HdlLanguage::Verilog => verilog_module_re(),
        HdlLanguage::Vhdl => vhdl_entity_re(),
    };
    re.captures(text).map(|c| c[1].to_string())
}

fn expand(template: &str, sources: &[String], workdir: &Path, top: &str) -> Result<Vec<String>> {
    let tokens =
        shell_words::split(template).map_err(|e| Error::Config(format!("bad command template `{template}`: {e}")))?;
    let workdir = workdir.to_string_lossy();
    let joined = sources.join(" ");
    let vars = [("sources", joined.as_str()), ("workdir", workdir.as_ref()), ("top", top)];
    let mut argv = Vec::with_capacity(tokens.len() + sources.len());
    for token in tokens {
        if token == "{sources}" {
            argv.extend(sources.iter().cloned());
        } else {
            argv.push(render(&token, &vars));
        }
    }
    Ok(argv)
}

fn absolute(workdir: &Path) -> Result<PathBuf> {
    if !workdir.is_dir() {
        return Err(Error::Tool(format!("workdir {} does not exist", workdir.display())));
    }
    workdir.canonicalize().map_err(|e| Error::io(workdir, e))
}

/// Writes `sources` into `workdir` under their conventional names and runs
/// the profile's compile command. A timeout is reported in the log, not as
/// an error; a missing executable is a [`Error::Tool`].
pub fn compile(sources: &[SourceArtifact], profile: &ToolProfile, workdir: &Path) -> Result<RawToolLog> {
    if sources.is_empty() {
        return Err(Error::Validation("nothing to compile".into()));
    }
    if let Some(bad) = sources.iter().find(|s| s.language() != profile.language) {
        return Err(Error::Validation(format!(
            "{} {} source given to {} profile `{}`",
            bad.language(),
            bad.kind(),
            profile.language,
            profile.name
        )));
    }
    let mut ordered: Vec<&SourceArtifact> = sources.iter().collect();
    // designs first so that VHDL analysis sees entities before their users
    ordered.sort_by_key(|s| s.kind() == ArtifactKind::Testbench);
    let mut names: Vec<String> = Vec::new();
    for s in &ordered {
        let name = s.file_name();
        if names.contains(&name) {
            return Err(Error::Validation(format!("two sources map to `{name}`")));
        }
        names.push(name);
    }

    let workdir = absolute(workdir)?;
    for (s, name) in ordered.iter().zip(&names) {
        let path = workdir.join(name);
        let mut text = s.text().to_string();
        if !text.ends_with('\n') {
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }

    let top_source = ordered
        .iter()
        .rev()
        .find(|s| s.kind() == ArtifactKind::Testbench)
        .or(ordered.first())
        .expect("sources is non-empty");
    let top = detect_top(top_source.text(), profile.language).unwrap_or_else(|| "tb".into());
    let manifest = SourceManifest { sources: names, top };
    let manifest_path = workdir.join(MANIFEST);
    std::fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&manifest_path, e))?;

    let argv = expand(&profile.compile_template, &manifest.sources, &workdir, &manifest.top)?;
    log::debug!("compile: {argv:?}");
    process::run_with_timeout(&argv, &workdir, profile.compile_timeout())
}

/// Runs the profile's simulate command in a workdir prepared by [`compile`].
pub fn simulate(profile: &ToolProfile, workdir: &Path) -> Result<RawToolLog> {
    let workdir = absolute(workdir)?;
    let manifest_path = workdir.join(MANIFEST);
    let manifest: SourceManifest = match std::fs::read(&manifest_path) {
        Ok(bytes) => serde_json::from_slice(&bytes)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::Validation(format!("{} has not been compiled into", workdir.display())))
        }
        Err(e) => return Err(Error::io(&manifest_path, e)),
    };
    let argv = expand(&profile.simulate_template, &manifest.sources, &workdir, &manifest.top)?;
    log::debug!("simulate: {argv:?}");
    process::run_with_timeout(&argv, &workdir, profile.simulate_timeout())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Availability {
    Available,
    Missing { command: String },
    ProbeFailed { detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoctorEntry {
    pub profile: String,
    pub language: HdlLanguage,
    #[serde(flatten)]
    pub availability: Availability,
}

fn probe_sources(language: HdlLanguage) -> Vec<SourceArtifact> {
    let (rtl, tb) = match language {
        HdlLanguage::Verilog => (
            "module probe(input a, output y);\n  assign y = a;\nendmodule\n",
            "module probe_tb;\n  reg a = 0;\n  wire y;\n  probe dut(.a(a), .y(y));\n  initial $finish;\nendmodule\n",
        ),
        HdlLanguage::Vhdl => (
            "library ieee;\nuse ieee.std_logic_1164.all;\nentity probe is\n  port (a : in std_logic; y : out std_logic);\nend entity;\narchitecture rtl of probe is\nbegin\n  y <= a;\nend architecture;\n",
            "library ieee;\nuse ieee.std_logic_1164.all;\nentity probe_tb is\nend entity;\narchitecture sim of probe_tb is\n  signal a, y : std_logic := '0';\nbegin\n  dut : entity work.probe port map (a => a, y => y);\nend architecture;\n",
        ),
    };
    let mut r = RevisionHistory::new(ArtifactKind::Rtl, language);
    let mut t = RevisionHistory::new(ArtifactKind::Testbench, language);
    vec![r.append_revision(rtl).unwrap(), t.append_revision(tb).unwrap()]
}

fn probe(profile: &ToolProfile) -> Availability {
    let dir = std::env::temp_dir().join(format!("hdlrefine-probe-{}", uuid::Uuid::new_v4().simple()));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return Availability::ProbeFailed { detail: format!("cannot create probe dir: {e}") };
    }
    let outcome = match compile(&probe_sources(profile.language), profile, &dir) {
        Ok(log) if log.exit_code == 0 => Availability::Available,
        Ok(log) => Availability::ProbeFailed {
            detail: format!("probe compile exited with {}: {}", log.exit_code, log.tail(5)),
        },
        Err(e) => Availability::ProbeFailed { detail: e.to_string() },
    };
    let _ = std::fs::remove_dir_all(&dir);
    outcome
}

/// Checks that every profile's executables resolve and that a trivial design
/// compiles. Never fails; problems are reported per entry.
pub fn doctor(profiles: &[ToolProfile]) -> Vec<DoctorEntry> {
    profiles
        .iter()
        .map(|p| {
            let availability = match p.validate() {
                Err(e) => Availability::ProbeFailed { detail: e.to_string() },
                Ok(()) => match p.binaries().into_iter().find(|b| which::which(b).is_err()) {
                    Some(bin) => Availability::Missing { command: bin },
                    None => probe(p),
                },
            };
            DoctorEntry { profile: p.name.clone(), language: p.language, availability }
        })
        .collect()
}
