// SPDX-License-Identifier: Apache-2.0

//! C ABI over the hdlrefine library.
//!
//! Every function returns an [`HdlrStatus`]; on failure a message is kept
//! per thread and can be read with [`hdlr_last_error`]. Strings handed out
//! by the library are NUL-terminated UTF-8 and must be released with
//! [`hdlr_string_free`]. Handles are opaque and released with their own
//! `_free` function; passing NULL to any `_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hdlrefine::config::Settings;
use hdlrefine::diagnostics::{parse_compile_log, parse_sim_log, ParseRuleSet};
use hdlrefine::eval::{self, DeltaF};
use hdlrefine::model::{ArtifactKind, DesignSpec, HdlLanguage, RevisionHistory};
use hdlrefine::orchestrator::run_pipeline;
use hdlrefine::toolchain::{self, RawToolLog};
use hdlrefine::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdlrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    Config = 5,
    Io = 6,
    Llm = 7,
    Tool = 8,
    Invariant = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdlrLanguage {
    Verilog = 0,
    Vhdl = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdlrArtifactKind {
    Rtl = 0,
    Testbench = 1,
}

impl From<HdlrLanguage> for HdlLanguage {
    fn from(l: HdlrLanguage) -> Self {
        match l {
            HdlrLanguage::Verilog => HdlLanguage::Verilog,
            HdlrLanguage::Vhdl => HdlLanguage::Vhdl,
        }
    }
}

impl From<HdlrArtifactKind> for ArtifactKind {
    fn from(k: HdlrArtifactKind) -> Self {
        match k {
            HdlrArtifactKind::Rtl => ArtifactKind::Rtl,
            HdlrArtifactKind::Testbench => ArtifactKind::Testbench,
        }
    }
}

/// Diagnostic parse rules for one tool.
pub struct HdlrRuleSet(ParseRuleSet);

/// Revision history of one artifact, with error-count bookkeeping.
pub struct HdlrHistory(RevisionHistory);

struct Failure {
    status: HdlrStatus,
    message: String,
}

impl Failure {
    fn new(status: HdlrStatus, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Validation(_) | Error::Extraction(_) | Error::ContractViolation(_) => HdlrStatus::InvalidArgument,
            Error::UnknownRevision(_) => HdlrStatus::NotFound,
            Error::Llm { .. } => HdlrStatus::Llm,
            Error::Tool(_) => HdlrStatus::Tool,
            Error::InvariantViolation(_) => HdlrStatus::Invariant,
            Error::Config(_) => HdlrStatus::Config,
            Error::Io { .. } | Error::Json(_) | Error::Csv(_) => HdlrStatus::Io,
        };
        Failure::new(status, e.to_string())
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> FfiResult) -> HdlrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HdlrStatus::Ok
        }
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            HdlrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::new(HdlrStatus::NullPointer, format!("`{name}` is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::new(HdlrStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| Failure::new(HdlrStatus::NullPointer, format!("`{name}` is NULL")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| Failure::new(HdlrStatus::NullPointer, format!("`{name}` is NULL")))
}

fn into_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(HdlrStatus::InvalidArgument, "result contains a NUL byte"))
}

fn json<T: serde::Serialize>(value: &T) -> FfiResult<*mut c_char> {
    into_c_string(serde_json::to_string(value).map_err(|e| Failure::from(Error::from(e)))?)
}

/// Message for the most recent failed call on this thread, or NULL. The
/// pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn hdlr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn hdlr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Unbiased pass@k for `c` correct samples out of `n`.
///
/// # Safety
/// `out` must be a valid pointer to a double.
#[no_mangle]
pub unsafe extern "C" fn hdlr_pass_at_k(n: u64, c: u64, k: u64, out: *mut f64) -> HdlrStatus {
    guard(|| {
        *out_arg(out, "out")? = eval::pass_at_k(n, c, k)?;
        Ok(())
    })
}

/// Relative improvement of `ours_pct` over `baseline_pct`, in percent.
/// `*out_applicable` is false when the baseline is zero.
///
/// # Safety
/// Both out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn hdlr_delta_f(
    ours_pct: f64,
    baseline_pct: f64,
    out_value: *mut f64,
    out_applicable: *mut bool,
) -> HdlrStatus {
    guard(|| {
        let value = out_arg(out_value, "out_value")?;
        let applicable = out_arg(out_applicable, "out_applicable")?;
        match eval::delta_f(ours_pct, baseline_pct)? {
            DeltaF::Value(v) => {
                *value = v;
                *applicable = true;
            }
            DeltaF::NotApplicable => {
                *value = f64::NAN;
                *applicable = false;
            }
        }
        Ok(())
    })
}

/// Loads a builtin rule set by tool name (e.g. "verilator", "ghdl").
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hdlr_rule_set_builtin(name: *const c_char, out: *mut *mut HdlrRuleSet) -> HdlrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let rules = toolchain::builtin_rules(str_arg(name, "name")?)?;
        *out = Box::into_raw(Box::new(HdlrRuleSet(rules)));
        Ok(())
    })
}

/// Loads a rule set from a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hdlr_rule_set_load(path: *const c_char, out: *mut *mut HdlrRuleSet) -> HdlrStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let rules = ParseRuleSet::load(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(HdlrRuleSet(rules)));
        Ok(())
    })
}

/// # Safety
/// `rules` must be NULL or a handle from `hdlr_rule_set_*`, freed once.
#[no_mangle]
pub unsafe extern "C" fn hdlr_rule_set_free(rules: *mut HdlrRuleSet) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

fn raw_log(stdout: &str, stderr: &str, exit_code: i32, timed_out: bool) -> RawToolLog {
    RawToolLog { stdout: stdout.into(), stderr: stderr.into(), exit_code, duration_ms: 0, timed_out }
}

/// Parses compiler output into a JSON compile report.
///
/// # Safety
/// `rules` must be a live handle; strings NUL-terminated; `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn hdlr_parse_compile_log(
    rules: *const HdlrRuleSet,
    stdout: *const c_char,
    stderr: *const c_char,
    exit_code: i32,
    out_json: *mut *mut c_char,
) -> HdlrStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        let rules = &handle(rules, "rules")?.0;
        let raw = raw_log(str_arg(stdout, "stdout")?, str_arg(stderr, "stderr")?, exit_code, false);
        *out = json(&parse_compile_log(&raw, rules))?;
        Ok(())
    })
}

/// Parses simulator output into a JSON simulation report.
///
/// # Safety
/// `rules` must be a live handle; strings NUL-terminated; `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn hdlr_parse_sim_log(
    rules: *const HdlrRuleSet,
    stdout: *const c_char,
    stderr: *const c_char,
    exit_code: i32,
    timed_out: bool,
    out_json: *mut *mut c_char,
) -> HdlrStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        let rules = &handle(rules, "rules")?.0;
        let raw = raw_log(str_arg(stdout, "stdout")?, str_arg(stderr, "stderr")?, exit_code, timed_out);
        *out = json(&parse_sim_log(&raw, rules))?;
        Ok(())
    })
}

/// Creates an empty history. Never returns NULL.
#[no_mangle]
pub extern "C" fn hdlr_history_new(kind: HdlrArtifactKind, language: HdlrLanguage) -> *mut HdlrHistory {
    Box::into_raw(Box::new(HdlrHistory(RevisionHistory::new(kind.into(), language.into()))))
}

/// # Safety
/// `history` must be NULL or a handle from `hdlr_history_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn hdlr_history_free(history: *mut HdlrHistory) {
    if !history.is_null() {
        drop(Box::from_raw(history));
    }
}

unsafe fn history_mut<'a>(p: *mut HdlrHistory) -> FfiResult<&'a mut RevisionHistory> {
    Ok(&mut out_arg(p, "history")?.0)
}

/// Appends `text` as a new revision and writes its id.
///
/// # Safety
/// `history` must be a live handle; `text` NUL-terminated; `out_revision` valid.
#[no_mangle]
pub unsafe extern "C" fn hdlr_history_append(
    history: *mut HdlrHistory,
    text: *const c_char,
    out_revision: *mut u32,
) -> HdlrStatus {
    guard(|| {
        let out = out_arg(out_revision, "out_revision")?;
        let h = history_mut(history)?;
        *out = h.append_revision(str_arg(text, "text")?)?.revision_id();
        Ok(())
    })
}

/// Records the error count of a revision; `*out_is_best` tells whether it
/// became the best revision. `out_is_best` may be NULL.
///
/// # Safety
/// `history` must be a live handle; `out_is_best` NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn hdlr_history_record_error_count(
    history: *mut HdlrHistory,
    revision: u32,
    error_count: usize,
    out_is_best: *mut bool,
) -> HdlrStatus {
    guard(|| {
        let best = history_mut(history)?.record_error_count(revision, error_count)?;
        if let Some(out) = out_is_best.as_mut() {
            *out = best;
        }
        Ok(())
    })
}

/// Copies `revision` forward as a new revision and writes the new id.
///
/// # Safety
/// `history` must be a live handle; `out_revision` valid.
#[no_mangle]
pub unsafe extern "C" fn hdlr_history_rollback_to(
    history: *mut HdlrHistory,
    revision: u32,
    out_revision: *mut u32,
) -> HdlrStatus {
    guard(|| {
        let out = out_arg(out_revision, "out_revision")?;
        *out = history_mut(history)?.rollback_to(revision)?.revision_id();
        Ok(())
    })
}

/// Writes the id of the revision with the fewest recorded errors.
/// Returns `NOT_FOUND` when no error count has been recorded yet.
///
/// # Safety
/// `history` must be a live handle; `out_revision` valid.
#[no_mangle]
pub unsafe extern "C" fn hdlr_history_best(history: *const HdlrHistory, out_revision: *mut u32) -> HdlrStatus {
    guard(|| {
        let out = out_arg(out_revision, "out_revision")?;
        *out = handle(history, "history")?
            .0
            .best_revision()
            .ok_or_else(|| Failure::new(HdlrStatus::NotFound, "no error count recorded yet"))?;
        Ok(())
    })
}

/// Copies the text of `revision` into a new string.
///
/// # Safety
/// `history` must be a live handle; `out_text` valid.
#[no_mangle]
pub unsafe extern "C" fn hdlr_history_text(
    history: *const HdlrHistory,
    revision: u32,
    out_text: *mut *mut c_char,
) -> HdlrStatus {
    guard(|| {
        let out = out_arg(out_text, "out_text")?;
        let text = handle(history, "history")?.0.get(revision)?.text().to_string();
        *out = into_c_string(text)?;
        Ok(())
    })
}

/// Pulls the HDL source out of an LLM reply.
///
/// # Safety
/// `completion` must be NUL-terminated; `out_code` valid.
#[no_mangle]
pub unsafe extern "C" fn hdlr_extract_code_block(
    completion: *const c_char,
    language: HdlrLanguage,
    out_code: *mut *mut c_char,
) -> HdlrStatus {
    guard(|| {
        let out = out_arg(out_code, "out_code")?;
        let code = hdlrefine::llm::extract_code_block(str_arg(completion, "completion")?, language.into())?;
        *out = into_c_string(code)?;
        Ok(())
    })
}

/// Runs the full pipeline for `prompt` with the settings in `config_path`
/// and writes the run result as JSON. `workdir` may be NULL to use a fresh
/// directory under the configured workdir root. A run that ends without
/// success (exhausted budget, tool or LLM failure) still returns `OK`; the
/// outcome is in the JSON `status` field.
///
/// # Safety
/// Strings must be NUL-terminated (`workdir` may be NULL); `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn hdlr_generate(
    config_path: *const c_char,
    prompt: *const c_char,
    workdir: *const c_char,
    out_json: *mut *mut c_char,
) -> HdlrStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        let mut settings = Settings::load(Path::new(str_arg(config_path, "config_path")?))?;
        // there is no terminal to ask clarifying questions on
        settings.file.interactive = false;
        let workdir = if workdir.is_null() { settings.new_run_dir() } else { str_arg(workdir, "workdir")?.into() };
        let config = settings.run_config(workdir)?;
        let spec = DesignSpec::new(str_arg(prompt, "prompt")?, config.language)?;
        let result = run_pipeline(spec, &config, settings.gateway(None)?, None)?;
        *out = json(&result)?;
        Ok(())
    })
}
