// SPDX-License-Identifier: Apache-2.0

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use hdlrefine_ffi::*;

fn last_error() -> Option<String> {
    let p = hdlr_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

unsafe fn take(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    hdlr_string_free(p);
    s
}

#[test]
fn pass_at_k_and_errors() {
    let mut v = 0.0;
    assert_eq!(unsafe { hdlr_pass_at_k(10, 3, 1, &mut v) }, HdlrStatus::Ok);
    assert_eq!(v, 0.3);
    assert_eq!(last_error(), None);
    assert_eq!(unsafe { hdlr_pass_at_k(10, 3, 11, &mut v) }, HdlrStatus::InvalidArgument);
    assert!(last_error().unwrap().contains('k'));
    assert_eq!(unsafe { hdlr_pass_at_k(1, 1, 1, ptr::null_mut()) }, HdlrStatus::NullPointer);
    // a later success clears the message
    assert_eq!(unsafe { hdlr_pass_at_k(1, 1, 1, &mut v) }, HdlrStatus::Ok);
    assert_eq!(last_error(), None);
}

#[test]
fn last_error_is_per_thread() {
    let mut v = 0.0;
    assert_eq!(unsafe { hdlr_pass_at_k(1, 2, 1, &mut v) }, HdlrStatus::InvalidArgument);
    let other = std::thread::spawn(last_error).join().unwrap();
    assert_eq!(other, None);
    assert!(last_error().is_some());
}

#[test]
fn delta_f_reports_applicability() {
    let (mut v, mut ok) = (0.0, false);
    assert_eq!(unsafe { hdlr_delta_f(77.0, 60.23, &mut v, &mut ok) }, HdlrStatus::Ok);
    assert!(ok && (v - 27.84).abs() < 1e-9);
    assert_eq!(unsafe { hdlr_delta_f(120.0, 1.0, &mut v, &mut ok) }, HdlrStatus::InvalidArgument);
}

#[test]
fn rule_sets_parse_logs() {
    let mut rules = ptr::null_mut();
    let name = CString::new("ghdl").unwrap();
    assert_eq!(unsafe { hdlr_rule_set_builtin(name.as_ptr(), &mut rules) }, HdlrStatus::Ok);
    let stderr = CString::new("rtl.vhd:14:5:error: ';' is expected instead of 'end'\n").unwrap();
    let empty = CString::new("").unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { hdlr_parse_compile_log(rules, empty.as_ptr(), stderr.as_ptr(), 1, &mut out) };
    assert_eq!(status, HdlrStatus::Ok);
    let report: serde_json::Value = serde_json::from_str(&unsafe { take(out) }).unwrap();
    assert_eq!(report["clean"], false);
    assert_eq!(report["diagnostics"][0]["line"], 14);

    let sim = CString::new("TESTCASE 1 PASS: a\nTESTCASE 2 FAIL: b\n").unwrap();
    let status = unsafe { hdlr_parse_sim_log(rules, sim.as_ptr(), empty.as_ptr(), 0, false, &mut out) };
    assert_eq!(status, HdlrStatus::Ok);
    let report: serde_json::Value = serde_json::from_str(&unsafe { take(out) }).unwrap();
    assert_eq!(report["all_passed"], false);
    unsafe { hdlr_rule_set_free(rules) };

    let bogus = CString::new("no-such-tool").unwrap();
    assert_ne!(unsafe { hdlr_rule_set_builtin(bogus.as_ptr(), &mut rules) }, HdlrStatus::Ok);
    let missing = CString::new("/nonexistent/rules.toml").unwrap();
    assert_eq!(unsafe { hdlr_rule_set_load(missing.as_ptr(), &mut rules) }, HdlrStatus::Io);
    unsafe { hdlr_rule_set_free(ptr::null_mut()) };
}

#[test]
fn history_rolls_back_forward() {
    let h = hdlr_history_new(HdlrArtifactKind::Rtl, HdlrLanguage::Verilog);
    let mut best = 0;
    assert_eq!(unsafe { hdlr_history_best(h, &mut best) }, HdlrStatus::NotFound);
    let (mut a, mut b, mut c) = (0, 0, 0);
    let first = CString::new("five errors").unwrap();
    let second = CString::new("seven errors").unwrap();
    let mut is_best = false;
    unsafe {
        assert_eq!(hdlr_history_append(h, first.as_ptr(), &mut a), HdlrStatus::Ok);
        assert_eq!(hdlr_history_record_error_count(h, a, 5, &mut is_best), HdlrStatus::Ok);
        assert!(is_best);
        assert_eq!(hdlr_history_append(h, second.as_ptr(), &mut b), HdlrStatus::Ok);
        assert_eq!(hdlr_history_record_error_count(h, b, 7, &mut is_best), HdlrStatus::Ok);
        assert!(!is_best);
        assert_eq!(hdlr_history_best(h, &mut best), HdlrStatus::Ok);
        assert_eq!(hdlr_history_rollback_to(h, best, &mut c), HdlrStatus::Ok);
        assert_eq!((a, b, c), (1, 2, 3));
        let mut text = ptr::null_mut();
        assert_eq!(hdlr_history_text(h, c, &mut text), HdlrStatus::Ok);
        assert_eq!(take(text), "five errors");
        assert_eq!(hdlr_history_text(h, 9, &mut text), HdlrStatus::NotFound);
        hdlr_history_free(h);
    }
}

#[test]
fn extraction_failures_have_status() {
    let empty = CString::new("   ").unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { hdlr_extract_code_block(empty.as_ptr(), HdlrLanguage::Vhdl, &mut out) };
    assert_eq!(status, HdlrStatus::InvalidArgument);
    assert!(out.is_null());
}

#[test]
fn generate_runs_pipeline_with_mock_and_stub() {
    let dir = tempfile::tempdir().unwrap();
    let tb = "module tb;\n  top_module dut();\n// SIM: ALL TESTS PASSED\nendmodule\n";
    let rtl = "module top_module;\n// SIM: TESTCASE 1 PASS: ok\nendmodule\n";
    let script = format!(
        "[[turn]]\nreply = '''\n```verilog\n{tb}```\n'''\n\n[[turn]]\nreply = '''\n```verilog\n{rtl}```\n'''\n"
    );
    std::fs::write(dir.path().join("script.toml"), script).unwrap();
    let config = dir.path().join("hdlrefine.toml");
    std::fs::write(
        &config,
        "workdir_root = \"runs\"\n[llm]\nbackend = \"mock\"\nmock_script = \"script.toml\"\n[toolchain]\nprofile = \"stub\"\n",
    )
    .unwrap();
    let config = CString::new(config.to_str().unwrap()).unwrap();
    let prompt = CString::new("pass-through design").unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { hdlr_generate(config.as_ptr(), prompt.as_ptr(), ptr::null(), &mut out) };
    assert_eq!(status, HdlrStatus::Ok, "{:?}", last_error());
    let result: serde_json::Value = serde_json::from_str(&unsafe { take(out) }).unwrap();
    assert_eq!(result["status"], "success");
    let runs: Vec<_> = std::fs::read_dir(dir.path().join("runs")).unwrap().flatten().collect();
    assert!(runs.iter().any(|e| e.path().join("result.json").is_file()));

    let missing = CString::new(dir.path().join("nope.toml").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { hdlr_generate(missing.as_ptr(), prompt.as_ptr(), ptr::null(), &mut out) }, HdlrStatus::Io);
}

#[test]
fn committed_header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hdlrefine.h")).unwrap();
    let source = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exported: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 15);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}
