// SPDX-License-Identifier: Apache-2.0

//! Shared helpers: stub-toolchain run configs and scripted HDL snippets.
//! The stub toolchain reads `SYNTAX_ERROR`, `SIM: ` and `SIM_HANG` markers.

#![allow(dead_code)]

pub mod corpus;
pub mod real;

use std::path::Path;
use std::sync::Arc;

use hdlrefine::llm::{GenerationConfig, LlmGateway, MockBackend, MockTurn, RetryPolicy};
use hdlrefine::model::HdlLanguage;
use hdlrefine::orchestrator::RunConfig;
use hdlrefine::prompts::PromptSet;
use hdlrefine::toolchain::stub;

pub fn stub_config(root: &Path, language: HdlLanguage, syntax: u32, functional: u32) -> RunConfig {
    RunConfig {
        language,
        max_syntax_iters: syntax,
        max_functional_iters: functional,
        interactive: false,
        generation: GenerationConfig::default(),
        profile: stub::install(&root.join("tools"), language).unwrap(),
        rules: stub::rules(),
        prompts: PromptSet::builtin(),
        workdir: root.join("run"),
    }
}

pub fn gateway(turns: Vec<MockTurn>) -> (Arc<MockBackend>, LlmGateway) {
    let mock = Arc::new(MockBackend::new(turns));
    (mock.clone(), LlmGateway::new(mock, RetryPolicy::no_delay(3)))
}

pub fn fenced(code: &str) -> MockTurn {
    MockTurn::reply(format!("Here you go:\n```verilog\n{code}```\n"))
}

/// A testbench that always reports the all-pass sentinel; failures come
/// from the RTL's `SIM:` lines and dominate it.
pub const TB: &str = "module tb;\n  top_module dut();\n// SIM: ALL TESTS PASSED\nendmodule\n";

pub const RTL_CASE2_FAILS: &str = "module top_module;\n\
// SIM: TESTCASE 1 PASS: reset asserts shift_ena\n\
// SIM: TESTCASE 2 FAIL: shift_ena should be 0 after 4 clock cycles\n\
endmodule\n";

pub const RTL_PASSES: &str = "module top_module;\n\
  reg [2:0] count;\n\
// SIM: TESTCASE 1 PASS: reset asserts shift_ena\n\
// SIM: TESTCASE 2 PASS: shift_ena deasserted after 4 cycles\n\
endmodule\n";

/// RTL with `errors` syntax errors, made unique by `tag`.
pub fn broken_rtl(errors: usize, tag: &str) -> String {
    let mut s = format!("module top_module; // {tag}\n");
    for i in 0..errors {
        s.push_str(&format!("  wire w{i} // SYNTAX_ERROR\n"));
    }
    s.push_str("endmodule\n");
    s
}

/// RTL that compiles but fails `failures` of 3 cases, made unique by `tag`.
pub fn failing_rtl(failures: usize, tag: &str) -> String {
    let mut s = format!("module top_module; // {tag}\n");
    for i in 1..=3 {
        let verdict = if i <= failures { "FAIL: wrong output" } else { "PASS: ok" };
        s.push_str(&format!("// SIM: TESTCASE {i} {verdict}\n"));
    }
    s.push_str("endmodule\n");
    s
}
