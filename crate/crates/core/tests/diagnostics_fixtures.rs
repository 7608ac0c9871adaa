// SPDX-License-Identifier: Apache-2.0

mod common;

use common::corpus::check_corpus;

#[test]
fn every_fixture_log_parses_to_its_manifest_entry() {
    let stats = check_corpus().unwrap();
    assert!(stats.verilog_compile >= 5, "{stats:?}");
    assert!(stats.vhdl_compile >= 3, "{stats:?}");
    assert!(stats.sim >= 2, "{stats:?}");
    assert!(stats.verilog_compile + stats.vhdl_compile + stats.sim >= 10);
}
