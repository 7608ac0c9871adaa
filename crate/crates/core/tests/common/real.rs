// SPDX-License-Identifier: Apache-2.0

//! Known-good / known-bad shift-enable sources run through whichever
//! open-source Verilog toolchain is installed.

use std::path::Path;

use hdlrefine::agents::{ReviewAgent, VerificationAgent};
use hdlrefine::diagnostics::ParseRuleSet;
use hdlrefine::model::{ArtifactKind, HdlLanguage, RevisionHistory, SourceArtifact};
use hdlrefine::prompts::PromptSet;
use hdlrefine::toolchain::{builtin_profile, builtin_rules, ToolProfile};

use super::corpus::fixtures_dir;

/// Verilator (also under the `verilator-cli` name some installs use),
/// else Icarus. `None` when neither is on the PATH.
pub fn installed_verilog_toolchain() -> Option<(ToolProfile, ParseRuleSet)> {
    for bin in ["verilator", "verilator-cli"] {
        if which::which(bin).is_ok() {
            let mut p = builtin_profile("verilator").unwrap();
            p.compile_template = p.compile_template.replacen("verilator", bin, 1);
            return Some((p, builtin_rules("verilator").unwrap()));
        }
    }
    if which::which("iverilog").is_ok() && which::which("vvp").is_ok() {
        return Some((builtin_profile("iverilog").unwrap(), builtin_rules("iverilog").unwrap()));
    }
    None
}

fn source(kind: ArtifactKind, rel: &str) -> SourceArtifact {
    let text = std::fs::read_to_string(fixtures_dir().join("shift_ena").join(rel)).unwrap();
    RevisionHistory::new(kind, HdlLanguage::Verilog).append_revision(text).unwrap()
}

/// Returns a description of the first unmet expectation.
pub fn smoke(profile: ToolProfile, rules: ParseRuleSet, work: &Path) -> Result<String, String> {
    let review = ReviewAgent::new(profile.clone(), rules, PromptSet::builtin());
    let verifier = VerificationAgent::new(review.clone());
    let tb = source(ArtifactKind::Testbench, "good/tb.v");

    let good_dir = work.join("good");
    std::fs::create_dir_all(&good_dir).unwrap();
    let good = source(ArtifactKind::Rtl, "good/rtl.v");
    let (verdict, logs) = verifier.verify(&good, &tb, tb.content_hash(), &good_dir).map_err(|e| e.to_string())?;
    if verdict.syntax_regression.is_some() {
        return Err(format!("known-good pair did not compile:\n{}", logs.compile.tail(20)));
    }
    if !verdict.all_passed {
        return Err(format!("known-good pair did not pass:\n{}", verdict.report.raw_tail));
    }

    let bad_dir = work.join("bad");
    std::fs::create_dir_all(&bad_dir).unwrap();
    let bad = source(ArtifactKind::Rtl, "bad/rtl_undeclared.v");
    let (verdict, _) = review.review(&bad, &tb, &bad_dir).map_err(|e| e.to_string())?;
    if verdict.clean {
        return Err("known-bad pair compiled clean".into());
    }
    let prompt = verdict.corrective_prompt.ok_or("dirty verdict without a corrective prompt")?;
    // the undeclared `cnt` sits on line 5 of rtl_undeclared.v
    if !prompt.contains("line 5") {
        return Err(format!("corrective prompt lacks the offending line:\n{prompt}"));
    }
    Ok(profile.name)
}
