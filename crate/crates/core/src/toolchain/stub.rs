// SPDX-License-Identifier: Apache-2.0

//! A scripted stand-in for a real compiler and simulator, driven entirely by
//! markers inside the sources. Used for offline runs and deterministic
//! end-to-end tests.
//!
//! - compile: every source line containing `SYNTAX_ERROR` is reported as
//!   `<file>:<line>: syntax error` (Icarus style) and the exit code is 1.
//! - simulate: prints whatever follows `SIM: ` on each source line, RTL
//!   first; a source containing `SIM_HANG` never finishes.

use std::path::Path;

use super::ToolProfile;
use crate::diagnostics::ParseRuleSet;
use crate::error::{Error, Result};
use crate::model::HdlLanguage;

pub const SCRIPT_NAME: &str = "hdl-stub.sh";

const SCRIPT: &str = r#"#!/bin/sh
mode=$1
shift
case "$mode" in
compile)
    status=0
    for f in "$@"; do
        for n in $(grep -n 'SYNTAX_ERROR' "$f" | cut -d: -f1); do
            echo "$f:$n: syntax error" >&2
            status=1
        done
    done
    exit $status
    ;;
simulate)
    for f in "$@"; do
        if grep -q 'SIM_HANG' "$f"; then
            while :; do sleep 1; done
        fi
    done
    for f in "$@"; do
        sed -n 's/^.*SIM: //p' "$f"
    done
    exit 0
    ;;
*)
    echo "usage: $0 compile|simulate FILE..." >&2
    exit 2
    ;;
esac
"#;

/// Writes the stub script into `dir` and returns a profile that runs it.
pub fn install(dir: &Path, language: HdlLanguage) -> Result<ToolProfile> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(SCRIPT_NAME);
    std::fs::write(&path, SCRIPT).map_err(|e| Error::io(&path, e))?;
    let abs = path.canonicalize().map_err(|e| Error::io(&path, e))?;
    let script = shell_words::quote(&abs.to_string_lossy()).into_owned();
    Ok(ToolProfile {
        name: "stub".into(),
        language,
        compile_template: format!("sh {script} compile {{sources}}"),
        simulate_template: format!("sh {script} simulate {{sources}}"),
        compile_timeout_secs: 10,
        simulate_timeout_secs: 10,
    })
}

/// The stub speaks the Icarus diagnostic format.
pub fn rules() -> ParseRuleSet {
    super::builtin_rules("iverilog").expect("builtin rules parse")
}
