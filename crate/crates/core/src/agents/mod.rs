// SPDX-License-Identifier: Apache-2.0

//! The three roles of a run: the code agent writes HDL, the review agent
//! checks that it compiles, the verification agent checks that it passes
//! its testbench.

pub mod code;
pub mod review;
pub mod verification;

pub use code::{ClarificationOutcome, CodeAgent, Generation, Verdict};
pub use review::{build_syntax_corrective_prompt, hint_for, ReviewAgent, SyntaxVerdict, MAX_RENDERED_ERRORS};
pub use verification::{build_functional_corrective_prompt, FunctionalVerdict, ToolLogs, VerificationAgent};
