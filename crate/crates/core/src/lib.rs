// SPDX-License-Identifier: Apache-2.0

//! LLM-driven RTL generation with compiler- and simulator-guided repair.
//!
//! A run writes a self-checking testbench, then RTL, then iterates two
//! loops: a syntax loop driven by compiler diagnostics and a functional
//! loop driven by simulation results against the frozen testbench.

pub mod agents;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod llm;
pub mod model;
pub mod orchestrator;
pub mod prompts;
pub mod toolchain;

pub use error::{Error, Result};
