// SPDX-License-Identifier: Apache-2.0

use serde::Deserialize;

use super::ToolProfile;
use crate::diagnostics::{ParseRuleSet, RuleSetSpec};
use crate::error::{Error, Result};
use crate::model::HdlLanguage;

const ASSETS: &[(&str, &str)] = &[
    ("iverilog", include_str!("../../assets/tools/iverilog.toml")),
    ("verilator", include_str!("../../assets/tools/verilator.toml")),
    ("ghdl", include_str!("../../assets/tools/ghdl.toml")),
    ("vivado", include_str!("../../assets/tools/vivado.toml")),
];

#[derive(Deserialize)]
struct ToolAsset {
    profile: Option<ToolProfile>,
    rules: RuleSetSpec,
}

fn asset(name: &str) -> Result<ToolAsset> {
    let (_, text) = ASSETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        Error::Config(format!("no builtin tool `{name}` (known: {})", builtin_tool_names().join(", ")))
    })?;
    toml::from_str(text).map_err(|e| Error::Config(format!("builtin tool `{name}`: {e}")))
}

pub fn builtin_tool_names() -> Vec<&'static str> {
    ASSETS.iter().map(|(n, _)| *n).collect()
}

pub fn builtin_profile(name: &str) -> Result<ToolProfile> {
    asset(name)?.profile.ok_or_else(|| Error::Config(format!("builtin tool `{name}` ships rules only, no profile")))
}

pub fn builtin_rules(name: &str) -> Result<ParseRuleSet> {
    ParseRuleSet::new(asset(name)?.rules)
}

/// The open-source toolchain used when a config names none.
pub fn default_profile_for(language: HdlLanguage) -> ToolProfile {
    let name = match language {
        HdlLanguage::Verilog => "iverilog",
        HdlLanguage::Vhdl => "ghdl",
    };
    builtin_profile(name).expect("builtin profiles parse")
}
