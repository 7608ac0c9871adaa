// SPDX-License-Identifier: Apache-2.0

//! Prompt templates. Built-in copies are compiled in from `assets/prompts`;
//! a directory with files of the same names overrides them one by one.
//!
//! Placeholders are `{name}`. Substitution is single-pass, so braces inside
//! substituted values (Verilog concatenations, say) are left alone, and
//! unknown placeholders are kept verbatim.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::HdlLanguage;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub system: String,
    pub assess: String,
    pub testbench: String,
    pub rtl: String,
    pub revise: String,
    pub syntax_header: String,
    pub syntax_section: String,
    pub syntax_footer: String,
    pub functional: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> Self {
        Self {
            system: include_str!("../assets/prompts/system.txt").into(),
            assess: include_str!("../assets/prompts/assess.txt").into(),
            testbench: include_str!("../assets/prompts/testbench.txt").into(),
            rtl: include_str!("../assets/prompts/rtl.txt").into(),
            revise: include_str!("../assets/prompts/revise.txt").into(),
            syntax_header: include_str!("../assets/prompts/syntax_header.txt").into(),
            syntax_section: include_str!("../assets/prompts/syntax_section.txt").into(),
            syntax_footer: include_str!("../assets/prompts/syntax_footer.txt").into(),
            functional: include_str!("../assets/prompts/functional.txt").into(),
        }
    }

    /// Built-ins with any `<name>.txt` found in `dir` swapped in.
    pub fn with_overrides(dir: &Path) -> Result<Self> {
        let mut set = Self::builtin();
        let slots: [(&str, &mut String); 9] = [
            ("system", &mut set.system),
            ("assess", &mut set.assess),
            ("testbench", &mut set.testbench),
            ("rtl", &mut set.rtl),
            ("revise", &mut set.revise),
            ("syntax_header", &mut set.syntax_header),
            ("syntax_section", &mut set.syntax_section),
            ("syntax_footer", &mut set.syntax_footer),
            ("functional", &mut set.functional),
        ];
        if !dir.is_dir() {
            return Err(Error::Config(format!("prompt directory {} not found", dir.display())));
        }
        for (name, slot) in slots {
            let path = dir.join(format!("{name}.txt"));
            if path.is_file() {
                *slot = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(set)
    }
}

/// Replaces `{key}` placeholders with their values in one left-to-right pass.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let substituted = after.find('}').and_then(|end| {
            let key = &after[..end];
            vars.iter().find(|(k, _)| *k == key).map(|(_, v)| (end, *v))
        });
        match substituted {
            Some((end, value)) => {
                out.push_str(value);
                rest = &after[end + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

pub(crate) fn language_tag(language: HdlLanguage) -> &'static str {
    language.fence_tags()[0]
}
