// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};
use crate::model::HdlLanguage;

struct Fence<'a> {
    tag: String,
    body: Vec<&'a str>,
}

fn fences(text: &str) -> Vec<Fence<'_>> {
    let mut out = Vec::new();
    let mut open: Option<Fence<'_>> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if let Some(info) = trimmed.strip_prefix("```") {
            match open.take() {
                Some(f) => out.push(f),
                None => {
                    let tag = info
                        .trim()
                        .split(|c: char| c.is_whitespace() || c == '{' || c == ',')
                        .next()
                        .unwrap_or("")
                        .to_ascii_lowercase();
                    open = Some(Fence { tag, body: Vec::new() });
                }
            }
        } else if let Some(f) = open.as_mut() {
            f.body.push(line);
        }
    }
    // an unterminated fence still counts; replies are often cut short
    out.extend(open);
    out
}

/// Pulls HDL source out of an LLM reply.
///
/// Preference order: first fence tagged with the target language, first
/// untagged fence, first fence of any tag, then the whole reply trimmed.
/// Blocks that are empty after trimming are skipped.
pub fn extract_code_block(completion_text: &str, language: HdlLanguage) -> Result<String> {
    if completion_text.trim().is_empty() {
        return Err(Error::Extraction("completion is empty".into()));
    }
    let blocks = fences(completion_text);
    let tags = language.fence_tags();
    let tagged = blocks.iter().filter(|f| tags.contains(&f.tag.as_str()));
    let untagged = blocks.iter().filter(|f| f.tag.is_empty());
    let any = blocks.iter();
    let found =
        tagged.chain(untagged).chain(any).map(|f| f.body.join("\n").trim().to_string()).find(|body| !body.is_empty());
    Ok(found.unwrap_or_else(|| completion_text.trim().to_string()))
}
