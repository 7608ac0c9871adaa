// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{extract_code_block, ChatMessage, GenerationConfig, LlmGateway};
use crate::model::{ArtifactKind, DesignSpec, RevisionHistory, SourceArtifact};
use crate::prompts::{language_tag, render, PromptSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Sufficient,
    NeedsClarification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationOutcome {
    pub verdict: Verdict,
    /// Non-empty exactly when the verdict is `NeedsClarification`.
    pub questions: Vec<String>,
}

impl ClarificationOutcome {
    pub fn sufficient() -> Self {
        Self { verdict: Verdict::Sufficient, questions: Vec::new() }
    }
}

/// A freshly generated revision and the LLM time it cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    pub artifact: SourceArtifact,
    pub llm_ms: u64,
}

/// Parses `SUFFICIENT` / `INSUFFICIENT: q1? q2?` replies.
fn parse_assessment(reply: &str) -> ClarificationOutcome {
    let trimmed = reply.trim();
    let upper = trimmed.to_ascii_uppercase();
    let Some(rest) = upper.strip_prefix("INSUFFICIENT").map(|_| &trimmed["INSUFFICIENT".len()..]) else {
        if !upper.starts_with("SUFFICIENT") {
            log::warn!("unrecognised assessment reply, treating as sufficient: {trimmed:?}");
        }
        return ClarificationOutcome::sufficient();
    };
    let mut questions = Vec::new();
    for line in rest.trim_start_matches(':').lines() {
        let line = line
            .trim()
            .trim_start_matches(|c: char| c == '-' || c == '*' || c.is_ascii_digit() || c == '.' || c == ')')
            .trim();
        let mut start = 0;
        for (i, c) in line.char_indices() {
            if c == '?' {
                let q = line[start..=i].trim();
                if q.len() > 1 {
                    questions.push(q.to_string());
                }
                start = i + 1;
            }
        }
        let tail = line[start..].trim();
        if !tail.is_empty() {
            questions.push(tail.to_string());
        }
    }
    if questions.is_empty() {
        questions.push("Please describe the I/O ports, clocking and reset behavior of the design.".into());
    }
    ClarificationOutcome { verdict: Verdict::NeedsClarification, questions }
}

/// The only producer of HDL text in a run: writes the testbench, then the
/// RTL, then every revision requested through corrective prompts.
#[derive(Debug, Clone)]
pub struct CodeAgent {
    gateway: LlmGateway,
    generation: GenerationConfig,
    prompts: PromptSet,
    interactive: bool,
}

impl CodeAgent {
    pub fn new(gateway: LlmGateway, generation: GenerationConfig, prompts: PromptSet, interactive: bool) -> Self {
        Self { gateway, generation, prompts, interactive }
    }

    fn system(&self, spec_language: crate::model::HdlLanguage) -> ChatMessage {
        ChatMessage::system(render(&self.prompts.system, &[("language", &spec_language.to_string())]))
    }

    fn ask(&self, conversation: &[ChatMessage]) -> Result<(String, u64)> {
        let c = self.gateway.complete(conversation, &self.generation)?;
        Ok((c.text, c.latency_ms))
    }

    /// Asks the LLM whether the request pins down ports, clocking and reset.
    /// Always sufficient when not interactive.
    pub fn assess_spec(&self, spec: &DesignSpec) -> Result<(ClarificationOutcome, u64)> {
        if !self.interactive {
            return Ok((ClarificationOutcome::sufficient(), 0));
        }
        let prompt = render(&self.prompts.assess, &[("spec", &spec.render())]);
        let (reply, ms) = self.ask(&[self.system(spec.language()), ChatMessage::user(prompt)])?;
        Ok((parse_assessment(&reply), ms))
    }

    fn check_history(history: &RevisionHistory, kind: ArtifactKind, spec: &DesignSpec) -> Result<()> {
        if history.kind() != kind || history.language() != spec.language() {
            return Err(Error::Validation(format!(
                "expected a {} {kind} history, got {} {}",
                spec.language(),
                history.language(),
                history.kind()
            )));
        }
        Ok(())
    }

    pub fn generate_testbench(&self, spec: &DesignSpec, history: &mut RevisionHistory) -> Result<Generation> {
        Self::check_history(history, ArtifactKind::Testbench, spec)?;
        let lang = spec.language();
        let prompt = render(
            &self.prompts.testbench,
            &[("spec", &spec.render()), ("language", &lang.to_string()), ("language_tag", language_tag(lang))],
        );
        let (reply, llm_ms) = self.ask(&[self.system(lang), ChatMessage::user(prompt)])?;
        let code = extract_code_block(&reply, lang)?;
        Ok(Generation { artifact: history.append_revision(code)?, llm_ms })
    }

    pub fn generate_rtl(
        &self,
        spec: &DesignSpec,
        testbench: &SourceArtifact,
        history: &mut RevisionHistory,
    ) -> Result<Generation> {
        Self::check_history(history, ArtifactKind::Rtl, spec)?;
        if testbench.kind() != ArtifactKind::Testbench {
            return Err(Error::Validation("generate_rtl needs a testbench artifact".into()));
        }
        let lang = spec.language();
        let prompt = render(
            &self.prompts.rtl,
            &[
                ("spec", &spec.render()),
                ("testbench", testbench.text()),
                ("language", &lang.to_string()),
                ("language_tag", language_tag(lang)),
            ],
        );
        let (reply, llm_ms) = self.ask(&[self.system(lang), ChatMessage::user(prompt)])?;
        let code = extract_code_block(&reply, lang)?;
        Ok(Generation { artifact: history.append_revision(code)?, llm_ms })
    }

    /// Sends the current source and a corrective prompt; the reply replaces
    /// the file wholesale as a child of `current`. On any error the history
    /// is left untouched.
    pub fn revise(
        &self,
        current: &SourceArtifact,
        corrective_prompt: &str,
        history: &mut RevisionHistory,
    ) -> Result<Generation> {
        if corrective_prompt.trim().is_empty() {
            return Err(Error::Validation("corrective prompt must not be empty".into()));
        }
        if history.kind() != current.kind() || history.get(current.revision_id())? != current {
            return Err(Error::Validation(format!(
                "revision {} is not part of the {} history",
                current.revision_id(),
                history.kind()
            )));
        }
        let lang = current.language();
        let tag = language_tag(lang);
        let shown = ChatMessage::assistant(format!("```{tag}\n{}\n```", current.text().trim_end()));
        let prompt = render(
            &self.prompts.revise,
            &[("corrective", corrective_prompt), ("language", &lang.to_string()), ("language_tag", tag)],
        );
        let (reply, llm_ms) = self.ask(&[self.system(lang), shown, ChatMessage::user(prompt)])?;
        let code = extract_code_block(&reply, lang)?;
        let artifact = history.append_child(code, current.revision_id())?;
        Ok(Generation { artifact, llm_ms })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::llm::{MockBackend, MockTurn, RetryPolicy};
    use crate::model::HdlLanguage;

    fn agent(mock: &Arc<MockBackend>, interactive: bool) -> CodeAgent {
        let gw = LlmGateway::new(mock.clone(), RetryPolicy::no_delay(1));
        CodeAgent::new(gw, GenerationConfig::default(), PromptSet::builtin(), interactive)
    }

    fn spec(lang: HdlLanguage) -> DesignSpec {
        DesignSpec::new("An 8-bit shift register with shift_ena asserted for 4 cycles after reset", lang).unwrap()
    }

    #[test]
    fn non_interactive_is_always_sufficient() {
        let mock = Arc::new(MockBackend::replies(Vec::<String>::new()));
        let (o, ms) = agent(&mock, false).assess_spec(&spec(HdlLanguage::Verilog)).unwrap();
        assert_eq!(o.verdict, Verdict::Sufficient);
        assert_eq!(ms, 0);
        assert_eq!(mock.turns_consumed(), 0);
    }

    #[test]
    fn insufficient_reply_yields_questions() {
        let mock = Arc::new(MockBackend::replies(["INSUFFICIENT: what is the reset polarity?"]));
        let (o, _) = agent(&mock, true).assess_spec(&spec(HdlLanguage::Verilog)).unwrap();
        assert_eq!(o.verdict, Verdict::NeedsClarification);
        assert_eq!(o.questions, vec!["what is the reset polarity?".to_string()]);
    }

    #[test]
    fn sufficient_reply() {
        let mock = Arc::new(MockBackend::replies(["SUFFICIENT"]));
        let (o, _) = agent(&mock, true).assess_spec(&spec(HdlLanguage::Verilog)).unwrap();
        assert_eq!(o, ClarificationOutcome::sufficient());
    }

    #[test]
    fn multiple_questions_split() {
        let o = parse_assessment("INSUFFICIENT:\n- How wide is d? Is reset synchronous?\n- clock edge?");
        assert_eq!(o.questions.len(), 3);
        let o = parse_assessment("INSUFFICIENT");
        assert_eq!(o.questions.len(), 1);
    }

    #[test]
    fn testbench_generation_is_revision_one() {
        let tb = "module tb;\n// shift_ena should be 0 after 4 clock cycles\nendmodule";
        let mock = Arc::new(MockBackend::replies([format!("```verilog\n{tb}\n```")]));
        let mut h = RevisionHistory::new(ArtifactKind::Testbench, HdlLanguage::Verilog);
        let g = agent(&mock, false).generate_testbench(&spec(HdlLanguage::Verilog), &mut h).unwrap();
        assert_eq!(g.artifact.text(), tb);
        assert_eq!(g.artifact.kind(), ArtifactKind::Testbench);
        assert_eq!(g.artifact.revision_id(), 1);
        let prompt = &mock.transcript()[0][1].content;
        assert!(prompt.contains("shift_ena"));
        assert!(prompt.contains("TESTCASE <n> PASS"));
        assert!(prompt.contains("ALL TESTS PASSED"));
    }

    #[test]
    fn vhdl_requests_name_the_language() {
        let mock = Arc::new(MockBackend::replies(["entity tb is end tb;"]));
        let mut h = RevisionHistory::new(ArtifactKind::Testbench, HdlLanguage::Vhdl);
        agent(&mock, false).generate_testbench(&spec(HdlLanguage::Vhdl), &mut h).unwrap();
        let convo = &mock.transcript()[0];
        assert!(convo[1].content.contains("VHDL"));
        assert!(convo[0].content.contains("VHDL"));
    }

    #[test]
    fn rtl_prompt_embeds_testbench_verbatim() {
        let mock = Arc::new(MockBackend::replies(["```verilog\nmodule shift(); endmodule\n```"]));
        let a = agent(&mock, false);
        let mut tbh = RevisionHistory::new(ArtifactKind::Testbench, HdlLanguage::Verilog);
        let tb = tbh.append_revision("module tb; reg [3:0] x = {2'b0, 2'b1}; endmodule").unwrap();
        let mut rh = RevisionHistory::new(ArtifactKind::Rtl, HdlLanguage::Verilog);
        let g = a.generate_rtl(&spec(HdlLanguage::Verilog), &tb, &mut rh).unwrap();
        assert_eq!(g.artifact.text(), "module shift(); endmodule");
        let prompt = &mock.transcript()[0][1].content;
        assert!(prompt.contains(tb.text()));
        assert!(prompt.contains(spec(HdlLanguage::Verilog).prompt_text()));
    }

    #[test]
    fn empty_reply_is_extraction_error() {
        let mock = Arc::new(MockBackend::replies([""]));
        let mut tbh = RevisionHistory::new(ArtifactKind::Testbench, HdlLanguage::Verilog);
        let tb = tbh.append_revision("module tb; endmodule").unwrap();
        let mut rh = RevisionHistory::new(ArtifactKind::Rtl, HdlLanguage::Verilog);
        let err = agent(&mock, false).generate_rtl(&spec(HdlLanguage::Verilog), &tb, &mut rh).unwrap_err();
        assert!(matches!(err, Error::Extraction(_)));
        assert!(rh.is_empty());
    }

    #[test]
    fn revise_appends_child_of_current() {
        let mock =
            Arc::new(MockBackend::replies(["```verilog\nmodule fixed; endmodule\n```", "module fixed; endmodule"]));
        let a = agent(&mock, false);
        let mut h = RevisionHistory::new(ArtifactKind::Rtl, HdlLanguage::Verilog);
        let v1 = h.append_revision("module broken endmodule").unwrap();
        let v2 = a.revise(&v1, "rtl.v:1: syntax error", &mut h).unwrap().artifact;
        assert_eq!(v2.revision_id(), 2);
        assert_eq!(v2.parent_revision(), Some(1));
        let convo = &mock.transcript()[0];
        assert!(convo.iter().any(|m| m.content.contains("module broken endmodule")));
        assert!(convo.last().unwrap().content.contains("rtl.v:1: syntax error"));

        let v3 = a.revise(&v2, "still wrong", &mut h).unwrap().artifact;
        assert_eq!(v3.content_hash(), v2.content_hash());
        assert_eq!(v3.revision_id(), 3);
    }

    #[test]
    fn failed_revise_leaves_history_unchanged() {
        let mock = Arc::new(MockBackend::new(vec![MockTurn::fail("down")]));
        let mut h = RevisionHistory::new(ArtifactKind::Rtl, HdlLanguage::Verilog);
        let v1 = h.append_revision("module m; endmodule").unwrap();
        let before = h.clone();
        let err = agent(&mock, false).revise(&v1, "fix it", &mut h).unwrap_err();
        assert!(matches!(err, Error::Llm { .. }));
        assert_eq!(h, before);
    }

    #[test]
    fn empty_corrective_prompt_rejected() {
        let mock = Arc::new(MockBackend::replies(["x"]));
        let mut h = RevisionHistory::new(ArtifactKind::Rtl, HdlLanguage::Verilog);
        let v1 = h.append_revision("module m; endmodule").unwrap();
        assert!(agent(&mock, false).revise(&v1, "  ", &mut h).is_err());
        assert_eq!(mock.turns_consumed(), 0);
    }
}
