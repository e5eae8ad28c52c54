//! Prompting baselines: a single direct prompt (DP), and parser-feedback
//! refinement (OPF) that re-prompts with diagnostics until the grammar is
//! valid.

use serde::{Deserialize, Serialize};

use crate::evolution::{Candidate, LogRecord, Operator};
use crate::gateway::prompts::{render_dp_prompt, render_opf_feedback_prompt};
use crate::gateway::{Gateway, TemplateId, DEFAULT_MAX_TOKENS};

pub const DP_TEMPERATURE: f64 = 0.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpConfig {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DpConfig {
    fn default() -> Self {
        DpConfig {
            temperature: DP_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpfConfig {
    pub max_turns: usize,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for OpfConfig {
    fn default() -> Self {
        OpfConfig {
            max_turns: 5,
            temperature: 0.3,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// Result of a baseline run with one log record per model call.
#[derive(Clone, Debug)]
pub struct BaselineOutcome {
    pub candidate: Candidate,
    pub log: Vec<LogRecord>,
    pub llm_calls: usize,
}

fn ask<S: AsRef<str>>(
    gw: &Gateway,
    template: TemplateId,
    prompt: String,
    temperature: f64,
    max_tokens: u32,
    positives: &[S],
    negatives: &[S],
) -> Result<Candidate, String> {
    let req = gw.request(template, prompt, temperature, max_tokens);
    match gw.complete(&req) {
        Ok(resp) => Ok(Candidate::from_response(&resp.text, positives, negatives)),
        Err(e) => Err(e.to_string()),
    }
}

/// One direct prompt at temperature 0.
pub fn run_dp<S: AsRef<str>>(positives: &[S], negatives: &[S], cfg: &DpConfig, gw: &Gateway) -> BaselineOutcome {
    let prompt = render_dp_prompt(positives, negatives);
    let candidate = ask(
        gw,
        TemplateId::DirectPrompt,
        prompt,
        cfg.temperature,
        cfg.max_tokens,
        positives,
        negatives,
    )
    .unwrap_or_else(Candidate::failed);
    BaselineOutcome {
        log: vec![LogRecord::new(1, 0, Operator::Dp, &candidate)],
        candidate,
        llm_calls: 1,
    }
}

/// Direct prompt followed by feedback turns while the grammar is invalid.
/// Only the latest grammar and its diagnostics are sent back; the final
/// turn's candidate is returned. A gateway error ends the loop with the
/// last candidate obtained before it, if any.
pub fn run_opf<S: AsRef<str>>(positives: &[S], negatives: &[S], cfg: &OpfConfig, gw: &Gateway) -> BaselineOutcome {
    let mut log = Vec::new();
    let mut last: Option<Candidate> = None;
    let mut calls = 0;
    for turn in 1..=cfg.max_turns.max(1) {
        let (template, operator, prompt) = match &last {
            None => (
                TemplateId::DirectPrompt,
                Operator::Dp,
                render_dp_prompt(positives, negatives),
            ),
            Some(prev) => (
                TemplateId::OpfFeedback,
                Operator::OpfFeedback,
                render_opf_feedback_prompt(positives, negatives, &prev.source_text, &prev.diagnostics),
            ),
        };
        calls += 1;
        match ask(
            gw,
            template,
            prompt,
            cfg.temperature,
            cfg.max_tokens,
            positives,
            negatives,
        ) {
            Ok(c) => {
                log.push(LogRecord::new(turn, 0, operator, &c));
                let valid = c.diagnostics.is_empty() && c.fitness >= 0;
                last = Some(c);
                if valid {
                    break;
                }
            }
            Err(e) => {
                let failed = Candidate::failed(e);
                log.push(LogRecord::new(turn, 0, operator, &failed));
                last = Some(last.unwrap_or(failed));
                break;
            }
        }
    }
    BaselineOutcome {
        candidate: last.expect("at least one turn"),
        log,
        llm_calls: calls,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnf::DiagnosticCode;
    use crate::gateway::MockBackend;

    const POS: [&str; 3] = ["ab", "aab", "abb"];
    const NEG: [&str; 3] = ["ba", "a", "b"];
    const GOOD: &str = "```\n<s> ::= <a> <b>\n<a> ::= \"a\" | \"a\" <a>\n<b> ::= \"b\" | \"b\" <b>\n```";
    const BAD: &str = "```\n<s> ::= \"a\"+ \"b\"+\n```";

    #[test]
    fn dp_makes_one_call() {
        let gw = Gateway::mock(MockBackend::from_responses([GOOD]));
        let out = run_dp(&POS, &NEG, &DpConfig::default(), &gw);
        assert_eq!(out.candidate.fitness, 6);
        assert_eq!(gw.calls(), 1);
        assert_eq!(out.log[0].operator, Operator::Dp);
    }

    #[test]
    fn dp_keeps_ebnf_diagnostic() {
        let gw = Gateway::mock(MockBackend::from_responses([BAD]));
        let out = run_dp(&POS, &NEG, &DpConfig::default(), &gw);
        assert_eq!(out.candidate.fitness, -1);
        assert!(out
            .candidate
            .diagnostics
            .iter()
            .any(|d| d.code == DiagnosticCode::UnsupportedSymbol));
        assert_eq!(gw.calls(), 1);
    }

    #[test]
    fn dp_gateway_error_is_minus_one() {
        let gw = Gateway::mock(MockBackend::from_responses(Vec::<String>::new()));
        let out = run_dp(&POS, &NEG, &DpConfig::default(), &gw);
        assert_eq!(out.candidate.fitness, -1);
        assert!(out.candidate.error.is_some());
        assert_eq!(out.llm_calls, 1);
    }

    #[test]
    fn opf_stops_when_valid() {
        let gw = Gateway::mock(MockBackend::from_responses([BAD, BAD, GOOD, GOOD]));
        let out = run_opf(&POS, &NEG, &OpfConfig::default(), &gw);
        assert_eq!(gw.calls(), 3);
        assert_eq!(out.candidate.fitness, 6);
        let ops: Vec<Operator> = out.log.iter().map(|r| r.operator).collect();
        assert_eq!(ops, [Operator::Dp, Operator::OpfFeedback, Operator::OpfFeedback]);
    }

    #[test]
    fn opf_feedback_prompt_carries_diagnostics() {
        let backend = std::sync::Arc::new(MockBackend::from_responses([BAD, GOOD]));
        let gw = Gateway::new(Box::new(backend.clone()), "mock");
        run_opf(&POS, &NEG, &OpfConfig::default(), &gw);
        let prompts = backend.prompts();
        assert_eq!(prompts.len(), 2);
        assert!(!prompts[0].contains("===Feedback==="));
        assert!(prompts[1].contains("===Generated BNF===\n<s> ::= \"a\"+ \"b\"+\n"));
        assert!(prompts[1].contains("Line 1: "));
    }

    #[test]
    fn opf_stops_on_valid_but_wrong_grammar() {
        let wrong = "```\n<s> ::= \"x\"\n```";
        let gw = Gateway::mock(MockBackend::from_responses([wrong, GOOD]));
        let out = run_opf(&POS, &NEG, &OpfConfig::default(), &gw);
        assert_eq!(gw.calls(), 1);
        assert_eq!(out.candidate.fitness, 3);
    }

    #[test]
    fn opf_is_bounded_by_max_turns() {
        let gw = Gateway::mock(MockBackend::from_responses(vec![BAD; 10]));
        let out = run_opf(&POS, &NEG, &OpfConfig::default(), &gw);
        assert_eq!(gw.calls(), 5);
        assert_eq!(out.llm_calls, 5);
        assert_eq!(out.candidate.fitness, -1);
    }

    #[test]
    fn opf_gateway_error_keeps_previous_candidate() {
        let gw = Gateway::mock(MockBackend::from_responses([BAD]));
        let out = run_opf(&POS, &NEG, &OpfConfig::default(), &gw);
        assert_eq!(gw.calls(), 2);
        assert_eq!(out.candidate.source_text, "<s> ::= \"a\"+ \"b\"+");
        assert!(out.log[1].error.is_some());
    }
}
