//! Grammar inference from positive and negative examples.
//!
//! The crate infers context-free grammars written in BNF from a handful of
//! example strings. It contains the grammar model and BNF text format, an
//! exact membership recognizer, the evaluation metrics, the hybrid genetic
//! search (`hygenar`), two prompting baselines, a pluggable chat-completion
//! gateway and the on-disk challenge dataset format.

pub mod baselines;
pub mod bnf;
pub mod challenge;
pub mod evolution;
pub mod gateway;
pub mod grammar;
pub mod metrics;
pub mod recognizer;
pub mod runner;

pub use bnf::{extract_fenced_grammar, parse_bnf, parse_valid_bnf, print_bnf, Diagnostic, DiagnosticCode};
pub use grammar::{Alternative, Grammar, Production, ProductionRef, RuleSet, Symbol};
pub use recognizer::{
    accepts, leftmost_derivation_rules, used_rules_for_examples, DerivationTrace, RecognizeError, Recognizer,
};
