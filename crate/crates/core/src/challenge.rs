//! Challenge datasets: the line-delimited file format, structural loading,
//! semantic validation against the reference grammar, and model-assisted
//! construction of new datasets.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnf::{parse_valid_bnf, print_bnf, render_diagnostics};
use crate::gateway::prompts::{render_dataset_prompt, DatasetPrompt};
use crate::gateway::{Gateway, DEFAULT_MAX_TOKENS};
use crate::grammar::Grammar;
use crate::recognizer::{RecognizeError, Recognizer};

pub const EXAMPLES_PER_SET: usize = 3;
pub const MIN_K: usize = 1;
pub const MAX_K: usize = 9;

/// One inference task: a reference grammar and its example strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    pub id: String,
    /// Declared number of rule sets in the reference grammar.
    pub k: usize,
    pub grammar: String,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

impl Challenge {
    /// The parsed reference grammar, if it is valid.
    pub fn reference(&self) -> Option<Grammar> {
        parse_valid_bnf(&self.grammar).ok()
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{} invalid record(s)", .0.len())]
    Records(Vec<RecordError>),
}

/// A structural problem with one record. `record` is the 1-based line number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub record: usize,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {}: {}", self.record, self.message)
    }
}

fn structural_errors(c: &Challenge) -> Vec<String> {
    let mut errs = Vec::new();
    if c.id.trim().is_empty() {
        errs.push("id must not be empty".to_string());
    }
    if !(MIN_K..=MAX_K).contains(&c.k) {
        errs.push(format!("k must be between {MIN_K} and {MAX_K}, got {}", c.k));
    }
    for (name, list) in [("positives", &c.positives), ("negatives", &c.negatives)] {
        if list.len() != EXAMPLES_PER_SET {
            errs.push(format!(
                "{name} must contain exactly {EXAMPLES_PER_SET} strings, got {}",
                list.len()
            ));
        }
    }
    errs
}

/// Parses dataset text with structural checks only. Every bad record is
/// reported; blank lines are ignored.
pub fn parse_dataset(text: &str) -> Result<Vec<Challenge>, Vec<RecordError>> {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let record = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let c: Challenge = match serde_json::from_str(line) {
            Ok(c) => c,
            Err(e) => {
                errors.push(RecordError {
                    record,
                    message: e.to_string(),
                });
                continue;
            }
        };
        for message in structural_errors(&c) {
            errors.push(RecordError { record, message });
        }
        if !ids.insert(c.id.clone()) {
            errors.push(RecordError {
                record,
                message: format!("duplicate id {:?}", c.id),
            });
        }
        out.push(c);
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

pub fn load_dataset(path: &Path) -> Result<Vec<Challenge>, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_dataset(&text).map_err(LoadError::Records)
}

/// Writes one JSON record per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Reads one JSON record per line, skipping blank lines.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> std::io::Result<Vec<T>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

pub fn save_dataset(path: &Path, challenges: &[Challenge]) -> std::io::Result<()> {
    write_jsonl(path, challenges)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// The reference grammar does not parse or is not valid.
    InvalidReference,
    /// Declared k differs from the number of rule sets.
    KMismatch,
    PositiveRejected,
    NegativeAccepted,
    /// Membership could not be decided within the recognizer's limit.
    MembershipUndecided,
}

impl ViolationKind {
    pub fn describe(self) -> &'static str {
        match self {
            ViolationKind::InvalidReference => "invalid reference grammar",
            ViolationKind::KMismatch => "declared k differs from the number of rule sets",
            ViolationKind::PositiveRejected => "positive rejected",
            ViolationKind::NegativeAccepted => "negative accepted",
            ViolationKind::MembershipUndecided => "membership undecided",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub challenge: String,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.challenge, self.kind.describe(), self.detail)
    }
}

/// Every semantic problem with one challenge.
pub fn validate_challenge(c: &Challenge) -> Vec<Violation> {
    let violation = |kind, detail: String| Violation {
        challenge: c.id.clone(),
        kind,
        detail,
    };
    let g = match parse_valid_bnf(&c.grammar) {
        Ok(g) => g,
        Err(diags) => return vec![violation(ViolationKind::InvalidReference, render_diagnostics(&diags))],
    };
    let mut out = Vec::new();
    let count = g.rule_sets().len();
    if count != c.k {
        out.push(violation(
            ViolationKind::KMismatch,
            format!("declared k = {} but the grammar has {count} rule sets", c.k),
        ));
    }
    let rec = Recognizer::new(&g).expect("grammar is valid");
    let check = |s: &str, want: bool| -> Option<Violation> {
        match rec.accepts(s) {
            Ok(got) if got == want => None,
            Ok(_) if want => Some(violation(ViolationKind::PositiveRejected, format!("{s:?}"))),
            Ok(_) => Some(violation(ViolationKind::NegativeAccepted, format!("{s:?}"))),
            Err(RecognizeError::LimitExceeded { limit }) => Some(violation(
                ViolationKind::MembershipUndecided,
                format!("{s:?} exceeded {limit} chart items"),
            )),
            Err(e) => Some(violation(ViolationKind::MembershipUndecided, format!("{s:?}: {e}"))),
        }
    };
    out.extend(c.positives.iter().filter_map(|p| check(p, true)));
    out.extend(c.negatives.iter().filter_map(|n| check(n, false)));
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_dataset(challenges: &[Challenge]) -> ValidationReport {
    ValidationReport {
        checked: challenges.len(),
        violations: challenges.iter().flat_map(validate_challenge).collect(),
    }
}

/// Settings for [`construct_dataset`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstructConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub grammars_per_k: usize,
    pub challenges_per_grammar: usize,
    pub examples_per_set: usize,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        ConstructConfig {
            k_min: MIN_K,
            k_max: MAX_K,
            grammars_per_k: 10,
            challenges_per_grammar: 6,
            examples_per_set: EXAMPLES_PER_SET,
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

/// An item needing human correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueItem {
    pub item: serde_json::Value,
    pub violations: Vec<String>,
    pub raw_output: String,
}

#[derive(Clone, Debug, Default)]
pub struct ConstructOutcome {
    pub draft: Vec<Challenge>,
    pub queue: Vec<QueueItem>,
    pub grammars_attempted: usize,
    pub challenges_attempted: usize,
}

/// Splits model output into items separated by blank lines. Code fences
/// are dropped.
pub fn split_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim_start().starts_with("```") {
            continue;
        }
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line);
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n"));
    }
    blocks
}

struct Builder<'a> {
    gw: &'a Gateway,
    cfg: &'a ConstructConfig,
    out: ConstructOutcome,
    seen: BTreeSet<String>,
}

impl Builder<'_> {
    fn ask(&self, prompt: DatasetPrompt<'_>) -> Result<String, String> {
        let req = self.gw.request(
            prompt.template(),
            render_dataset_prompt(&prompt),
            self.cfg.temperature,
            self.cfg.max_tokens,
        );
        self.gw.complete(&req).map(|r| r.text).map_err(|e| e.to_string())
    }

    fn queue(&mut self, item: serde_json::Value, violations: Vec<String>, raw_output: impl Into<String>) {
        self.out.queue.push(QueueItem {
            item,
            violations,
            raw_output: raw_output.into(),
        });
    }

    /// Checks a proposed reference grammar. Returns its canonical text.
    fn accept_grammar(&self, k: usize, text: &str) -> Result<String, Vec<String>> {
        let g = parse_valid_bnf(text).map_err(|d| vec![render_diagnostics(&d)])?;
        if g.rule_sets().len() != k {
            return Err(vec![format!(
                "{}: expected {k} rule sets, found {}",
                ViolationKind::KMismatch.describe(),
                g.rule_sets().len()
            )]);
        }
        Ok(print_bnf(&g))
    }

    fn grammars_for(&mut self, k: usize) -> Vec<String> {
        let n = self.cfg.grammars_per_k;
        let raw = match self.ask(DatasetPrompt::Grammars { k, n }) {
            Ok(raw) => raw,
            Err(e) => {
                self.queue(serde_json::json!({"k": k}), vec![e], "");
                return Vec::new();
            }
        };
        let mut accepted = Vec::new();
        for block in split_blocks(&raw).into_iter().take(n) {
            self.out.grammars_attempted += 1;
            match self.accept_grammar(k, &block) {
                Err(v) => self.queue(serde_json::json!({"k": k, "grammar": block}), v, raw.clone()),
                Ok(canonical) if self.seen.contains(&canonical) => {
                    if let Some(alt) = self.replacement(k, &canonical) {
                        accepted.push(alt);
                    }
                }
                Ok(canonical) => {
                    self.seen.insert(canonical.clone());
                    accepted.push(canonical);
                }
            }
        }
        accepted
    }

    /// Asks once for a different grammar after a duplicate.
    fn replacement(&mut self, k: usize, duplicate: &str) -> Option<String> {
        let raw = match self.ask(DatasetPrompt::Grammars { k, n: 1 }) {
            Ok(raw) => raw,
            Err(e) => {
                self.queue(serde_json::json!({"k": k, "grammar": duplicate}), vec![e], "");
                return None;
            }
        };
        let block = split_blocks(&raw).into_iter().next().unwrap_or_default();
        match self.accept_grammar(k, &block) {
            Ok(c) if !self.seen.contains(&c) => {
                self.seen.insert(c.clone());
                Some(c)
            }
            Ok(_) => {
                self.queue(
                    serde_json::json!({"k": k, "grammar": duplicate}),
                    vec!["duplicate grammar".to_string()],
                    raw,
                );
                None
            }
            Err(v) => {
                self.queue(serde_json::json!({"k": k, "grammar": block}), v, raw);
                None
            }
        }
    }

    fn challenges_for(&mut self, k: usize, index: usize, grammar: &str) {
        let m = self.cfg.examples_per_set;
        for j in 0..self.cfg.challenges_per_grammar {
            self.out.challenges_attempted += 1;
            let id = format!("k{k}-g{index}-c{j}");
            let pos = self.ask(DatasetPrompt::Positives { m, reference: grammar });
            let neg = self.ask(DatasetPrompt::Negatives { m, reference: grammar });
            let (pos, neg) = match (pos, neg) {
                (Ok(p), Ok(n)) => (p, n),
                (p, n) => {
                    let errors = [p.err(), n.err()].into_iter().flatten().collect();
                    self.queue(serde_json::json!({"id": id, "k": k, "grammar": grammar}), errors, "");
                    continue;
                }
            };
            let take = |raw: &str| split_blocks(raw).into_iter().take(m).collect::<Vec<_>>();
            let c = Challenge {
                id,
                k,
                grammar: grammar.to_string(),
                positives: take(&pos),
                negatives: take(&neg),
            };
            let mut problems: Vec<String> = structural_errors(&c);
            problems.extend(validate_challenge(&c).iter().map(ToString::to_string));
            if problems.is_empty() {
                self.out.draft.push(c);
            } else {
                let item = serde_json::to_value(&c).expect("challenge serializes");
                self.queue(item, problems, format!("{pos}\n\n{neg}"));
            }
        }
    }
}

/// Generates reference grammars for each k, then example sets for each
/// grammar. Anything failing validation goes to the correction queue; the
/// draft only ever holds clean challenges.
pub fn construct_dataset(cfg: &ConstructConfig, gw: &Gateway) -> ConstructOutcome {
    let mut b = Builder {
        gw,
        cfg,
        out: ConstructOutcome::default(),
        seen: BTreeSet::new(),
    };
    for k in cfg.k_min..=cfg.k_max {
        for (i, grammar) in b.grammars_for(k).into_iter().enumerate() {
            b.challenges_for(k, i, &grammar);
        }
    }
    b.out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn challenge(id: &str) -> Challenge {
        Challenge {
            id: id.into(),
            k: 2,
            grammar: "<s> ::= <d> | <d> <s>\n<d> ::= \"0\" | \"1\"".into(),
            positives: vec!["0".into(), "01".into(), "110".into()],
            negatives: vec!["".into(), "2".into(), "0 1".into()],
        }
    }

    fn line(c: &Challenge) -> String {
        serde_json::to_string(c).unwrap()
    }

    #[test]
    fn loads_well_formed_records() {
        let text = format!("{}\n\n{}\n", line(&challenge("a")), line(&challenge("b")));
        let cs = parse_dataset(&text).unwrap();
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[1].id, "b");
    }

    #[test]
    fn wrong_example_count_is_reported() {
        let mut c = challenge("a");
        c.positives.pop();
        let errs = parse_dataset(&format!("{}\n{}", line(&challenge("z")), line(&c))).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].record, 2);
        assert!(errs[0]
            .message
            .contains("positives must contain exactly 3 strings, got 2"));
    }

    #[test]
    fn duplicate_ids_and_bad_json_are_reported() {
        let text = format!("{}\n{}\nnot json\n", line(&challenge("a")), line(&challenge("a")));
        let errs = parse_dataset(&text).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs[0].message.contains("duplicate id"));
        assert_eq!(errs[1].record, 3);
    }

    #[test]
    fn clean_challenge_has_no_violations() {
        assert!(validate_challenge(&challenge("a")).is_empty());
    }

    #[test]
    fn copied_positive_is_an_accepted_negative() {
        let mut c = challenge("a");
        c.negatives[0] = c.positives[0].clone();
        let v = validate_challenge(&c);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::NegativeAccepted);
    }

    #[test]
    fn k_mismatch() {
        let mut c = challenge("a");
        c.k = 3;
        let v = validate_challenge(&c);
        assert_eq!(v.iter().map(|v| v.kind).collect::<Vec<_>>(), [ViolationKind::KMismatch]);
    }

    #[test]
    fn blocks_split_on_blank_lines() {
        assert_eq!(split_blocks("0\n\n1\n\n\n2\n"), ["0", "1", "2"]);
        assert_eq!(
            split_blocks("```\n<a> ::= \"x\"\n<b> ::= \"y\"\n\n<c> ::= \"z\"\n```"),
            ["<a> ::= \"x\"\n<b> ::= \"y\"", "<c> ::= \"z\""]
        );
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let cs = vec![challenge("a"), challenge("b")];
        save_dataset(&path, &cs).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, cs);
        save_dataset(&path, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }
}
