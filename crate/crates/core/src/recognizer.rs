//! Membership in `L(G)` and left-most derivation extraction.
//!
//! Recognition is an Earley chart over the bytes of the input. Terminals of
//! any length are scanned as contiguous byte runs; nullable non-terminals are
//! skipped at prediction time so epsilon rules, left recursion and ambiguity
//! are all handled exactly.
//!
//! For accepted strings a single left-most derivation is chosen: the one whose
//! sequence of production choices (in expansion order) is lexicographically
//! smallest by textual position. Derivations that re-derive the same
//! non-terminal over the same span inside itself are excluded, which makes
//! the choice finite even for grammars with unit cycles.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use thiserror::Error;

use crate::grammar::{Grammar, Production, ProductionRef, Symbol};

pub const DEFAULT_MAX_CHART_ITEMS: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RecognizeError {
    #[error("grammar is not valid, its language is empty")]
    InvalidGrammar,
    #[error("membership query exceeded the limit of {limit} chart items")]
    LimitExceeded { limit: usize },
    #[error("example {index} ({example:?}) is not in the language of the grammar")]
    NotInLanguage { index: usize, example: String },
}

/// The productions used by one left-most derivation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationTrace {
    /// Production applied at each step, in order.
    pub steps: Vec<ProductionRef>,
    /// Distinct productions among `steps`.
    pub used: BTreeSet<ProductionRef>,
}

impl DerivationTrace {
    fn from_steps(steps: Vec<ProductionRef>) -> Self {
        let used = steps.iter().copied().collect();
        DerivationTrace { steps, used }
    }

    pub fn productions(&self, g: &Grammar) -> BTreeSet<Production> {
        self.used.iter().filter_map(|r| g.production(*r)).collect()
    }
}

#[derive(Clone, Debug)]
enum CSym {
    Nt(u32),
    T(Vec<u8>),
    /// A non-terminal without a rule set: derives nothing.
    Never,
}

#[derive(Clone, Debug)]
struct CProd {
    lhs: u32,
    rhs: Vec<CSym>,
    at: ProductionRef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Item {
    prod: u32,
    dot: u32,
    origin: u32,
}

/// A grammar compiled for repeated membership queries.
#[derive(Clone, Debug)]
pub struct Recognizer {
    prods: Vec<CProd>,
    by_lhs: Vec<Vec<u32>>,
    nullable: Vec<bool>,
    start: u32,
    max_items: usize,
}

struct Chart {
    /// (non-terminal, start, end) triples that were completed.
    completed: HashSet<(u32, u32, u32)>,
}

impl Recognizer {
    /// Compiles a valid grammar.
    pub fn new(g: &Grammar) -> Result<Self, RecognizeError> {
        Self::with_limit(g, DEFAULT_MAX_CHART_ITEMS)
    }

    pub fn with_limit(g: &Grammar, max_items: usize) -> Result<Self, RecognizeError> {
        if !g.is_valid() {
            return Err(RecognizeError::InvalidGrammar);
        }
        let index: HashMap<&str, u32> = g
            .rule_sets()
            .iter()
            .enumerate()
            .map(|(i, r)| (r.lhs.as_str(), i as u32))
            .collect();
        let mut prods = Vec::new();
        let mut by_lhs = vec![Vec::new(); g.rule_sets().len()];
        for (at, p) in g.productions() {
            let lhs = index[p.lhs.as_str()];
            let rhs = p
                .rhs
                .iter()
                .filter_map(|s| match s {
                    Symbol::NonTerminal(n) => Some(index.get(n.as_str()).map_or(CSym::Never, |&i| CSym::Nt(i))),
                    Symbol::Terminal(t) if t.is_empty() => None,
                    Symbol::Terminal(t) => Some(CSym::T(t.as_bytes().to_vec())),
                })
                .collect();
            by_lhs[lhs as usize].push(prods.len() as u32);
            prods.push(CProd { lhs, rhs, at });
        }
        let nullable = compute_nullable(&prods, by_lhs.len());
        let start = index[g.start().expect("valid grammar has a start")];
        Ok(Recognizer {
            prods,
            by_lhs,
            nullable,
            start,
            max_items,
        })
    }

    pub fn accepts(&self, s: &str) -> Result<bool, RecognizeError> {
        let input = s.as_bytes();
        let chart = self.chart(input)?;
        Ok(chart.completed.contains(&(self.start, 0, input.len() as u32)))
    }

    /// The derivation chosen by lowest production index at each left-most
    /// step, or `None` when `s` is not in the language.
    pub fn leftmost_derivation(&self, s: &str) -> Result<Option<DerivationTrace>, RecognizeError> {
        let input = s.as_bytes();
        let chart = self.chart(input)?;
        let n = input.len() as u32;
        if !chart.completed.contains(&(self.start, 0, n)) {
            return Ok(None);
        }
        let mut search = DerivationSearch {
            rec: self,
            input,
            completed: &chart.completed,
            memo: HashMap::new(),
            budget: self.max_items,
        };
        let seq = search.best(self.start, 0, n, &[])?;
        let seq = seq.expect("chart says the start symbol spans the input");
        Ok(Some(DerivationTrace::from_steps(
            seq.iter().map(|&p| self.prods[p as usize].at).collect(),
        )))
    }

    fn chart(&self, input: &[u8]) -> Result<Chart, RecognizeError> {
        let n = input.len();
        let mut sets: Vec<Vec<Item>> = vec![Vec::new(); n + 1];
        let mut seen: Vec<HashSet<Item>> = vec![HashSet::new(); n + 1];
        let mut waiting: Vec<HashMap<u32, Vec<Item>>> = vec![HashMap::new(); n + 1];
        let mut completed = HashSet::new();
        let mut total = 0usize;

        let limit = self.max_items;
        let mut add = |sets: &mut Vec<Vec<Item>>,
                       seen: &mut Vec<HashSet<Item>>,
                       at: usize,
                       item: Item|
         -> Result<(), RecognizeError> {
            if seen[at].insert(item) {
                total += 1;
                if total > limit {
                    log::warn!("recognizer chart limit of {limit} items reached");
                    return Err(RecognizeError::LimitExceeded { limit });
                }
                sets[at].push(item);
            }
            Ok(())
        };

        for &p in &self.by_lhs[self.start as usize] {
            add(
                &mut sets,
                &mut seen,
                0,
                Item {
                    prod: p,
                    dot: 0,
                    origin: 0,
                },
            )?;
        }

        for i in 0..=n {
            let mut w = 0;
            while w < sets[i].len() {
                let item = sets[i][w];
                w += 1;
                let prod = &self.prods[item.prod as usize];
                let advanced = Item {
                    dot: item.dot + 1,
                    ..item
                };
                match prod.rhs.get(item.dot as usize) {
                    None => {
                        completed.insert((prod.lhs, item.origin, i as u32));
                        let parents = waiting[item.origin as usize]
                            .get(&prod.lhs)
                            .cloned()
                            .unwrap_or_default();
                        for parent in parents {
                            add(
                                &mut sets,
                                &mut seen,
                                i,
                                Item {
                                    dot: parent.dot + 1,
                                    ..parent
                                },
                            )?;
                        }
                    }
                    Some(CSym::Nt(b)) => {
                        waiting[i].entry(*b).or_default().push(item);
                        for &p in &self.by_lhs[*b as usize] {
                            add(
                                &mut sets,
                                &mut seen,
                                i,
                                Item {
                                    prod: p,
                                    dot: 0,
                                    origin: i as u32,
                                },
                            )?;
                        }
                        if self.nullable[*b as usize] {
                            add(&mut sets, &mut seen, i, advanced)?;
                        }
                    }
                    Some(CSym::T(t)) => {
                        if input[i..].starts_with(t) {
                            add(&mut sets, &mut seen, i + t.len(), advanced)?;
                        }
                    }
                    Some(CSym::Never) => {}
                }
            }
        }
        Ok(Chart { completed })
    }
}

fn compute_nullable(prods: &[CProd], n: usize) -> Vec<bool> {
    let mut nullable = vec![false; n];
    loop {
        let mut changed = false;
        for p in prods {
            if nullable[p.lhs as usize] {
                continue;
            }
            let all = p.rhs.iter().all(|s| match s {
                CSym::Nt(b) => nullable[*b as usize],
                CSym::T(_) | CSym::Never => false,
            });
            if all {
                nullable[p.lhs as usize] = true;
                changed = true;
            }
        }
        if !changed {
            return nullable;
        }
    }
}

type Seq = Rc<Vec<u32>>;

struct DerivationSearch<'a> {
    rec: &'a Recognizer,
    input: &'a [u8],
    completed: &'a HashSet<(u32, u32, u32)>,
    /// Keyed by (non-terminal, start, end, sorted same-span ancestors).
    memo: HashMap<(u32, u32, u32, Vec<u32>), Option<Seq>>,
    budget: usize,
}

impl DerivationSearch<'_> {
    /// Smallest production sequence deriving `input[i..j]` from `a`, where
    /// `ancestors` are the non-terminals already expanded over this same span.
    fn best(&mut self, a: u32, i: u32, j: u32, ancestors: &[u32]) -> Result<Option<Seq>, RecognizeError> {
        if !self.completed.contains(&(a, i, j)) {
            return Ok(None);
        }
        let key = (a, i, j, ancestors.to_vec());
        if let Some(hit) = self.memo.get(&key) {
            return Ok(hit.clone());
        }
        if self.budget == 0 {
            return Err(RecognizeError::LimitExceeded {
                limit: self.rec.max_items,
            });
        }
        self.budget -= 1;

        let mut inner: Vec<u32> = ancestors.to_vec();
        inner.push(a);
        inner.sort_unstable();

        let mut result = None;
        for &p in &self.rec.by_lhs[a as usize] {
            if let Some(rest) = self.best_sequence(p, i, j, &inner)? {
                let mut seq = Vec::with_capacity(rest.len() + 1);
                seq.push(p);
                seq.extend_from_slice(&rest);
                result = Some(Rc::new(seq));
                break;
            }
        }
        self.memo.insert(key, result.clone());
        Ok(result)
    }

    /// Smallest concatenated sequence for the right-hand side of `p` over
    /// `input[i..j]`.
    fn best_sequence(&mut self, p: u32, i: u32, j: u32, inner: &[u32]) -> Result<Option<Vec<u32>>, RecognizeError> {
        let rhs = self.rec.prods[p as usize].rhs.clone();
        let width = (j - i) as usize + 1;
        // suffix[k - i] = best sequence for rhs[t..] over input[k..j]
        let mut suffix: Vec<Option<Vec<u32>>> = vec![None; width];
        suffix[width - 1] = Some(Vec::new());
        for sym in rhs.iter().rev() {
            let mut next: Vec<Option<Vec<u32>>> = vec![None; width];
            for k in i..=j {
                let mut best: Option<Vec<u32>> = None;
                match sym {
                    CSym::T(t) => {
                        let end = k as usize + t.len();
                        if end <= j as usize && self.input[k as usize..].starts_with(t) {
                            best = suffix[end - i as usize].clone();
                        }
                    }
                    CSym::Nt(b) => {
                        for k2 in k..=j {
                            let Some(rest) = &suffix[(k2 - i) as usize] else {
                                continue;
                            };
                            let child = if k == i && k2 == j {
                                if inner.binary_search(b).is_ok() {
                                    continue;
                                }
                                self.best(*b, k, k2, inner)?
                            } else {
                                self.best(*b, k, k2, &[])?
                            };
                            if let Some(child) = child {
                                let mut cand = Vec::with_capacity(child.len() + rest.len());
                                cand.extend_from_slice(&child);
                                cand.extend_from_slice(rest);
                                if best.as_ref().is_none_or(|b| cand < *b) {
                                    best = Some(cand);
                                }
                            }
                        }
                    }
                    CSym::Never => {}
                }
                next[(k - i) as usize] = best;
            }
            suffix = next;
        }
        Ok(suffix[0].take())
    }
}

/// Membership test for a grammar, with the default chart limit.
pub fn accepts(g: &Grammar, s: &str) -> Result<bool, RecognizeError> {
    Recognizer::new(g)?.accepts(s)
}

pub fn leftmost_derivation_rules(g: &Grammar, s: &str) -> Result<Option<DerivationTrace>, RecognizeError> {
    Recognizer::new(g)?.leftmost_derivation(s)
}

/// `Π_P`: union of the chosen derivations' productions over all examples.
pub fn used_rules_for_examples<S: AsRef<str>>(
    g: &Grammar,
    examples: &[S],
) -> Result<BTreeSet<ProductionRef>, RecognizeError> {
    let rec = Recognizer::new(g)?;
    let mut used = BTreeSet::new();
    for (index, ex) in examples.iter().enumerate() {
        match rec.leftmost_derivation(ex.as_ref())? {
            Some(trace) => used.extend(trace.used),
            None => {
                return Err(RecognizeError::NotInLanguage {
                    index,
                    example: ex.as_ref().to_string(),
                })
            }
        }
    }
    Ok(used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnf::parse_bnf;

    fn g(text: &str) -> Grammar {
        parse_bnf(text).unwrap()
    }

    fn r(rule_set: usize, alternative: usize) -> ProductionRef {
        ProductionRef { rule_set, alternative }
    }

    #[test]
    fn right_linear() {
        let gr = g(r#"<s> ::= "a" <s> | "a""#);
        assert!(accepts(&gr, "aaa").unwrap());
        assert!(!accepts(&gr, "").unwrap());
        assert!(!accepts(&gr, "aab").unwrap());
    }

    #[test]
    fn left_recursion() {
        let gr = g(r#"<e> ::= <e> "+" <n> | <n>
<n> ::= "1" | "2""#);
        assert!(accepts(&gr, "1+2+1").unwrap());
        assert!(!accepts(&gr, "1+").unwrap());
    }

    #[test]
    fn epsilon_only() {
        let gr = g(r#"<s> ::= """#);
        assert!(accepts(&gr, "").unwrap());
        assert!(!accepts(&gr, "a").unwrap());
    }

    #[test]
    fn nullable_chain() {
        let gr = g(r#"<s> ::= <a> <b> "x" <a>
<a> ::= "" | "a"
<b> ::= <a> <a>"#);
        for s in ["x", "ax", "aaax", "aaaxa", "xa"] {
            assert!(accepts(&gr, s).unwrap(), "{s}");
        }
        assert!(!accepts(&gr, "aaaax").unwrap());
    }

    #[test]
    fn multi_char_terminals_and_spaces() {
        let gr = g(r#"<s> ::= "SELECT" " " <c>
<c> ::= "x" | "x" "," <c>"#);
        assert!(accepts(&gr, "SELECT x,x").unwrap());
        assert!(!accepts(&gr, "SELECTx").unwrap());
        assert!(!accepts(&gr, "SELECT  x").unwrap());
    }

    #[test]
    fn invalid_grammar_is_an_error() {
        assert_eq!(accepts(&g(r#"<s> ::= <t>"#), "a"), Err(RecognizeError::InvalidGrammar));
    }

    #[test]
    fn chart_limit() {
        let gr = g(r#"<s> ::= <s> <s> | "a" | """#);
        let rec = Recognizer::with_limit(&gr, 50).unwrap();
        assert_eq!(
            rec.accepts(&"a".repeat(40)),
            Err(RecognizeError::LimitExceeded { limit: 50 })
        );
    }

    #[test]
    fn single_derivation() {
        let gr = g(r#"<s> ::= "a""#);
        let t = leftmost_derivation_rules(&gr, "a").unwrap().unwrap();
        assert_eq!(t.steps, vec![r(0, 0)]);
        assert!(leftmost_derivation_rules(&gr, "b").unwrap().is_none());
    }

    #[test]
    fn ambiguity_picks_lowest_alternative() {
        let gr = g(r#"<s> ::= "a" | "a""#);
        let t = leftmost_derivation_rules(&gr, "a").unwrap().unwrap();
        assert_eq!(t.steps, vec![r(0, 0)]);
    }

    #[test]
    fn unit_cycle_terminates() {
        let gr = g(r#"<s> ::= <s> | <t>
<t> ::= <s> | "a""#);
        let t = leftmost_derivation_rules(&gr, "a").unwrap().unwrap();
        assert_eq!(t.steps, vec![r(0, 1), r(1, 1)]);
    }

    #[test]
    fn nullable_left_recursion_terminates() {
        let gr = g(r#"<s> ::= <s> <e> | "a"
<e> ::= """#);
        let t = leftmost_derivation_rules(&gr, "a").unwrap().unwrap();
        // <s> -> <s> <e> is tried first but the inner <s> over the same span is excluded
        assert_eq!(t.steps, vec![r(0, 1)]);
    }

    #[test]
    fn leftmost_prefers_earlier_choice_first() {
        // "ab" parses as <x><y> with <x>="a" (alt 0) or <x>="" then <y>="ab".
        let gr = g(r#"<s> ::= <x> <y>
<x> ::= "a" | ""
<y> ::= "ab" | "b""#);
        let t = leftmost_derivation_rules(&gr, "ab").unwrap().unwrap();
        assert_eq!(t.steps, vec![r(0, 0), r(1, 0), r(2, 1)]);
    }

    #[test]
    fn overfit_grammar_uses_one_production_per_example() {
        let gr = g(r#"<stmt> ::= "add(1,2,3)" | "merge(x,y)" | "fibonacci(9)""#);
        let t = leftmost_derivation_rules(&gr, "add(1,2,3)").unwrap().unwrap();
        assert_eq!(t.used.len(), 1);
        let used = used_rules_for_examples(&gr, &["add(1,2,3)", "merge(x,y)", "fibonacci(9)"]).unwrap();
        assert_eq!(used.len(), 3);
    }

    #[test]
    fn union_over_repeated_examples() {
        let gr = g(r#"<s> ::= "a""#);
        assert_eq!(used_rules_for_examples(&gr, &["a", "a"]).unwrap().len(), 1);
    }

    #[test]
    fn used_rules_names_missing_example() {
        let gr = g(r#"<s> ::= "a""#);
        assert_eq!(
            used_rules_for_examples(&gr, &["a", "b"]),
            Err(RecognizeError::NotInLanguage {
                index: 1,
                example: "b".into()
            })
        );
    }
}
