//! BNF grammar values: symbols, productions, rule sets and the grammar itself.
//!
//! A [`Grammar`] is the grouped form `(V, Σ, Π, S, R)`: an ordered list of
//! rule sets (one per non-terminal) plus a start symbol. Rule sets sharing a
//! left-hand side are merged on construction, so every non-terminal owns at
//! most one rule set.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

/// A grammar symbol.
///
/// Non-terminal text is the name without angle brackets. Terminal text is the
/// literal exactly as written between the double quotes; it may be empty
/// (epsilon) or contain spaces.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    NonTerminal(String),
    Terminal(String),
}

impl Symbol {
    pub fn nt(name: impl Into<String>) -> Self {
        Symbol::NonTerminal(name.into())
    }

    pub fn t(text: impl Into<String>) -> Self {
        Symbol::Terminal(text.into())
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Symbol::Terminal(_))
    }

    pub fn text(&self) -> &str {
        match self {
            Symbol::NonTerminal(s) | Symbol::Terminal(s) => s,
        }
    }

    /// True when the symbol can be written as BNF text and read back unchanged.
    pub fn is_well_formed(&self) -> bool {
        match self {
            Symbol::NonTerminal(name) => is_valid_nonterminal_name(name),
            // epsilon is an empty alternative, never an empty terminal
            Symbol::Terminal(text) => !text.is_empty() && !text.contains(['"', '\n', '\r']),
        }
    }
}

pub(crate) fn is_valid_nonterminal_name(name: &str) -> bool {
    !name.is_empty() && !name.contains(['<', '>', '"', '\n', '\r'])
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::NonTerminal(name) => write!(f, "<{name}>"),
            Symbol::Terminal(text) => write!(f, "\"{text}\""),
        }
    }
}

/// One right-hand side. An empty alternative is the epsilon production.
pub type Alternative = Vec<Symbol>;

/// A single production `lhs -> rhs`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Production {
    pub lhs: String,
    pub rhs: Alternative,
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}> ::=", self.lhs)?;
        if self.rhs.is_empty() {
            return write!(f, " \"\"");
        }
        for sym in &self.rhs {
            write!(f, " {sym}")?;
        }
        Ok(())
    }
}

/// Position of a production inside a grammar: rule-set index and alternative
/// index, both zero-based and in textual order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProductionRef {
    pub rule_set: usize,
    pub alternative: usize,
}

/// All alternatives for one non-terminal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RuleSet {
    pub lhs: String,
    pub alternatives: Vec<Alternative>,
}

impl RuleSet {
    pub fn new(lhs: impl Into<String>, alternatives: Vec<Alternative>) -> Self {
        RuleSet {
            lhs: lhs.into(),
            alternatives,
        }
    }
}

/// A BNF grammar. Immutable once built; construct through [`Grammar::new`] or
/// [`Grammar::with_start`] so that duplicate rule sets are merged.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Grammar {
    rule_sets: Vec<RuleSet>,
    start: Option<String>,
}

impl Grammar {
    /// Builds a grammar whose start symbol is the first rule set's lhs.
    pub fn new(rule_sets: Vec<RuleSet>) -> Self {
        let start = rule_sets.first().map(|r| r.lhs.clone());
        Grammar {
            rule_sets: merge_rule_sets(rule_sets),
            start,
        }
    }

    /// Builds a grammar with an explicit start symbol, which need not own a
    /// rule set (such a grammar is simply not valid).
    pub fn with_start(rule_sets: Vec<RuleSet>, start: impl Into<String>) -> Self {
        Grammar {
            rule_sets: merge_rule_sets(rule_sets),
            start: Some(start.into()),
        }
    }

    pub fn empty() -> Self {
        Grammar::default()
    }

    pub fn rule_sets(&self) -> &[RuleSet] {
        &self.rule_sets
    }

    pub fn start(&self) -> Option<&str> {
        self.start.as_deref()
    }

    pub fn is_empty(&self) -> bool {
        self.rule_sets.is_empty()
    }

    pub fn rule_set(&self, lhs: &str) -> Option<&RuleSet> {
        self.rule_sets.iter().find(|r| r.lhs == lhs)
    }

    pub fn rule_set_index(&self, lhs: &str) -> Option<usize> {
        self.rule_sets.iter().position(|r| r.lhs == lhs)
    }

    /// `|R|`.
    pub fn nonterminal_count(&self) -> usize {
        self.rule_sets.len()
    }

    /// `|Π|`, counting every (lhs, alternative) pair.
    pub fn production_count(&self) -> usize {
        self.rule_sets.iter().map(|r| r.alternatives.len()).sum()
    }

    /// Valid when there is at least one rule set, every rule set has an
    /// alternative, the start symbol and every referenced non-terminal own a
    /// rule set.
    pub fn is_valid(&self) -> bool {
        if self.rule_sets.is_empty() {
            return false;
        }
        let defined: HashSet<&str> = self.rule_sets.iter().map(|r| r.lhs.as_str()).collect();
        match &self.start {
            Some(s) if defined.contains(s.as_str()) => {}
            _ => return false,
        }
        self.rule_sets.iter().all(|r| {
            !r.alternatives.is_empty()
                && r.alternatives.iter().flatten().all(|sym| match sym {
                    Symbol::NonTerminal(n) => defined.contains(n.as_str()),
                    Symbol::Terminal(_) => true,
                })
        })
    }

    /// Non-terminals referenced on a right-hand side that own no rule set, in
    /// order of first appearance.
    pub fn undefined_nonterminals(&self) -> Vec<&str> {
        let defined: HashSet<&str> = self.rule_sets.iter().map(|r| r.lhs.as_str()).collect();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for sym in self.rule_sets.iter().flat_map(|r| r.alternatives.iter().flatten()) {
            if let Symbol::NonTerminal(n) = sym {
                if !defined.contains(n.as_str()) && seen.insert(n.as_str()) {
                    out.push(n.as_str());
                }
            }
        }
        out
    }

    /// `V`: every lhs plus every non-terminal mentioned on a right-hand side.
    pub fn nonterminals(&self) -> BTreeSet<&str> {
        let mut v: BTreeSet<&str> = self.rule_sets.iter().map(|r| r.lhs.as_str()).collect();
        for sym in self.rule_sets.iter().flat_map(|r| r.alternatives.iter().flatten()) {
            if let Symbol::NonTerminal(n) = sym {
                v.insert(n);
            }
        }
        v
    }

    /// `Σ`: every terminal literal.
    pub fn terminals(&self) -> BTreeSet<&str> {
        self.rule_sets
            .iter()
            .flat_map(|r| r.alternatives.iter().flatten())
            .filter_map(|sym| match sym {
                Symbol::Terminal(t) => Some(t.as_str()),
                Symbol::NonTerminal(_) => None,
            })
            .collect()
    }

    /// `Π` in textual order, paired with each production's position.
    pub fn productions(&self) -> impl Iterator<Item = (ProductionRef, Production)> + '_ {
        self.rule_sets.iter().enumerate().flat_map(|(i, rs)| {
            rs.alternatives.iter().enumerate().map(move |(j, alt)| {
                (
                    ProductionRef {
                        rule_set: i,
                        alternative: j,
                    },
                    Production {
                        lhs: rs.lhs.clone(),
                        rhs: alt.clone(),
                    },
                )
            })
        })
    }

    pub fn production(&self, r: ProductionRef) -> Option<Production> {
        let rs = self.rule_sets.get(r.rule_set)?;
        let alt = rs.alternatives.get(r.alternative)?;
        Some(Production {
            lhs: rs.lhs.clone(),
            rhs: alt.clone(),
        })
    }

    /// Returns a copy with rule set `index` replaced. Panics if out of range.
    pub(crate) fn replace_rule_set(&self, index: usize, rule_set: RuleSet) -> Grammar {
        let mut rule_sets = self.rule_sets.clone();
        rule_sets[index] = rule_set;
        Grammar {
            rule_sets: merge_rule_sets(rule_sets),
            start: self.start.clone(),
        }
    }
}

/// Merges rule sets with the same lhs into the first occurrence. Alternatives
/// of later duplicates are appended unless already present.
fn merge_rule_sets(rule_sets: Vec<RuleSet>) -> Vec<RuleSet> {
    let mut out: Vec<RuleSet> = Vec::with_capacity(rule_sets.len());
    for rs in rule_sets {
        match out.iter_mut().find(|r| r.lhs == rs.lhs) {
            Some(existing) => {
                for alt in rs.alternatives {
                    if !existing.alternatives.contains(&alt) {
                        existing.alternatives.push(alt);
                    }
                }
            }
            None => out.push(rs),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single() -> Grammar {
        Grammar::new(vec![RuleSet::new("s", vec![vec![Symbol::t("a")]])])
    }

    #[test]
    fn single_rule_is_valid() {
        let g = single();
        assert!(g.is_valid());
        assert_eq!(g.nonterminal_count(), 1);
        assert_eq!(g.production_count(), 1);
        assert_eq!(g.start(), Some("s"));
    }

    #[test]
    fn dangling_nonterminal_is_invalid() {
        let g = Grammar::new(vec![RuleSet::new("s", vec![vec![Symbol::nt("t"), Symbol::t("a")]])]);
        assert!(!g.is_valid());
        assert_eq!(g.undefined_nonterminals(), vec!["t"]);
    }

    #[test]
    fn empty_grammar() {
        let g = Grammar::empty();
        assert!(!g.is_valid());
        assert_eq!(g.nonterminal_count(), 0);
        assert_eq!(g.production_count(), 0);
    }

    #[test]
    fn rule_set_without_alternatives_is_invalid() {
        let g = Grammar::new(vec![RuleSet::new("s", vec![])]);
        assert!(!g.is_valid());
    }

    #[test]
    fn start_without_rule_set_is_invalid() {
        let g = Grammar::with_start(vec![RuleSet::new("s", vec![vec![Symbol::t("a")]])], "x");
        assert!(!g.is_valid());
    }

    #[test]
    fn two_alternatives_count_as_two_productions() {
        let g = Grammar::new(vec![RuleSet::new(
            "s",
            vec![vec![Symbol::t("a")], vec![Symbol::t("b")]],
        )]);
        assert_eq!(g.production_count(), 2);
    }

    #[test]
    fn duplicate_rule_sets_are_merged() {
        let g = Grammar::new(vec![
            RuleSet::new("s", vec![vec![Symbol::t("a")], vec![Symbol::nt("t")]]),
            RuleSet::new("t", vec![vec![Symbol::t("b")]]),
            RuleSet::new("s", vec![vec![Symbol::t("a")], vec![Symbol::t("c")]]),
        ]);
        assert_eq!(g.nonterminal_count(), 2);
        assert_eq!(
            g.rule_sets()[0].alternatives,
            vec![vec![Symbol::t("a")], vec![Symbol::nt("t")], vec![Symbol::t("c")]]
        );
        assert!(g.is_valid());
    }

    #[test]
    fn duplicate_alternatives_inside_one_rule_set_are_kept() {
        let g = Grammar::new(vec![RuleSet::new(
            "s",
            vec![vec![Symbol::t("a")], vec![Symbol::t("a")]],
        )]);
        assert_eq!(g.production_count(), 2);
    }

    #[test]
    fn derived_views() {
        let g = Grammar::new(vec![
            RuleSet::new("s", vec![vec![Symbol::nt("t"), Symbol::t("x")], vec![]]),
            RuleSet::new("t", vec![vec![Symbol::t("y"), Symbol::nt("u")]]),
        ]);
        assert_eq!(g.nonterminals().into_iter().collect::<Vec<_>>(), vec!["s", "t", "u"]);
        assert_eq!(g.terminals().into_iter().collect::<Vec<_>>(), vec!["x", "y"]);
        assert_eq!(g.productions().count(), 3);
        let p = g
            .production(ProductionRef {
                rule_set: 0,
                alternative: 1,
            })
            .unwrap();
        assert_eq!(p.to_string(), "<s> ::= \"\"");
    }
}
