//! Reading and writing BNF text.
//!
//! The accepted syntax is plain BNF, one rule set per line:
//!
//! ```text
//! <expr> ::= <term> "+" <expr> | <term>
//!          | "(" <expr> ")"
//! ```
//!
//! Lines that begin with `|` continue the previous rule set. Terminals are
//! double-quoted with no escapes; `""` is the empty string. EBNF constructs
//! (quantifiers, character classes, bracketed groups) are rejected with a
//! [`Diagnostic`] carrying the line number and fix hints meant to be fed back
//! to a language model.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{is_valid_nonterminal_name, Alternative, Grammar, RuleSet, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DiagnosticCode {
    InvalidRule,
    MissingDefinitionOperator,
    LackOfAlternatives,
    UnterminatedTerminal,
    UnsupportedSymbol,
    UnwrappedNonTerminal,
    MisplacedBracket,
    MissingAlternativeSeparator,
    /// A non-terminal is referenced but has no rule set.
    UndefinedNonTerminal,
    /// The text contains no rule at all.
    EmptyGrammar,
}

/// A syntax or validity error with its 1-based line number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub code: DiagnosticCode,
    pub message: String,
    pub hints: Vec<String>,
}

impl Diagnostic {
    fn new(line: usize, code: DiagnosticCode, message: impl Into<String>) -> Self {
        Diagnostic {
            line,
            code,
            message: message.into(),
            hints: hints_for(code),
        }
    }

    /// Feedback text for one diagnostic.
    pub fn render(&self) -> String {
        let mut out = format!("Line {}: {}.\n", self.line, self.message);
        match self.hints.as_slice() {
            [] => {}
            [one] => {
                out.push_str("This error is likely due to the reason that ");
                out.push_str(one);
                out.push('\n');
            }
            many => {
                out.push_str("This error is likely due to not satisfying one of the following requirements:\n");
                for (i, hint) in many.iter().enumerate() {
                    out.push_str(&format!("{}. {}\n", i + 1, hint));
                }
            }
        }
        out
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {:?}: {}", self.line, self.code, self.message)
    }
}

/// Renders a list of diagnostics as one feedback block.
pub fn render_diagnostics(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(Diagnostic::render)
        .collect::<Vec<_>>()
        .join("\n")
}

fn hints_for(code: DiagnosticCode) -> Vec<String> {
    use DiagnosticCode::*;
    let hints: &[&str] = match code {
        InvalidRule => &[
            "A rule MUST start with a non-terminal definition;",
            "A non-terminal symbol MUST be in angle brackets, e.g. <non-terminal>;",
            "A non-terminal definition must be followed by '::=' to indicate the start of the right-hand side;",
        ],
        MissingDefinitionOperator => &[
            "A non-terminal definition must be followed by '::=' to indicate the start of the right-hand side;",
            "Operators such as ':=', '=' or '->' are not standard BNF and MUST be replaced by '::=';",
        ],
        LackOfAlternatives => &["the right-hand side is not defined after '::='."],
        UnterminatedTerminal => &[
            "a terminal symbol is opened with a double quote but never closed; each terminal symbol MUST be quoted with double quotes on both sides and MUST NOT contain double quotes.",
        ],
        UnsupportedSymbol => &[
            "Only standard BNF is allowed; quantifiers such as '*', '+' and '?' MUST NOT be used, write a recursive rule instead;",
            "Character classes such as [a-z] MUST NOT be used, list every terminal as its own alternative, e.g. <letter> ::= \"a\" | \"b\";",
            "Each terminal symbol MUST be quoted with double quotes, and symbols that belong to the language MUST be written as terminals;",
        ],
        UnwrappedNonTerminal => &[
            "a non-terminal symbol is not wrapped in angle brackets; a non-terminal symbol MUST be in angle brackets, e.g. <non-terminal>, and a terminal symbol MUST be quoted with double quotes.",
        ],
        MisplacedBracket => &[
            "Brackets MUST NOT be used to group symbols, standard BNF has no grouping or optional parts;",
            "Introduce a new non-terminal for a group of symbols, e.g. <group> ::= \"a\" \"b\";",
            "A bracket that belongs to the language MUST be quoted as a terminal symbol, e.g. \"(\";",
        ],
        MissingAlternativeSeparator => &[
            "an alternative is not preceded by the separator '|'; alternatives MUST be separated by '|', and an alternative continued on a new line MUST start with '|'.",
        ],
        UndefinedNonTerminal => &[
            "a non-terminal symbol is used without being defined; every non-terminal symbol MUST have at least one production rule.",
        ],
        EmptyGrammar => &[
            "no production rule was found; the grammar MUST contain at least one rule of the form <non-terminal> ::= ...",
        ],
    };
    hints.iter().map(|s| s.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Nt(String),
    T(String),
    Define,
    Pipe,
    Word(String),
    Bad(DiagnosticCode, String),
}

fn lex_line(line: &str) -> Vec<Tok> {
    let chars: Vec<char> = line.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '"' => match chars[i + 1..].iter().position(|&x| x == '"') {
                Some(len) => {
                    toks.push(Tok::T(chars[i + 1..i + 1 + len].iter().collect()));
                    i += len + 2;
                }
                None => {
                    toks.push(Tok::Bad(
                        DiagnosticCode::UnterminatedTerminal,
                        "Unterminated terminal symbol".into(),
                    ));
                    return toks;
                }
            },
            '<' => match chars[i + 1..].iter().position(|&x| x == '>') {
                Some(len) => {
                    let name: String = chars[i + 1..i + 1 + len].iter().collect();
                    if is_valid_nonterminal_name(&name) {
                        toks.push(Tok::Nt(name));
                    } else {
                        toks.push(Tok::Bad(
                            DiagnosticCode::InvalidRule,
                            format!("Invalid non-terminal name '<{name}>'"),
                        ));
                    }
                    i += len + 2;
                }
                None => {
                    toks.push(Tok::Bad(
                        DiagnosticCode::UnwrappedNonTerminal,
                        "Non-terminal symbol is missing its closing '>'".into(),
                    ));
                    i += 1;
                }
            },
            ':' if chars[i..].starts_with(&[':', ':', '=']) => {
                toks.push(Tok::Define);
                i += 3;
            }
            '|' => {
                toks.push(Tok::Pipe);
                i += 1;
            }
            '*' | '+' | '?' => {
                toks.push(Tok::Bad(
                    DiagnosticCode::UnsupportedSymbol,
                    format!("Unsupported symbol '{c}'"),
                ));
                i += 1;
            }
            '[' | '(' | '{' => {
                let next = chars[i + 1..].iter().find(|x| !x.is_whitespace());
                let wraps_symbols = matches!(next, Some('"') | Some('<'));
                if c == '[' && !wraps_symbols {
                    toks.push(Tok::Bad(
                        DiagnosticCode::UnsupportedSymbol,
                        "Unsupported character class".into(),
                    ));
                } else {
                    toks.push(Tok::Bad(
                        DiagnosticCode::MisplacedBracket,
                        format!("Misplaced bracket '{c}'"),
                    ));
                }
                i += 1;
            }
            ']' | ')' | '}' => {
                toks.push(Tok::Bad(
                    DiagnosticCode::MisplacedBracket,
                    format!("Misplaced bracket '{c}'"),
                ));
                i += 1;
            }
            '\'' => {
                toks.push(Tok::Bad(
                    DiagnosticCode::UnsupportedSymbol,
                    "Unsupported single-quoted terminal".into(),
                ));
                i += 1;
            }
            c if c.is_alphanumeric() || c == '_' || c == '-' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '-') {
                    i += 1;
                }
                toks.push(Tok::Word(chars[start..i].iter().collect()));
            }
            other => {
                toks.push(Tok::Bad(
                    DiagnosticCode::UnsupportedSymbol,
                    format!("Unsupported symbol '{other}'"),
                ));
                i += 1;
            }
        }
    }
    toks
}

struct PendingRule {
    lhs: String,
    line: usize,
    alternatives: Vec<Alternative>,
    refs: Vec<(String, usize)>,
}

/// Parses the alternatives of a right-hand side token slice.
fn parse_alternatives(
    toks: &[Tok],
    line: usize,
    refs: &mut Vec<(String, usize)>,
) -> Result<Vec<Alternative>, Diagnostic> {
    let mut alts = Vec::new();
    for part in toks.split(|t| *t == Tok::Pipe) {
        if part.is_empty() {
            return Err(Diagnostic::new(
                line,
                DiagnosticCode::LackOfAlternatives,
                "Empty alternative next to '|'",
            ));
        }
        let mut alt = Vec::with_capacity(part.len());
        for tok in part {
            match tok {
                Tok::Nt(name) => {
                    refs.push((name.clone(), line));
                    alt.push(Symbol::NonTerminal(name.clone()));
                }
                // "" is epsilon; dropping it keeps the language unchanged.
                Tok::T(text) if text.is_empty() => {}
                Tok::T(text) => alt.push(Symbol::Terminal(text.clone())),
                Tok::Word(w) => {
                    return Err(Diagnostic::new(
                        line,
                        DiagnosticCode::UnwrappedNonTerminal,
                        format!("Symbol '{w}' is neither wrapped in angle brackets nor quoted"),
                    ))
                }
                Tok::Define => {
                    return Err(Diagnostic::new(
                        line,
                        DiagnosticCode::InvalidRule,
                        "Found a second '::=' on one line; each rule MUST be on its own line",
                    ))
                }
                Tok::Bad(code, msg) => return Err(Diagnostic::new(line, *code, msg.clone())),
                Tok::Pipe => unreachable!(),
            }
        }
        alts.push(alt);
    }
    Ok(alts)
}

fn first_bad(toks: &[Tok], line: usize) -> Option<Diagnostic> {
    toks.iter().find_map(|t| match t {
        Tok::Bad(code, msg) => Some(Diagnostic::new(line, *code, msg.clone())),
        _ => None,
    })
}

struct Parsed {
    rules: Vec<PendingRule>,
    line_count: usize,
}

fn parse_lines(text: &str) -> Result<Parsed, Vec<Diagnostic>> {
    let mut rules: Vec<PendingRule> = Vec::new();
    let mut diagnostics = Vec::new();
    // Whether a rule header was seen (even an erroneous one) for continuations.
    let mut have_rule = false;
    let mut last_rule_ok = false;
    let mut line_count = 0;

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        line_count = line_no;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.trim().is_empty() {
            continue;
        }
        let indented = raw.starts_with(char::is_whitespace);
        let toks = lex_line(raw);

        if toks.first() == Some(&Tok::Pipe) {
            if !have_rule {
                diagnostics.push(Diagnostic::new(
                    line_no,
                    DiagnosticCode::InvalidRule,
                    "Alternative continuation without a preceding rule",
                ));
                continue;
            }
            let mut refs = Vec::new();
            match parse_alternatives(&toks[1..], line_no, &mut refs) {
                Ok(alts) => {
                    if last_rule_ok {
                        let rule = rules.last_mut().expect("rule present");
                        rule.alternatives.extend(alts);
                        rule.refs.extend(refs);
                    }
                }
                Err(d) => {
                    diagnostics.push(d);
                }
            }
            continue;
        }

        if let Some(def) = toks.iter().position(|t| *t == Tok::Define) {
            have_rule = true;
            last_rule_ok = false;
            let lhs = match &toks[..def] {
                [Tok::Nt(name)] => name.clone(),
                [] => {
                    diagnostics.push(Diagnostic::new(
                        line_no,
                        DiagnosticCode::InvalidRule,
                        "Missing non-terminal before '::='",
                    ));
                    continue;
                }
                [Tok::Word(w)] => {
                    diagnostics.push(Diagnostic::new(
                        line_no,
                        DiagnosticCode::UnwrappedNonTerminal,
                        format!("Non-terminal '{w}' on the left-hand side is not wrapped in angle brackets"),
                    ));
                    continue;
                }
                other => {
                    let d = first_bad(other, line_no).unwrap_or_else(|| {
                        Diagnostic::new(
                            line_no,
                            DiagnosticCode::InvalidRule,
                            "Left-hand side MUST be a single non-terminal",
                        )
                    });
                    diagnostics.push(d);
                    continue;
                }
            };
            let rhs = &toks[def + 1..];
            if rhs.is_empty() {
                diagnostics.push(Diagnostic::new(
                    line_no,
                    DiagnosticCode::LackOfAlternatives,
                    format!("Lack of alternatives for <{lhs}>"),
                ));
                continue;
            }
            let mut refs = Vec::new();
            match parse_alternatives(rhs, line_no, &mut refs) {
                Ok(alternatives) => {
                    rules.push(PendingRule {
                        lhs,
                        line: line_no,
                        alternatives,
                        refs,
                    });
                    last_rule_ok = true;
                }
                Err(d) => diagnostics.push(d),
            }
            continue;
        }

        // No '::=' and no leading '|'.
        let d = match toks.first() {
            Some(Tok::Nt(_)) if have_rule && indented => Diagnostic::new(
                line_no,
                DiagnosticCode::MissingAlternativeSeparator,
                "Line continues a rule without the separator '|'",
            ),
            Some(Tok::Nt(name)) => Diagnostic::new(
                line_no,
                DiagnosticCode::MissingDefinitionOperator,
                format!("Missing '::=' after <{name}>"),
            ),
            Some(Tok::T(_)) if have_rule => Diagnostic::new(
                line_no,
                DiagnosticCode::MissingAlternativeSeparator,
                "Line continues a rule without the separator '|'",
            ),
            Some(Tok::Bad(code, msg)) => Diagnostic::new(line_no, *code, msg.clone()),
            _ => Diagnostic::new(line_no, DiagnosticCode::InvalidRule, "Invalid production rule"),
        };
        diagnostics.push(d);
    }

    if diagnostics.is_empty() {
        Ok(Parsed { rules, line_count })
    } else {
        Err(diagnostics)
    }
}

/// Parses BNF text. Only syntax is checked; see [`parse_valid_bnf`] for the
/// full validity check.
pub fn parse_bnf(text: &str) -> Result<Grammar, Vec<Diagnostic>> {
    let parsed = parse_lines(text)?;
    Ok(build(parsed.rules))
}

fn build(rules: Vec<PendingRule>) -> Grammar {
    Grammar::new(rules.into_iter().map(|r| RuleSet::new(r.lhs, r.alternatives)).collect())
}

/// Parses BNF text and additionally requires the grammar to be valid: at
/// least one rule and no undefined non-terminals.
pub fn parse_valid_bnf(text: &str) -> Result<Grammar, Vec<Diagnostic>> {
    let parsed = parse_lines(text)?;
    if parsed.rules.is_empty() {
        return Err(vec![Diagnostic::new(
            1,
            DiagnosticCode::EmptyGrammar,
            "The grammar contains no production rules",
        )]);
    }
    let defined: std::collections::HashSet<&str> = parsed.rules.iter().map(|r| r.lhs.as_str()).collect();
    let mut diagnostics = Vec::new();
    let mut reported = std::collections::HashSet::new();
    for rule in &parsed.rules {
        for (name, line) in &rule.refs {
            if !defined.contains(name.as_str()) && reported.insert(name.clone()) {
                diagnostics.push(Diagnostic::new(
                    *line,
                    DiagnosticCode::UndefinedNonTerminal,
                    format!("Non-terminal <{name}> is used but never defined"),
                ));
            }
        }
    }
    debug_assert!(parsed.rules.iter().all(|r| r.line <= parsed.line_count));
    if !diagnostics.is_empty() {
        return Err(diagnostics);
    }
    let g = build(parsed.rules);
    debug_assert!(g.is_valid());
    Ok(g)
}

/// Canonical text: one rule set per line, single spaces, epsilon as `""`.
/// If the start symbol owns a rule set that is not first, that rule set is
/// printed first so the text keeps the same entry point.
pub fn print_bnf(g: &Grammar) -> String {
    let sets = g.rule_sets();
    let start_idx = g.start().and_then(|s| g.rule_set_index(s)).unwrap_or(0);
    let order = std::iter::once(start_idx)
        .filter(|_| !sets.is_empty())
        .chain((0..sets.len()).filter(|&i| i != start_idx));
    let mut lines = Vec::with_capacity(sets.len());
    for i in order {
        let rs = &sets[i];
        let alts: Vec<String> = rs
            .alternatives
            .iter()
            .map(|alt| {
                if alt.is_empty() {
                    "\"\"".to_string()
                } else {
                    alt.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
                }
            })
            .collect();
        if alts.is_empty() {
            lines.push(format!("<{}> ::=", rs.lhs));
        } else {
            lines.push(format!("<{}> ::= {}", rs.lhs, alts.join(" | ")));
        }
    }
    lines.join("\n")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("the response contains a code fence with nothing inside")]
    EmptyFence,
    #[error("the response is empty")]
    EmptyResponse,
}

/// Grammar text pulled out of a model response.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extracted {
    pub text: String,
    /// False when no fence was found and the whole response was used.
    pub fenced: bool,
}

/// Returns the trimmed content of the first triple-backtick fence, or the
/// whole trimmed response when there is no fence.
pub fn extract_fenced_grammar(response: &str) -> Result<Extracted, ExtractError> {
    const FENCE: &str = "```";
    let Some(open) = response.find(FENCE) else {
        let text = response.trim();
        if text.is_empty() {
            return Err(ExtractError::EmptyResponse);
        }
        return Ok(Extracted {
            text: text.to_string(),
            fenced: false,
        });
    };
    let after = &response[open + FENCE.len()..];
    let first_line_end = after.find('\n').unwrap_or(after.len());
    let first_line = &after[..first_line_end];
    let body_start = if first_line.contains(FENCE) {
        0
    } else if !first_line.trim().is_empty()
        && first_line
            .trim()
            .chars()
            .all(|c| c.is_alphanumeric() || c == '-' || c == '_' || c == '+')
    {
        // language tag such as ```bnf
        first_line_end
    } else {
        0
    };
    let body = &after[body_start..];
    let body = match body.find(FENCE) {
        Some(close) => &body[..close],
        None => body,
    };
    let text = body.trim();
    if text.is_empty() {
        return Err(ExtractError::EmptyFence);
    }
    Ok(Extracted {
        text: text.to_string(),
        fenced: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use DiagnosticCode::*;

    fn codes(text: &str) -> Vec<DiagnosticCode> {
        parse_bnf(text).unwrap_err().iter().map(|d| d.code).collect()
    }

    #[test]
    fn two_alternatives() {
        let g = parse_bnf(r#"<s> ::= "a" | "b""#).unwrap();
        assert_eq!(g.nonterminal_count(), 1);
        assert_eq!(g.rule_sets()[0].alternatives.len(), 2);
    }

    #[test]
    fn empty_rhs_is_lack_of_alternatives() {
        let errs = parse_bnf("<e> ::=").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].code, LackOfAlternatives);
        assert!(errs[0]
            .render()
            .contains("This error is likely due to the reason that the right-hand side is not defined after '::='."));
    }

    #[test]
    fn character_class_is_unsupported() {
        assert_eq!(codes("<s> ::= [a-z]+"), vec![UnsupportedSymbol]);
    }

    #[test]
    fn quantifiers_are_unsupported() {
        assert_eq!(codes(r#"<s> ::= "a"*"#), vec![UnsupportedSymbol]);
        assert_eq!(codes(r#"<s> ::= <t>? "b""#), vec![UnsupportedSymbol]);
        assert_eq!(codes(r#"<s> ::= "a"+"#), vec![UnsupportedSymbol]);
    }

    #[test]
    fn bracket_groups_are_misplaced() {
        assert_eq!(codes(r#"<s> ::= ("a" "b") | "c""#), vec![MisplacedBracket]);
        assert_eq!(codes(r#"<s> ::= ["a" "b"]"#), vec![MisplacedBracket]);
        assert_eq!(codes(r#"<s> ::= "a" )"#), vec![MisplacedBracket]);
    }

    #[test]
    fn bare_word_is_unwrapped_nonterminal() {
        assert_eq!(codes(r#"<s> ::= expr "+" <t>"#), vec![UnwrappedNonTerminal]);
        assert_eq!(codes(r#"s ::= "a""#), vec![UnwrappedNonTerminal]);
        assert_eq!(codes(r#"<s> ::= <t "a""#), vec![UnwrappedNonTerminal]);
    }

    #[test]
    fn continuation_without_pipe_is_missing_separator() {
        let text = "<s> ::= \"a\"\n        \"b\"";
        let errs = parse_bnf(text).unwrap_err();
        assert_eq!(errs[0].code, MissingAlternativeSeparator);
        assert_eq!(errs[0].line, 2);
        assert_eq!(
            codes("<s> ::= \"a\"\n    <t>\n<t> ::= \"b\""),
            vec![MissingAlternativeSeparator]
        );
    }

    #[test]
    fn other_operators_are_missing_definition() {
        assert_eq!(codes(r#"<s> := "a""#), vec![MissingDefinitionOperator]);
        assert_eq!(codes(r#"<s> "a""#), vec![MissingDefinitionOperator]);
    }

    #[test]
    fn invalid_rule_wording() {
        let errs = parse_bnf("hello world").unwrap_err();
        assert_eq!(errs[0].code, InvalidRule);
        let text = errs[0].render();
        assert!(text.contains("This error is likely due to not satisfying one of the following requirements:"));
        assert!(text.contains("1. A rule MUST start with a non-terminal definition;"));
        assert!(text.contains("2. A non-terminal symbol MUST be in angle brackets, e.g. <non-terminal>;"));
        assert!(text.contains(
            "3. A non-terminal definition must be followed by '::=' to indicate the start of the right-hand side;"
        ));
    }

    #[test]
    fn unterminated_terminal() {
        assert_eq!(codes(r#"<s> ::= "abc"#), vec![UnterminatedTerminal]);
    }

    #[test]
    fn trailing_pipe_is_lack_of_alternatives() {
        assert_eq!(codes(r#"<s> ::= "a" |"#), vec![LackOfAlternatives]);
    }

    #[test]
    fn continuation_lines_fold_into_previous_rule() {
        let g = parse_bnf("<s> ::= \"a\"\n    | \"b\"\n    | <t>\n<t> ::= \"c\"").unwrap();
        assert_eq!(g.nonterminal_count(), 2);
        assert_eq!(g.rule_sets()[0].alternatives.len(), 3);
    }

    #[test]
    fn diagnostics_are_collected_per_line() {
        let errs = parse_bnf("<s> ::= \"a\"*\n<t> ::=\n<u> ::= \"ok\"").unwrap_err();
        assert_eq!(errs.len(), 2);
        assert_eq!((errs[0].line, errs[0].code), (1, UnsupportedSymbol));
        assert_eq!((errs[1].line, errs[1].code), (2, LackOfAlternatives));
    }

    #[test]
    fn terminals_keep_spaces_and_epsilon_is_empty() {
        let g = parse_bnf(r#"<s> ::= "a b" " " | """#).unwrap();
        let alts = &g.rule_sets()[0].alternatives;
        assert_eq!(alts[0], vec![Symbol::t("a b"), Symbol::t(" ")]);
        assert!(alts[1].is_empty());
    }

    #[test]
    fn validity_diagnostics() {
        let errs = parse_valid_bnf("<s> ::= <t> \"a\"").unwrap_err();
        assert_eq!(errs[0].code, UndefinedNonTerminal);
        assert_eq!(errs[0].line, 1);
        let errs = parse_valid_bnf("\n\n").unwrap_err();
        assert_eq!(errs[0].code, EmptyGrammar);
        assert!(parse_valid_bnf("<s> ::= \"a\"").is_ok());
        // syntactically fine
        assert!(parse_bnf("<s> ::= <t> \"a\"").is_ok());
    }

    #[test]
    fn print_simple() {
        let g = parse_bnf(r#"<s> ::= "a""#).unwrap();
        assert_eq!(print_bnf(&g), r#"<s> ::= "a""#);
    }

    #[test]
    fn print_epsilon() {
        let g = Grammar::new(vec![RuleSet::new("s", vec![vec![Symbol::t("a")], vec![]])]);
        assert_eq!(print_bnf(&g), r#"<s> ::= "a" | """#);
        assert_eq!(parse_bnf(&print_bnf(&g)).unwrap(), g);
    }

    #[test]
    fn print_puts_start_first() {
        let g = Grammar::with_start(
            vec![
                RuleSet::new("t", vec![vec![Symbol::t("b")]]),
                RuleSet::new("s", vec![vec![Symbol::nt("t")]]),
            ],
            "s",
        );
        assert_eq!(print_bnf(&g), "<s> ::= <t>\n<t> ::= \"b\"");
    }

    #[test]
    fn fence_extraction() {
        let e = extract_fenced_grammar("```\n<s> ::= \"a\"\n```").unwrap();
        assert_eq!(e.text, "<s> ::= \"a\"");
        assert!(e.fenced);

        let e = extract_fenced_grammar("Here you go:\n```bnf\n<s> ::= \"a\"\n```\nHope it helps.").unwrap();
        assert_eq!(e.text, "<s> ::= \"a\"");

        let e = extract_fenced_grammar("```<s> ::= \"a\"```").unwrap();
        assert_eq!(e.text, "<s> ::= \"a\"");

        let e = extract_fenced_grammar("  <s> ::= \"a\"\n").unwrap();
        assert_eq!(e.text, "<s> ::= \"a\"");
        assert!(!e.fenced);

        assert_eq!(extract_fenced_grammar("```\n\n```"), Err(ExtractError::EmptyFence));
        assert_eq!(extract_fenced_grammar("   "), Err(ExtractError::EmptyResponse));
    }

    #[test]
    fn fence_takes_first_of_two() {
        let e = extract_fenced_grammar("```\n<a> ::= \"1\"\n```\ntext\n```\n<b> ::= \"2\"\n```").unwrap();
        assert_eq!(e.text, "<a> ::= \"1\"");
    }
}
