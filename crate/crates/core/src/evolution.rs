//! The hybrid genetic search over grammars: fitness, selection, crossover,
//! local and model-driven mutation, and the generational loop.
//!
//! All structural randomness comes from one seeded [`ChaCha8Rng`] per run, so
//! a run against a scripted backend is byte-reproducible.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnf::{extract_fenced_grammar, parse_bnf, parse_valid_bnf, print_bnf, Diagnostic};
use crate::gateway::prompts::{render_dp_prompt, render_mutation_prompt};
use crate::gateway::{Gateway, TemplateId, DEFAULT_MAX_TOKENS};
use crate::grammar::{Grammar, RuleSet, Symbol};
use crate::recognizer::Recognizer;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub space_insert_prob: f64,
    /// Probability of local rather than model-driven mutation.
    pub local_vs_llm_prob: f64,
    pub rng_seed: u64,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 10,
            generations: 5,
            crossover_rate: 0.7,
            mutation_rate: 0.3,
            space_insert_prob: 0.1,
            local_vs_llm_prob: 0.5,
            rng_seed: 0,
            temperature: 0.7,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    Probability { name: &'static str, value: String },
    #[error("population size must be at least 2, got {0}")]
    Population(usize),
    #[error("generations must be at least 1")]
    Generations,
    #[error("max tokens must be positive")]
    MaxTokens,
    #[error("temperature must be a non-negative number")]
    Temperature,
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("crossover rate", self.crossover_rate),
            ("mutation rate", self.mutation_rate),
            ("space insert probability", self.space_insert_prob),
            ("local mutation probability", self.local_vs_llm_prob),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Probability {
                    name,
                    value: value.to_string(),
                });
            }
        }
        if self.population_size < 2 {
            return Err(ConfigError::Population(self.population_size));
        }
        if self.generations == 0 {
            return Err(ConfigError::Generations);
        }
        if self.max_tokens == 0 {
            return Err(ConfigError::MaxTokens);
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ConfigError::Temperature);
        }
        Ok(())
    }
}

/// A scored grammar. `fitness == -1` exactly when `grammar` is absent or not
/// valid.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub source_text: String,
    pub grammar: Option<Grammar>,
    pub fitness: i64,
    /// Parser feedback when the text is not a valid grammar.
    pub diagnostics: Vec<Diagnostic>,
    /// Gateway or extraction failure that produced this candidate.
    pub error: Option<String>,
}

impl Candidate {
    pub fn from_grammar<S: AsRef<str>>(grammar: Grammar, positives: &[S], negatives: &[S]) -> Self {
        let fitness = grammar_fitness(&grammar, positives, negatives);
        let diagnostics = if grammar.is_valid() {
            Vec::new()
        } else {
            parse_valid_bnf(&print_bnf(&grammar)).err().unwrap_or_default()
        };
        Candidate {
            source_text: print_bnf(&grammar),
            grammar: Some(grammar),
            fitness,
            diagnostics,
            error: None,
        }
    }

    /// Parses grammar text (already extracted from a response).
    pub fn from_text<S: AsRef<str>>(text: &str, positives: &[S], negatives: &[S]) -> Self {
        match parse_valid_bnf(text) {
            Ok(g) => {
                let fitness = grammar_fitness(&g, positives, negatives);
                Candidate {
                    source_text: text.to_string(),
                    grammar: Some(g),
                    fitness,
                    diagnostics: Vec::new(),
                    error: None,
                }
            }
            Err(diagnostics) => Candidate {
                source_text: text.to_string(),
                grammar: parse_bnf(text).ok(),
                fitness: -1,
                diagnostics,
                error: None,
            },
        }
    }

    /// Extracts the fenced grammar from a raw model response and scores it.
    pub fn from_response<S: AsRef<str>>(response: &str, positives: &[S], negatives: &[S]) -> Self {
        match extract_fenced_grammar(response) {
            Ok(extracted) => Candidate::from_text(&extracted.text, positives, negatives),
            Err(e) => Candidate {
                error: Some(e.to_string()),
                ..Candidate::from_text("", positives, negatives)
            },
        }
    }

    /// A candidate standing in for a failed model call.
    pub fn failed(error: impl Into<String>) -> Self {
        Candidate {
            source_text: String::new(),
            grammar: None,
            fitness: -1,
            diagnostics: Vec::new(),
            error: Some(error.into()),
        }
    }

    /// The grammar to breed from; unparsable text contributes no rule sets.
    pub fn genome(&self) -> Grammar {
        self.grammar.clone().unwrap_or_default()
    }
}

/// Positives accepted plus negatives rejected, or -1 for an invalid grammar.
/// A membership test that exceeds the chart limit counts as rejection.
pub fn grammar_fitness<S: AsRef<str>>(g: &Grammar, positives: &[S], negatives: &[S]) -> i64 {
    let Ok(rec) = Recognizer::new(g) else {
        return -1;
    };
    let accepted = |s: &str| match rec.accepts(s) {
        Ok(b) => b,
        Err(e) => {
            log::warn!("membership of {s:?} treated as rejected: {e}");
            false
        }
    };
    let pos = positives.iter().filter(|p| accepted(p.as_ref())).count();
    let neg = negatives.iter().filter(|n| !accepted(n.as_ref())).count();
    (pos + neg) as i64
}

pub fn fitness<S: AsRef<str>>(candidate_text: &str, positives: &[S], negatives: &[S]) -> i64 {
    match parse_valid_bnf(candidate_text) {
        Ok(g) => grammar_fitness(&g, positives, negatives),
        Err(_) => -1,
    }
}

/// Indices of the best half (`⌊len/2⌋`) in decreasing fitness order; ties
/// keep population order.
pub fn select_indices(fitness: &[i64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[b].cmp(&fitness[a]));
    order.truncate(fitness.len() / 2);
    order
}

pub fn select(population: &[Candidate]) -> Vec<Candidate> {
    let scores: Vec<i64> = population.iter().map(|c| c.fitness).collect();
    select_indices(&scores)
        .into_iter()
        .map(|i| population[i].clone())
        .collect()
}

/// How a crossover result was formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossOutcome {
    /// One parent returned unchanged (0 = a, 1 = b).
    Parent(usize),
    /// Rule sets `1..w-1` of a followed by `w..` of b (1-based `w`).
    Spliced { w: usize },
}

/// Splices two grammars at a uniformly drawn point with probability `rho`.
/// The result keeps `a`'s start symbol even when no rule set defines it.
pub fn crossover<R: Rng + ?Sized>(a: &Grammar, b: &Grammar, rho: f64, rng: &mut R) -> (Grammar, CrossOutcome) {
    let parent = |i: usize| {
        let g = if i == 0 { a } else { b };
        (g.clone(), CrossOutcome::Parent(i))
    };
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return parent(rng.gen_range(0..2)),
        (false, true) => return parent(0),
        (true, false) => return parent(1),
        (false, false) => {}
    }
    if !rng.gen_bool(rho) {
        return parent(rng.gen_range(0..2));
    }
    let l = a.rule_sets().len().min(b.rule_sets().len());
    let w = rng.gen_range(1..=l);
    (splice(a, b, w), CrossOutcome::Spliced { w })
}

/// Deterministic splice at 1-based point `w`, `1 <= w <= min(|R_a|, |R_b|)`.
pub fn splice(a: &Grammar, b: &Grammar, w: usize) -> Grammar {
    let mut rule_sets: Vec<RuleSet> = a.rule_sets()[..w - 1].to_vec();
    rule_sets.extend_from_slice(&b.rule_sets()[w - 1..]);
    match a.start() {
        Some(s) => Grammar::with_start(rule_sets, s),
        None => Grammar::new(rule_sets),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("rule set index {index} out of range for {len} rule sets")]
pub struct IndexError {
    pub index: usize,
    pub len: usize,
}

fn map_rule_set(g: &Grammar, index: usize, mut f: impl FnMut(&mut Vec<Symbol>)) -> Result<Grammar, IndexError> {
    let rs = g.rule_sets().get(index).ok_or(IndexError {
        index,
        len: g.rule_sets().len(),
    })?;
    let mut rs = rs.clone();
    rs.alternatives.iter_mut().for_each(&mut f);
    Ok(g.replace_rule_set(index, rs))
}

/// Permutes every alternative of rule set `index` (0-based) uniformly.
pub fn shuffle_rule_set<R: Rng + ?Sized>(g: &Grammar, index: usize, rng: &mut R) -> Result<Grammar, IndexError> {
    map_rule_set(g, index, |alt| alt.shuffle(rng))
}

/// With probability `p` per alternative of rule set `index` (0-based), inserts
/// `I ~ Uniform{0..=|alt|}` single-space terminals, each before or after a
/// uniformly chosen symbol.
pub fn space_insert<R: Rng + ?Sized>(g: &Grammar, index: usize, p: f64, rng: &mut R) -> Result<Grammar, IndexError> {
    map_rule_set(g, index, |alt| {
        if !rng.gen_bool(p) {
            return;
        }
        let count = rng.gen_range(0..=alt.len());
        for _ in 0..count {
            let at = rng.gen_range(0..alt.len());
            let pos = if rng.gen_bool(0.5) { at } else { at + 1 };
            alt.insert(pos, Symbol::t(" "));
        }
    })
}

/// Which operator produced a logged candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Init,
    Crossover,
    LocalMutation,
    LlmMutation,
    ParentPassthrough,
    Dp,
    OpfFeedback,
}

/// One line of a run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub generation: usize,
    pub slot: usize,
    pub operator: Operator,
    pub fitness: i64,
    pub grammar_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl LogRecord {
    pub fn new(generation: usize, slot: usize, operator: Operator, c: &Candidate) -> Self {
        LogRecord {
            generation,
            slot,
            operator,
            fitness: c.fitness,
            grammar_text: c.source_text.clone(),
            error: c.error.clone(),
        }
    }
}

fn llm_candidate<S: AsRef<str>>(
    gw: &Gateway,
    template: TemplateId,
    prompt: String,
    cfg: &GaConfig,
    positives: &[S],
    negatives: &[S],
) -> (Candidate, bool) {
    let req = gw.request(template, prompt, cfg.temperature, cfg.max_tokens);
    match gw.complete(&req) {
        Ok(resp) => (Candidate::from_response(&resp.text, positives, negatives), true),
        Err(e) => (Candidate::failed(e.to_string()), false),
    }
}

/// Local mutation of a non-empty grammar: one uniformly chosen rule set is
/// shuffled, then given space insertions.
pub fn local_mutation<R: Rng + ?Sized>(g: &Grammar, space_insert_prob: f64, rng: &mut R) -> Grammar {
    let index = rng.gen_range(0..g.rule_sets().len());
    let shuffled = shuffle_rule_set(g, index, rng).expect("index in range");
    space_insert(&shuffled, index, space_insert_prob, rng).expect("index in range")
}

/// Mutates `g` locally or through the model. Empty grammars always go to
/// the model.
pub fn mutate<S: AsRef<str>, R: Rng + ?Sized>(
    g: &Grammar,
    positives: &[S],
    negatives: &[S],
    cfg: &GaConfig,
    rng: &mut R,
    gw: &Gateway,
) -> (Candidate, Operator) {
    if !g.is_empty() && rng.gen_bool(cfg.local_vs_llm_prob) {
        let m = local_mutation(g, cfg.space_insert_prob, rng);
        return (
            Candidate::from_grammar(m, positives, negatives),
            Operator::LocalMutation,
        );
    }
    let prompt = render_mutation_prompt(&print_bnf(g), positives, negatives);
    let (c, _) = llm_candidate(gw, TemplateId::Mutation, prompt, cfg, positives, negatives);
    (c, Operator::LlmMutation)
}

/// Where a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "at")]
pub enum StopPoint {
    /// A perfect initial candidate was found after this many calls.
    Initialization(usize),
    /// A perfect offspring was produced in this generation (1-based).
    Generation(usize),
    /// Every initialization call failed at the gateway.
    GatewayFailure,
    /// All generations ran without a perfect candidate.
    Exhausted,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub best: Candidate,
    pub log: Vec<LogRecord>,
    pub llm_calls: usize,
    pub stop: StopPoint,
    /// Best fitness seen after initialization and after each generation.
    pub best_by_generation: Vec<i64>,
}

struct Tracker {
    best: Option<Candidate>,
    log: Vec<LogRecord>,
}

impl Tracker {
    /// Records a candidate; returns true when it replaced the best.
    fn offer(&mut self, record: LogRecord, c: &Candidate) -> bool {
        self.log.push(record);
        let better = self.best.as_ref().is_none_or(|b| c.fitness > b.fitness);
        if better {
            self.best = Some(c.clone());
        }
        better
    }

    fn best_fitness(&self) -> i64 {
        self.best.as_ref().map_or(-1, |b| b.fitness)
    }
}

/// Runs the search. Returns as soon as a candidate accepts every positive and
/// rejects every negative.
pub fn run_hygenar<S: AsRef<str>>(positives: &[S], negatives: &[S], cfg: &GaConfig, gw: &Gateway) -> RunOutcome {
    let max_fitness = (positives.len() + negatives.len()) as i64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut calls = 0;
    let mut t = Tracker {
        best: None,
        log: Vec::new(),
    };
    let finish = |t: Tracker, calls: usize, stop: StopPoint, best_by_generation: Vec<i64>| RunOutcome {
        best: t.best.unwrap_or_else(|| Candidate::failed("no candidates")),
        log: t.log,
        llm_calls: calls,
        stop,
        best_by_generation,
    };

    let prompt = render_dp_prompt(positives, negatives);
    let mut population = Vec::with_capacity(cfg.population_size);
    let mut answered = 0;
    for slot in 0..cfg.population_size {
        let (c, ok) = llm_candidate(gw, TemplateId::DirectPrompt, prompt.clone(), cfg, positives, negatives);
        calls += 1;
        t.offer(LogRecord::new(0, slot, Operator::Init, &c), &c);
        if c.fitness == max_fitness {
            return finish(t, calls, StopPoint::Initialization(slot + 1), vec![max_fitness]);
        }
        answered += usize::from(ok);
        population.push(c);
    }
    let mut history = vec![t.best_fitness()];
    if answered == 0 {
        log::warn!("every initialization call failed; giving up");
        return finish(t, calls, StopPoint::GatewayFailure, history);
    }

    for generation in 1..=cfg.generations {
        let parents = select(&population);
        let mut next = Vec::with_capacity(cfg.population_size);
        while next.len() < cfg.population_size {
            let a = &parents[rng.gen_range(0..parents.len())];
            let b = &parents[rng.gen_range(0..parents.len())];
            let (child, how) = crossover(&a.genome(), &b.genome(), cfg.crossover_rate, &mut rng);
            let (c, op) = if rng.gen_bool(cfg.mutation_rate) {
                mutate(&child, positives, negatives, cfg, &mut rng, gw)
            } else {
                let c = match how {
                    // An unchanged parent keeps its original text and feedback.
                    CrossOutcome::Parent(i) => [a, b][i].clone(),
                    CrossOutcome::Spliced { .. } => Candidate::from_grammar(child, positives, negatives),
                };
                let op = match how {
                    CrossOutcome::Parent(_) => Operator::ParentPassthrough,
                    CrossOutcome::Spliced { .. } => Operator::Crossover,
                };
                (c, op)
            };
            calls += usize::from(op == Operator::LlmMutation);
            t.offer(LogRecord::new(generation, next.len(), op, &c), &c);
            if c.fitness == max_fitness {
                history.push(max_fitness);
                return finish(t, calls, StopPoint::Generation(generation), history);
            }
            next.push(c);
        }
        history.push(t.best_fitness());
        population = next;
    }
    finish(t, calls, StopPoint::Exhausted, history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::MockBackend;

    const POS: [&str; 3] = ["ab", "aab", "abb"];
    const NEG: [&str; 3] = ["ba", "a", "b"];

    fn g(text: &str) -> Grammar {
        parse_bnf(text).unwrap()
    }

    #[test]
    fn fitness_values() {
        assert_eq!(fitness("<s> ::= ", &POS, &NEG), -1);
        assert_eq!(fitness("<s> ::= <missing>", &POS, &NEG), -1);
        assert_eq!(
            fitness(
                "<s> ::= <a> <b>\n<a> ::= \"a\" | \"a\" <a>\n<b> ::= \"b\" | \"b\" <b>",
                &POS,
                &NEG
            ),
            6
        );
        // Any non-empty string over {a, b}.
        assert_eq!(fitness("<s> ::= \"a\" | \"b\" | \"a\" <s> | \"b\" <s>", &POS, &NEG), 3);
    }

    #[test]
    fn selection_is_stable_top_half() {
        assert_eq!(select_indices(&[5, 3, 4, 1]), vec![0, 2]);
        assert_eq!(select_indices(&[2, 2, 2, 2]), vec![0, 1]);
        assert_eq!(select_indices(&[0; 10]).len(), 5);
        assert_eq!(select_indices(&[-1, 6, 6, 0, 3]), vec![1, 2]);
    }

    #[test]
    fn splice_formula() {
        let a = g("<x> ::= \"1\"\n<y> ::= \"2\"\n<z> ::= \"3\"");
        let b = g("<p> ::= \"4\"\n<q> ::= \"5\"");
        let s = splice(&a, &b, 2);
        assert_eq!(print_bnf(&s), "<x> ::= \"1\"\n<q> ::= \"5\"");
        assert_eq!(s.start(), Some("x"));
        let s = splice(&a, &b, 1);
        assert_eq!(s.rule_sets(), b.rule_sets());
        assert_eq!(s.start(), Some("x"));
        assert!(!s.is_valid());
    }

    #[test]
    fn crossover_with_empty_parent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Grammar::empty();
        let b = g("<p> ::= \"4\"");
        for _ in 0..20 {
            assert_eq!(crossover(&a, &b, 1.0, &mut rng), (b.clone(), CrossOutcome::Parent(1)));
            assert_eq!(crossover(&b, &a, 1.0, &mut rng), (b.clone(), CrossOutcome::Parent(0)));
        }
        let (e, _) = crossover(&a, &a, 1.0, &mut rng);
        assert!(e.is_empty());
    }

    #[test]
    fn crossover_rate_zero_returns_a_parent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = g("<x> ::= \"1\"");
        let b = g("<p> ::= \"4\"");
        for _ in 0..50 {
            let (child, how) = crossover(&a, &b, 0.0, &mut rng);
            assert!(matches!(how, CrossOutcome::Parent(_)));
            assert!(child == a || child == b);
        }
    }

    #[test]
    fn shuffle_index_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = shuffle_rule_set(&g("<x> ::= \"1\""), 1, &mut rng).unwrap_err();
        assert_eq!(err, IndexError { index: 1, len: 1 });
    }

    #[test]
    fn local_mutation_is_seeded() {
        let base = g("<e> ::= <e> \"*\" <e> | <e> \"/\" <e> | \"1\"");
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            print_bnf(&local_mutation(&base, 0.5, &mut rng))
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn empty_grammar_always_uses_the_model() {
        let gw = Gateway::mock(MockBackend::from_responses(vec!["```\n<s> ::= \"a\"\n```"; 20]));
        let cfg = GaConfig {
            local_vs_llm_prob: 1.0,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let (_, op) = mutate(&Grammar::empty(), &POS, &NEG, &cfg, &mut rng, &gw);
            assert_eq!(op, Operator::LlmMutation);
        }
        assert_eq!(gw.calls(), 20);
    }

    #[test]
    fn gateway_failure_becomes_minus_one() {
        let gw = Gateway::mock(MockBackend::from_responses(Vec::<String>::new()));
        let cfg = GaConfig {
            local_vs_llm_prob: 0.0,
            ..GaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (c, _) = mutate(&g("<s> ::= \"a\""), &POS, &NEG, &cfg, &mut rng, &gw);
        assert_eq!(c.fitness, -1);
        assert!(c.error.unwrap().contains("exhausted"));
    }

    #[test]
    fn all_init_calls_failing_stops_the_run() {
        let gw = Gateway::mock(MockBackend::from_responses(Vec::<String>::new()));
        let out = run_hygenar(&POS, &NEG, &GaConfig::default(), &gw);
        assert_eq!(out.stop, StopPoint::GatewayFailure);
        assert_eq!(out.best.fitness, -1);
        assert_eq!(out.llm_calls, 10);
        assert_eq!(out.log.len(), 10);
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let bad = GaConfig {
            mutation_rate: 1.5,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GaConfig {
            population_size: 1,
            ..GaConfig::default()
        };
        assert_eq!(bad.validate(), Err(ConfigError::Population(1)));
    }
}
