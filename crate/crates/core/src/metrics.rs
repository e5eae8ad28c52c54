//! Evaluation metrics: syntax correctness (SX), semantic correctness (SE) and
//! the four grammar-quality measures computed over solved challenges only.
//!
//! The quality measures compare `|Π_P|`, the number of distinct productions
//! used by the chosen left-most derivations of the positive examples, between
//! the reference grammar and the candidate:
//!
//! * `diff = |Π^ref_P| - |Π*_P|`
//! * overfit when `diff > |Π^ref_P| / 2`
//! * overgeneralized when `diff < -|Π^ref_P| / 2`
//! * `tu = |Π*_P| / |Π*|`
//!
//! Both half-thresholds are strict and compared exactly (`2 * diff` against
//! `|Π^ref_P|`), so odd reference counts are never rounded.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::grammar::Grammar;
use crate::recognizer::{RecognizeError, Recognizer};

/// One challenge together with the candidate grammar produced for it.
#[derive(Clone, Debug)]
pub struct ChallengeResult {
    pub reference: Grammar,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
    /// Model output after fence extraction.
    pub candidate_text: String,
    /// `None` when the text did not parse.
    pub candidate: Option<Grammar>,
}

/// Outcome of a membership test where hitting the chart limit counts as
/// rejection.
fn accepted(rec: &Recognizer, s: &str) -> bool {
    match rec.accepts(s) {
        Ok(b) => b,
        Err(e) => {
            log::warn!("membership of {s:?} treated as rejected: {e}");
            false
        }
    }
}

pub fn syntax_correct(result: &ChallengeResult) -> bool {
    result.candidate.as_ref().is_some_and(Grammar::is_valid)
}

pub fn semantics_correct(result: &ChallengeResult) -> bool {
    let Some(candidate) = result.candidate.as_ref() else {
        return false;
    };
    let Ok(rec) = Recognizer::new(candidate) else {
        return false;
    };
    result.positives.iter().all(|p| accepted(&rec, p)) && result.negatives.iter().all(|n| !accepted(&rec, n))
}

/// Quality measures for one solved challenge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    /// `|Π^ref_P|`
    pub reference_used: usize,
    /// `|Π*_P|`
    pub candidate_used: usize,
    /// `|Π*|`
    pub candidate_total: usize,
    pub diff: i64,
    pub overfit: bool,
    pub overgen: bool,
    pub tu: f64,
}

impl QualityMetrics {
    pub fn from_counts(reference_used: usize, candidate_used: usize, candidate_total: usize) -> Self {
        let diff = reference_used as i64 - candidate_used as i64;
        let half_twice = reference_used as i64;
        QualityMetrics {
            reference_used,
            candidate_used,
            candidate_total,
            diff,
            overfit: 2 * diff > half_twice,
            overgen: 2 * diff < -half_twice,
            tu: if candidate_total == 0 {
                0.0
            } else {
                candidate_used as f64 / candidate_total as f64
            },
        }
    }
}

/// `None` unless the challenge is solved.
pub fn quality_metrics(result: &ChallengeResult) -> Result<Option<QualityMetrics>, RecognizeError> {
    if !semantics_correct(result) {
        return Ok(None);
    }
    let candidate = result.candidate.as_ref().expect("solved implies parsed");
    let reference_used = crate::recognizer::used_rules_for_examples(&result.reference, &result.positives)?.len();
    let candidate_used = crate::recognizer::used_rules_for_examples(candidate, &result.positives)?.len();
    Ok(Some(QualityMetrics::from_counts(
        reference_used,
        candidate_used,
        candidate.production_count(),
    )))
}

/// Everything the aggregate needs from one challenge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChallengeOutcome {
    pub sx: bool,
    pub se: bool,
    pub quality: Option<QualityMetrics>,
    pub reference_nonterminals: usize,
    pub reference_productions: usize,
}

pub fn evaluate(result: &ChallengeResult) -> ChallengeOutcome {
    let sx = syntax_correct(result);
    let se = sx && semantics_correct(result);
    let quality = if se {
        quality_metrics(result).unwrap_or_else(|e| {
            log::warn!("quality metrics unavailable: {e}");
            None
        })
    } else {
        None
    };
    ChallengeOutcome {
        sx,
        se,
        quality,
        reference_nonterminals: result.reference.nonterminal_count(),
        reference_productions: result.reference.production_count(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    None,
    ByNonterminals,
    ByProductions,
}

/// C1 = 1..=3 non-terminals, C2 = 4..=6, C3 = 7 and above.
pub fn nonterminal_bucket(count: usize) -> &'static str {
    match count {
        0..=3 => "C1",
        4..=6 => "C2",
        _ => "C3",
    }
}

/// P1 = 1..=6 productions, P2 = 7..=15, P3 = 16 and above.
pub fn production_bucket(count: usize) -> &'static str {
    match count {
        0..=6 => "P1",
        7..=15 => "P2",
        _ => "P3",
    }
}

/// Aggregated metrics for a group of challenges. Quality fields are `None`
/// (shown as N/A) when nothing in the group was solved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub group_key: String,
    pub total: usize,
    pub solved_count: usize,
    pub sx: f64,
    pub se: f64,
    pub diff_avg: Option<f64>,
    pub of_pct: Option<f64>,
    pub og_pct: Option<f64>,
    pub tu_avg: Option<f64>,
}

fn report(group_key: &str, outcomes: &[&ChallengeOutcome]) -> MetricReport {
    let total = outcomes.len();
    let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    let sx = frac(outcomes.iter().filter(|o| o.sx).count());
    let se = frac(outcomes.iter().filter(|o| o.se).count());
    let solved: Vec<&QualityMetrics> = outcomes.iter().filter_map(|o| o.quality.as_ref()).collect();
    let k = solved.len();
    let mean =
        |f: &dyn Fn(&QualityMetrics) -> f64| (k > 0).then(|| solved.iter().map(|q| f(q)).sum::<f64>() / k as f64);
    MetricReport {
        group_key: group_key.to_string(),
        total,
        solved_count: outcomes.iter().filter(|o| o.se).count(),
        sx,
        se,
        diff_avg: mean(&|q| q.diff as f64),
        of_pct: mean(&|q| if q.overfit { 1.0 } else { 0.0 }),
        og_pct: mean(&|q| if q.overgen { 1.0 } else { 0.0 }),
        tu_avg: mean(&|q| q.tu),
    }
}

/// One report for "All" followed by one per non-empty bucket of `grouping`.
pub fn aggregate_outcomes(outcomes: &[ChallengeOutcome], grouping: Grouping) -> Vec<MetricReport> {
    let all: Vec<&ChallengeOutcome> = outcomes.iter().collect();
    let mut reports = vec![report("All", &all)];
    let (keys, bucket): (&[&str], fn(&ChallengeOutcome) -> &'static str) = match grouping {
        Grouping::None => return reports,
        Grouping::ByNonterminals => (&["C1", "C2", "C3"], |o| nonterminal_bucket(o.reference_nonterminals)),
        Grouping::ByProductions => (&["P1", "P2", "P3"], |o| production_bucket(o.reference_productions)),
    };
    for key in keys {
        let members: Vec<&ChallengeOutcome> = outcomes.iter().filter(|o| bucket(o) == *key).collect();
        if !members.is_empty() {
            reports.push(report(key, &members));
        }
    }
    reports
}

pub fn aggregate(results: &[ChallengeResult], grouping: Grouping) -> Vec<MetricReport> {
    let outcomes: Vec<ChallengeOutcome> = results.iter().map(evaluate).collect();
    aggregate_outcomes(&outcomes, grouping)
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{:.1}", x * 100.0))
}

/// Fixed-width table: percentages with one decimal, Diff with two.
pub fn format_table(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<6} {:>5} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "Group", "N", "Solved", "SX%", "SE%", "Diff", "OF%", "OG%", "TU%"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<6} {:>5} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
            r.group_key,
            r.total,
            r.solved_count,
            pct(Some(r.sx)),
            pct(Some(r.se)),
            r.diff_avg.map_or_else(|| "N/A".to_string(), |d| format!("{d:.2}")),
            pct(r.of_pct),
            pct(r.og_pct),
            pct(r.tu_avg),
        );
    }
    out
}

/// Machine-readable row with the same rounding as the table.
pub fn report_record(r: &MetricReport) -> serde_json::Value {
    let round1 = |x: f64| (x * 1000.0).round() / 10.0;
    let opt = |v: Option<f64>| v.map(round1);
    serde_json::json!({
        "group": r.group_key,
        "total": r.total,
        "solved": r.solved_count,
        "sx_pct": round1(r.sx),
        "se_pct": round1(r.se),
        "diff_avg": r.diff_avg.map(|d| (d * 100.0).round() / 100.0),
        "of_pct": opt(r.of_pct),
        "og_pct": opt(r.og_pct),
        "tu_pct": opt(r.tu_avg),
    })
}
