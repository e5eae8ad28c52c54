//! Running a method over single challenges or whole datasets, and writing
//! the run artifacts: per-challenge results, per-challenge run logs and a
//! manifest.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baselines::{run_dp, run_opf, DpConfig, OpfConfig};
use crate::challenge::{validate_dataset, write_jsonl, Challenge, ValidationReport};
use crate::evolution::{run_hygenar, Candidate, GaConfig, LogRecord, StopPoint};
use crate::gateway::Gateway;
use crate::metrics::{self, ChallengeOutcome, ChallengeResult, Grouping, MetricReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dp,
    Opf,
    Hygenar,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dp" => Ok(Method::Dp),
            "opf" => Ok(Method::Opf),
            "hygenar" => Ok(Method::Hygenar),
            other => Err(format!("unknown method {other:?} (expected dp, opf or hygenar)")),
        }
    }
}

/// Everything that determines what a run does, apart from the backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub seed: u64,
    pub parallel: usize,
    pub dp: DpConfig,
    pub opf: OpfConfig,
    pub ga: GaConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Hygenar,
            seed: 0,
            parallel: 1,
            dp: DpConfig::default(),
            opf: OpfConfig::default(),
            ga: GaConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub candidate: Candidate,
    pub log: Vec<LogRecord>,
    pub llm_calls: usize,
    pub stop: Option<StopPoint>,
}

/// Runs `cfg.method` once. `seed` overrides the GA seed.
pub fn solve<S: AsRef<str>>(
    positives: &[S],
    negatives: &[S],
    cfg: &RunConfig,
    seed: u64,
    gw: &Gateway,
) -> SolveOutcome {
    match cfg.method {
        Method::Dp => {
            let o = run_dp(positives, negatives, &cfg.dp, gw);
            SolveOutcome {
                candidate: o.candidate,
                log: o.log,
                llm_calls: o.llm_calls,
                stop: None,
            }
        }
        Method::Opf => {
            let o = run_opf(positives, negatives, &cfg.opf, gw);
            SolveOutcome {
                candidate: o.candidate,
                log: o.log,
                llm_calls: o.llm_calls,
                stop: None,
            }
        }
        Method::Hygenar => {
            let ga = GaConfig {
                rng_seed: seed,
                ..cfg.ga.clone()
            };
            let o = run_hygenar(positives, negatives, &ga, gw);
            SolveOutcome {
                candidate: o.best,
                log: o.log,
                llm_calls: o.llm_calls,
                stop: Some(o.stop),
            }
        }
    }
}

/// Seed for one challenge, independent of evaluation order.
pub fn challenge_seed(run_seed: u64, challenge_id: &str) -> u64 {
    let digest = Sha256::digest(format!("{run_seed}:{challenge_id}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// One line of the results file. Contains no timing data, so identical runs
/// produce identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChallengeRecord {
    pub id: String,
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub candidate_text: String,
    pub fitness: i64,
    pub llm_calls: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outcome: ChallengeOutcome,
}

pub struct Evaluation {
    pub records: Vec<ChallengeRecord>,
    pub logs: Vec<(String, Vec<LogRecord>)>,
}

impl Evaluation {
    pub fn outcomes(&self) -> Vec<ChallengeOutcome> {
        self.records.iter().map(|r| r.outcome.clone()).collect()
    }

    pub fn reports(&self, grouping: Grouping) -> Vec<MetricReport> {
        metrics::aggregate_outcomes(&self.outcomes(), grouping)
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset has {} violation(s)", .0.violations.len())]
    InvalidDataset(ValidationReport),
}

type RunResult = (ChallengeRecord, Vec<LogRecord>);

fn run_one(c: &Challenge, cfg: &RunConfig, gw: &Gateway) -> RunResult {
    let seed = challenge_seed(cfg.seed, &c.id);
    let out = solve(&c.positives, &c.negatives, cfg, seed, gw);
    let result = ChallengeResult {
        reference: c.reference().expect("validated dataset"),
        positives: c.positives.clone(),
        negatives: c.negatives.clone(),
        candidate_text: out.candidate.source_text.clone(),
        candidate: out.candidate.grammar.clone(),
    };
    let record = ChallengeRecord {
        id: c.id.clone(),
        method: cfg.method,
        k: c.k,
        seed,
        candidate_text: out.candidate.source_text.clone(),
        fitness: out.candidate.fitness,
        llm_calls: out.llm_calls,
        stop: out.stop,
        error: out.candidate.error.clone(),
        outcome: metrics::evaluate(&result),
    };
    (record, out.log)
}

/// Validates the dataset, then runs the method on every challenge with up to
/// `cfg.parallel` challenges in flight. Records come back in dataset order.
pub fn evaluate_dataset(challenges: &[Challenge], cfg: &RunConfig, gw: &Gateway) -> Result<Evaluation, EvalError> {
    let report = validate_dataset(challenges);
    if !report.is_clean() {
        return Err(EvalError::InvalidDataset(report));
    }
    let slots: Vec<Mutex<Option<RunResult>>> = challenges.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = cfg.parallel.clamp(1, challenges.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(c) = challenges.get(i) else { break };
                log::info!("challenge {} ({}/{})", c.id, i + 1, challenges.len());
                *slots[i].lock().expect("slot") = Some(run_one(c, cfg, gw));
            });
        }
    });
    let mut records = Vec::with_capacity(challenges.len());
    let mut logs = Vec::with_capacity(challenges.len());
    for slot in slots {
        let (record, log) = slot.into_inner().expect("slot").expect("every challenge ran");
        logs.push((record.id.clone(), log));
        records.push(record);
    }
    Ok(Evaluation { records, logs })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn unix_millis() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Provenance of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Snapshot of the effective settings.
    pub config: serde_json::Value,
    pub backend: serde_json::Value,
    pub dataset_path: Option<String>,
    pub dataset_sha256: Option<String>,
    pub rng_seed: u64,
    pub started_at_ms: u128,
    pub finished_at_ms: u128,
    pub llm_calls: usize,
}

/// File names inside an output directory.
pub struct OutputLayout {
    pub dir: PathBuf,
}

impl OutputLayout {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(dir.join("logs"))?;
        Ok(OutputLayout { dir })
    }

    pub fn results(&self) -> PathBuf {
        self.dir.join("results.jsonl")
    }

    pub fn report(&self) -> PathBuf {
        self.dir.join("report.json")
    }

    pub fn manifest(&self) -> PathBuf {
        self.dir.join("manifest.json")
    }

    pub fn calls(&self) -> PathBuf {
        self.dir.join("calls.jsonl")
    }

    pub fn run_log(&self, id: &str) -> PathBuf {
        let safe: String = id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        self.dir.join("logs").join(format!("{safe}.jsonl"))
    }
}

/// Writes results, run logs and a report with every grouping.
pub fn write_evaluation(layout: &OutputLayout, eval: &Evaluation) -> std::io::Result<()> {
    write_jsonl(&layout.results(), &eval.records)?;
    for (id, log) in &eval.logs {
        write_jsonl(&layout.run_log(id), log)?;
    }
    let mut groups = Vec::new();
    for grouping in [Grouping::None, Grouping::ByNonterminals, Grouping::ByProductions] {
        let rows: Vec<serde_json::Value> = eval.reports(grouping).iter().map(metrics::report_record).collect();
        groups.push(serde_json::json!({"grouping": grouping, "rows": rows}));
    }
    std::fs::write(layout.report(), serde_json::to_string_pretty(&groups)? + "\n")
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(manifest)? + "\n")
}
