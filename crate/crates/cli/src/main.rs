//! `gramgen`: infer BNF grammars from examples, evaluate methods over
//! challenge datasets, validate datasets and draft new ones.
//!
//! Exit codes: 0 on success, 1 when the result is semantically wrong or the
//! dataset has violations, 2 on usage or configuration errors.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gramgen_core::challenge::{
    construct_dataset, load_dataset, save_dataset, validate_dataset, write_jsonl, ConstructConfig, LoadError,
};
use gramgen_core::metrics::{format_table, Grouping};
use gramgen_core::print_bnf;
use gramgen_core::recognizer::Recognizer;
use gramgen_core::runner::{
    evaluate_dataset, sha256_hex, solve, unix_millis, write_evaluation, write_manifest, EvalError, OutputLayout,
    RunManifest,
};

use config::{BackendSettings, CommonArgs, FileConfig, MethodArgs};

#[derive(Parser, Debug)]
#[command(
    name = "gramgen",
    version,
    about = "Grammar inference from positive and negative examples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Infer a grammar for one set of examples.
    Solve(SolveArgs),
    /// Run a method over a dataset and report metrics.
    Evaluate(EvaluateArgs),
    /// Check a dataset against its reference grammars.
    Validate(ValidateArgs),
    /// Draft a new dataset with the model.
    Construct(ConstructArgs),
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    /// Positive example (repeatable).
    #[arg(long = "positive")]
    positives: Vec<String>,
    /// Negative example (repeatable).
    #[arg(long = "negative")]
    negatives: Vec<String>,
    /// File with one positive example per line.
    #[arg(long)]
    positives_file: Option<PathBuf>,
    /// File with one negative example per line.
    #[arg(long)]
    negatives_file: Option<PathBuf>,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GroupArg {
    /// Overall, by non-terminal count and by production count.
    All,
    None,
    Nonterminals,
    Productions,
}

#[derive(clap::Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    group: GroupArg,
    #[command(flatten)]
    method: MethodArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(clap::Args, Debug)]
struct ValidateArgs {
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(clap::Args, Debug)]
struct ConstructArgs {
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long, default_value_t = 9)]
    k_max: usize,
    #[arg(long, default_value_t = 10)]
    grammars_per_k: usize,
    #[arg(long, default_value_t = 6)]
    challenges_per_grammar: usize,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Construct(a) => cmd_construct(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect())
}

fn examples(inline: &[String], file: Option<&Path>, what: &str) -> Result<Vec<String>> {
    let mut out = inline.to_vec();
    if let Some(path) = file {
        out.extend(read_lines(path)?);
    }
    if out.is_empty() {
        bail!("no {what} examples given");
    }
    Ok(out)
}

fn cmd_solve(a: SolveArgs) -> Result<ExitCode> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let positives = examples(&a.positives, a.positives_file.as_deref(), "positive")?;
    let negatives = examples(&a.negatives, a.negatives_file.as_deref(), "negative")?;
    if let Some(both) = positives.iter().find(|p| negatives.contains(p)) {
        bail!("{both:?} is both a positive and a negative example");
    }
    let cfg = config::run_config(&a.common, &a.method, &file)?;
    let backend = BackendSettings::resolve(&a.common, &file)?;
    let layout = OutputLayout::new(config::out_dir(&a.common, &file))?;
    let gw = backend.gateway(&layout.calls())?;

    let started = unix_millis();
    let out = solve(&positives, &negatives, &cfg, cfg.seed, &gw);
    write_jsonl(&layout.run_log("solve"), &out.log)?;
    write_manifest(
        &layout.manifest(),
        &RunManifest {
            command: "solve".into(),
            config: serde_json::to_value(&cfg)?,
            backend: backend.snapshot(),
            dataset_path: None,
            dataset_sha256: None,
            rng_seed: cfg.seed,
            started_at_ms: started,
            finished_at_ms: unix_millis(),
            llm_calls: gw.calls(),
        },
    )?;

    let c = &out.candidate;
    match &c.grammar {
        Some(g) if c.fitness >= 0 => println!("{}", print_bnf(g)),
        _ => {
            println!("no valid grammar");
            if !c.source_text.is_empty() {
                println!("{}", c.source_text);
            }
            for d in &c.diagnostics {
                print!("{}", d.render());
            }
            if let Some(e) = &c.error {
                println!("error: {e}");
            }
        }
    }
    let max = (positives.len() + negatives.len()) as i64;
    println!("fitness: {}/{max}", c.fitness);
    println!("llm calls: {}", out.llm_calls);
    let rec = c.grammar.as_ref().and_then(|g| Recognizer::new(g).ok());
    for (kind, list, want) in [("positive", &positives, true), ("negative", &negatives, false)] {
        for s in list {
            let got = rec.as_ref().map(|r| r.accepts(s).unwrap_or(false));
            let verdict = match got {
                Some(true) => "accept",
                Some(false) => "reject",
                None => "-",
            };
            let mark = if got == Some(want) { "ok" } else { "WRONG" };
            println!("{kind:<8} {verdict:<6} {mark:<5} {s:?}");
        }
    }
    Ok(if c.fitness == max {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn print_violations(report: &gramgen_core::challenge::ValidationReport) {
    for v in &report.violations {
        println!("{v}");
    }
}

fn load(path: &Path) -> Result<std::result::Result<Vec<gramgen_core::challenge::Challenge>, ExitCode>> {
    match load_dataset(path) {
        Ok(cs) => Ok(Ok(cs)),
        Err(LoadError::Records(errors)) => {
            for e in &errors {
                println!("{}: {e}", path.display());
            }
            Ok(Err(ExitCode::from(1)))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<ExitCode> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    let Some(dataset) = a.dataset.clone().or_else(|| file.dataset.clone()) else {
        bail!("--dataset is required");
    };
    let cfg = config::run_config(&a.common, &a.method, &file)?;
    let backend = BackendSettings::resolve(&a.common, &file)?;
    let challenges = match load(&dataset)? {
        Ok(cs) => cs,
        Err(code) => return Ok(code),
    };
    let digest = sha256_hex(&std::fs::read(&dataset)?);

    let layout = OutputLayout::new(config::out_dir(&a.common, &file))?;
    let gw = backend.gateway(&layout.calls())?;
    let started = unix_millis();
    let eval = match evaluate_dataset(&challenges, &cfg, &gw) {
        Ok(e) => e,
        Err(EvalError::InvalidDataset(report)) => {
            print_violations(&report);
            println!("dataset has {} violation(s); nothing was run", report.violations.len());
            return Ok(ExitCode::from(1));
        }
    };
    write_evaluation(&layout, &eval)?;
    write_manifest(
        &layout.manifest(),
        &RunManifest {
            command: "evaluate".into(),
            config: serde_json::to_value(&cfg)?,
            backend: backend.snapshot(),
            dataset_path: Some(dataset.display().to_string()),
            dataset_sha256: Some(digest),
            rng_seed: cfg.seed,
            started_at_ms: started,
            finished_at_ms: unix_millis(),
            llm_calls: gw.calls(),
        },
    )?;

    let groupings: &[Grouping] = match a.group {
        GroupArg::All => &[Grouping::None, Grouping::ByNonterminals, Grouping::ByProductions],
        GroupArg::None => &[Grouping::None],
        GroupArg::Nonterminals => &[Grouping::ByNonterminals],
        GroupArg::Productions => &[Grouping::ByProductions],
    };
    for (i, g) in groupings.iter().enumerate() {
        let mut reports = eval.reports(*g);
        if i > 0 {
            // The overall row is printed once, in the first table.
            reports.remove(0);
            println!();
        }
        print!("{}", format_table(&reports));
    }
    println!("\nresults written to {}", layout.results().display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(a: ValidateArgs) -> Result<ExitCode> {
    let challenges = match load(&a.dataset)? {
        Ok(cs) => cs,
        Err(code) => return Ok(code),
    };
    let report = validate_dataset(&challenges);
    print_violations(&report);
    if report.is_clean() {
        println!("{} challenge(s), no violations", report.checked);
        Ok(ExitCode::SUCCESS)
    } else {
        println!(
            "{} challenge(s), {} violation(s)",
            report.checked,
            report.violations.len()
        );
        Ok(ExitCode::from(1))
    }
}

fn cmd_construct(a: ConstructArgs) -> Result<ExitCode> {
    let file = FileConfig::load(a.common.config.as_deref())?;
    if a.k_min == 0 || a.k_min > a.k_max {
        bail!("need 1 <= --k-min <= --k-max");
    }
    let defaults = ConstructConfig::default();
    let cfg = ConstructConfig {
        k_min: a.k_min,
        k_max: a.k_max,
        grammars_per_k: a.grammars_per_k,
        challenges_per_grammar: a.challenges_per_grammar,
        temperature: a
            .common
            .temperature
            .or(file.temperature)
            .unwrap_or(defaults.temperature),
        max_tokens: a.common.max_tokens.or(file.max_tokens).unwrap_or(defaults.max_tokens),
        ..defaults
    };
    let backend = BackendSettings::resolve(&a.common, &file)?;
    let layout = OutputLayout::new(config::out_dir(&a.common, &file))?;
    let gw = backend.gateway(&layout.calls())?;
    let started = unix_millis();
    let out = construct_dataset(&cfg, &gw);
    let draft = layout.dir.join("draft.jsonl");
    let queue = layout.dir.join("queue.jsonl");
    save_dataset(&draft, &out.draft)?;
    write_jsonl(&queue, &out.queue)?;
    write_manifest(
        &layout.manifest(),
        &RunManifest {
            command: "construct".into(),
            config: serde_json::to_value(&cfg)?,
            backend: backend.snapshot(),
            dataset_path: Some(draft.display().to_string()),
            dataset_sha256: Some(sha256_hex(&std::fs::read(&draft)?)),
            rng_seed: 0,
            started_at_ms: started,
            finished_at_ms: unix_millis(),
            llm_calls: gw.calls(),
        },
    )?;
    println!(
        "grammars attempted: {}\nchallenges attempted: {}\ndraft challenges: {}\nqueued for correction: {}",
        out.grammars_attempted,
        out.challenges_attempted,
        out.draft.len(),
        out.queue.len()
    );
    println!("draft: {}\nqueue: {}", draft.display(), queue.display());
    Ok(ExitCode::SUCCESS)
}
