#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gramgen_core::challenge::{load_dataset, Challenge};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gramgen")
}

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn sample_dataset() -> PathBuf {
    repo_root().join("data/sample.jsonl")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(bin()).args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fenced(grammar: &str) -> String {
    format!("```\n{grammar}\n```")
}

/// The exact examples block of a rendered prompt, unique per challenge.
pub fn examples_key(c: &Challenge) -> String {
    format!(
        "===Positive Examples===\n{}\n===Negative Examples===\n{}\n",
        c.positives.join("\n"),
        c.negatives.join("\n")
    )
}

fn write_script(path: &Path, entries: &[serde_json::Value]) {
    let text: String = entries.iter().map(|e| format!("{e}\n")).collect();
    std::fs::write(path, text).unwrap();
}

/// A script answering every prompt about a challenge with its reference
/// grammar.
pub fn reference_script(dir: &Path) -> PathBuf {
    let path = dir.join("reference.jsonl");
    let entries: Vec<serde_json::Value> = load_dataset(&sample_dataset())
        .unwrap()
        .iter()
        .map(|c| serde_json::json!({"match": examples_key(c), "response": fenced(&c.grammar), "repeat": true}))
        .collect();
    write_script(&path, &entries);
    path
}

pub fn garbage_script(dir: &Path) -> PathBuf {
    let path = dir.join("garbage.jsonl");
    write_script(
        &path,
        &[serde_json::json!({"response": "Sure! Here is a grammar: S -> a S | b", "repeat": true})],
    );
    path
}

/// Always answers with the same valid grammar that solves nothing, so the
/// search runs every generation and applies local mutations.
pub fn weak_script(dir: &Path) -> PathBuf {
    let path = dir.join("weak.jsonl");
    let grammar = "<s> ::= <t> \"a\" <s> | \"x\" <t> | \"I\" \" \" <s>\n<t> ::= \"1\" | \"(\" <t> \")\"";
    write_script(
        &path,
        &[serde_json::json!({"response": fenced(grammar), "repeat": true})],
    );
    path
}
