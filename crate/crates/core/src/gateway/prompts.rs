//! Prompt templates. Rendering is pure string substitution.

use serde::{Deserialize, Serialize};

use crate::bnf::{render_diagnostics, Diagnostic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    DirectPrompt,
    OpfFeedback,
    Mutation,
    GenerateGrammars,
    GeneratePositives,
    GenerateNegatives,
}

const REQUIREMENTS: &str = "\
Given a set of positive and negative examples, generate the Backus\u{2013}Naur Form (BNF) grammar that accepts all positive examples and rejects all negative examples.
1. Only generate the standard BNF grammar;
2. The generated BNF grammar MUST accept all positive examples and reject all negative examples;
3. Each terminal symbol MUST be quoted with double quotes and MUST NOT escape double quotes or pipeline in terminal symbols;
4. Pay special attention to whether spaces, line breaks, or other special symbols are required between each symbol, and if so, these need to be explicitly specified, e.g. <term> ::= \"1\" \"+\" \"2\" can handle \"1+2\" but not \"1 + 2\" while <term> ::= \"1\" \" \" \"+\" \" \" \"2\" can handle \"1 + 2\" but not \"1+2\";
5. The entry point of the generated BNF grammar MUST be the non-terminal symbol in the first production rule;
6. Only the generated BNF should be wrapped in a pair of triple backtick;
7. Do NOT output any additional texts, comments, or explanations.
";

fn examples_block<S: AsRef<str>>(positives: &[S], negatives: &[S]) -> String {
    let join = |xs: &[S]| xs.iter().map(|x| x.as_ref()).collect::<Vec<_>>().join("\n");
    format!(
        "===Positive Examples===\n{}\n===Negative Examples===\n{}\n",
        join(positives),
        join(negatives)
    )
}

/// Direct prompting: examples only.
pub fn render_dp_prompt<S: AsRef<str>>(positives: &[S], negatives: &[S]) -> String {
    format!("{REQUIREMENTS}\n{}", examples_block(positives, negatives))
}

/// Feedback turn: the previous grammar and the parser's diagnostics.
pub fn render_opf_feedback_prompt<S: AsRef<str>>(
    positives: &[S],
    negatives: &[S],
    grammar_text: &str,
    diagnostics: &[Diagnostic],
) -> String {
    format!(
        "{REQUIREMENTS}\n{}\n===Generated BNF===\n{grammar_text}\n\n===Feedback===\n\
The generated BNF grammar has incorrect syntax and please consider fixing it by referring to the feedback.\n\
Here is the feedback from the BNF parser:\n{}",
        examples_block(positives, negatives),
        render_diagnostics(diagnostics)
    )
}

/// Model-driven mutation of an existing grammar.
pub fn render_mutation_prompt<S: AsRef<str>>(grammar_text: &str, positives: &[S], negatives: &[S]) -> String {
    format!(
        "Modify the following BNF grammar slightly to improve its acceptance of the positive examples and rejection of the negative examples.\n\n\
===BNF Grammar===\n{grammar_text}\n\n{}\n\
Only output the modified BNF grammar wrapped in triple backticks.",
        examples_block(positives, negatives)
    )
}

/// Dataset construction: `n` reference grammars with exactly `k` lines each.
pub fn render_generate_grammars_prompt(k: usize, n: usize) -> String {
    format!(
        "Generate a list of random standard Backus-Naur Form (BNF) grammar with the following constraints:
1. Each generated BNF grammar MUST be SELF-CONTAINED and VALID, which means it should be able to recognize a valid string;
2. Each generated BNF grammar MUST have exactly {k} lines;
3. Each generated BNF grammar MUST be unique;
4. Each generated BNF grammar MUST be separated by a newline in addition to the linebreak;
5. For each generated BNF grammar, the entry point MUST be at the first line;
6. Only generate {n} BNF grammars;
7. Only output BNF grammars WITHOUT any additional text or code block, like \"```\"."
    )
}

pub fn render_generate_positives_prompt(m: usize, reference_grammar: &str) -> String {
    format!(
        "Generate a list of positive examples with the following constraints:
1. Each example MUST be separated by a newline in addition to the linebreak;
2. Only output examples WITHOUT any additional text or code block, like \"```\";
3. Only output {m} examples;
4. Each example MUST be generated based on the given BNF grammar;
5. Pay attention to whether the whitespaces are allowed between symbols.

For example, given the following BNF grammar:
<term> ::=  \"0\" | \"1\" | \"2\"
you should output positive examples like:
0

1

2

Then, the given BNF grammar is:
{reference_grammar}"
    )
}

pub fn render_generate_negatives_prompt(m: usize, reference_grammar: &str) -> String {
    format!(
        "Generate a list of negative examples with the following constraints:
1. Each example MUST be separated by a newline in addition to the linebreak;
2. Only output examples WITHOUT any additional text or code block, like \"```\";
3. Only output {m} examples;
4. Each example MUST be generated based on the given BNF grammar;
5. Each example should be greatly related to the given BNF grammar, but ensure it is NOT a valid string for the given BNF grammar.

For example, given the following BNF grammar:
<term> ::=  \"0\" | \"1\" | \"2\"
you should output negative examples like:
6

*

9

Then, the given BNF grammar is:
{reference_grammar}"
    )
}

/// Which dataset-construction prompt to render.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetPrompt<'a> {
    Grammars { k: usize, n: usize },
    Positives { m: usize, reference: &'a str },
    Negatives { m: usize, reference: &'a str },
}

impl DatasetPrompt<'_> {
    pub fn template(&self) -> TemplateId {
        match self {
            DatasetPrompt::Grammars { .. } => TemplateId::GenerateGrammars,
            DatasetPrompt::Positives { .. } => TemplateId::GeneratePositives,
            DatasetPrompt::Negatives { .. } => TemplateId::GenerateNegatives,
        }
    }
}

pub fn render_dataset_prompt(kind: &DatasetPrompt<'_>) -> String {
    match kind {
        DatasetPrompt::Grammars { k, n } => render_generate_grammars_prompt(*k, *n),
        DatasetPrompt::Positives { m, reference } => render_generate_positives_prompt(*m, reference),
        DatasetPrompt::Negatives { m, reference } => render_generate_negatives_prompt(*m, reference),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnf::parse_bnf;

    const POS: [&str; 3] = ["add(1,2,3)", "merge(x,y)", "fibonacci(9)"];
    const NEG: [&str; 3] = ["add(1,2,3", "merge x,y)", "fibonacci()"];

    #[test]
    fn dp_prompt_layout() {
        let p = render_dp_prompt(&POS, &NEG);
        assert!(p.starts_with(
            "Given a set of positive and negative examples, generate the Backus\u{2013}Naur Form (BNF) grammar"
        ));
        assert!(p.contains(
            "7. Do NOT output any additional texts, comments, or explanations.\n\n===Positive Examples===\n"
        ));
        assert!(p.ends_with(
            "===Positive Examples===\nadd(1,2,3)\nmerge(x,y)\nfibonacci(9)\n===Negative Examples===\nadd(1,2,3\nmerge x,y)\nfibonacci()\n"
        ));
        for i in 1..=7 {
            assert!(p.contains(&format!("\n{i}. ")), "item {i}");
        }
        assert!(p.contains(
            "4. Pay special attention to whether spaces, line breaks, or other special symbols are required"
        ));
    }

    #[test]
    fn empty_example_keeps_its_line() {
        let p = render_dp_prompt(&["", "a"], &["b"]);
        assert!(p.contains("===Positive Examples===\n\na\n===Negative Examples===\nb\n"));
    }

    #[test]
    fn feedback_prompt_sections() {
        let diags = parse_bnf("<e> ::=").unwrap_err();
        let p = render_opf_feedback_prompt(&POS, &NEG, "<e> ::=", &diags);
        assert!(p.contains("===Generated BNF===\n<e> ::=\n"));
        assert!(p.contains("===Feedback===\nThe generated BNF grammar has incorrect syntax and please consider fixing it by referring to the feedback.\nHere is the feedback from the BNF parser:\n"));
        assert!(
            p.contains("This error is likely due to the reason that the right-hand side is not defined after '::='.")
        );
        assert!(p.contains("===Positive Examples===\nadd(1,2,3)\n"));
    }

    #[test]
    fn mutation_prompt() {
        let p = render_mutation_prompt("<s> ::= \"a\"", &POS, &NEG);
        assert!(p.starts_with("Modify the following BNF grammar slightly to improve its acceptance"));
        assert!(p.contains("===BNF Grammar===\n<s> ::= \"a\"\n\n===Positive Examples===\n"));
        assert!(p.ends_with("Only output the modified BNF grammar wrapped in triple backticks."));
        let empty = render_mutation_prompt("", &POS, &NEG);
        assert!(empty.contains("===BNF Grammar===\n\n\n"));
    }

    #[test]
    fn dataset_prompts() {
        let p = render_dataset_prompt(&DatasetPrompt::Grammars { k: 3, n: 10 });
        assert!(p.contains("MUST have exactly 3 lines"));
        assert!(p.contains("6. Only generate 10 BNF grammars;"));
        let reference = "<s> ::= \"a\"";
        let p = render_dataset_prompt(&DatasetPrompt::Positives { m: 3, reference });
        assert!(p.ends_with("Then, the given BNF grammar is:\n<s> ::= \"a\""));
        assert!(p.contains("3. Only output 3 examples;"));
        let p = render_dataset_prompt(&DatasetPrompt::Negatives { m: 3, reference });
        assert!(
            p.contains("<term> ::=  \"0\" | \"1\" | \"2\"\nyou should output negative examples like:\n6\n\n*\n\n9\n")
        );
    }

    #[test]
    fn rendering_is_deterministic() {
        assert_eq!(render_dp_prompt(&POS, &NEG), render_dp_prompt(&POS, &NEG));
    }
}
