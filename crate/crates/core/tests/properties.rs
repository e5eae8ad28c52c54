use std::collections::BTreeMap;

use gramgen_core::evolution::{fitness, grammar_fitness, select_indices, shuffle_rule_set, space_insert, splice};
use gramgen_core::{parse_bnf, print_bnf, Grammar, RuleSet, Symbol};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn name() -> impl Strategy<Value = String> {
    "[a-zA-Z_][a-zA-Z0-9_ .:|=-]{0,6}".prop_filter("no trailing space", |s| !s.ends_with(' '))
}

fn terminal() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,3}",
        "[ |<>:=()\\[\\]*+?',\\\\]{1,3}",
        Just(" ".to_string()),
        Just("é".to_string()),
    ]
}

fn grammar() -> impl Strategy<Value = Grammar> {
    prop::collection::btree_set(name(), 1..5).prop_flat_map(|names| {
        let names: Vec<String> = names.into_iter().collect();
        let symbol = prop_oneof![
            terminal().prop_map(Symbol::Terminal),
            prop::sample::select(names.clone()).prop_map(Symbol::NonTerminal),
        ];
        let alts = prop::collection::vec(prop::collection::vec(symbol, 0..4), 1..4);
        prop::collection::vec(alts, names.len()).prop_map(move |all| {
            Grammar::new(
                names
                    .iter()
                    .cloned()
                    .zip(all)
                    .map(|(n, a)| RuleSet::new(n, a))
                    .collect(),
            )
        })
    })
}

fn counts(alt: &[Symbol]) -> BTreeMap<&Symbol, usize> {
    let mut m = BTreeMap::new();
    for s in alt {
        *m.entry(s).or_default() += 1;
    }
    m
}

fn rename(g: &Grammar, prefix: &str) -> Grammar {
    let sym = |s: &Symbol| match s {
        Symbol::NonTerminal(n) => Symbol::nt(format!("{prefix}{n}")),
        t => t.clone(),
    };
    Grammar::new(
        g.rule_sets()
            .iter()
            .map(|r| {
                let alts = r.alternatives.iter().map(|a| a.iter().map(sym).collect()).collect();
                RuleSet::new(format!("{prefix}{}", r.lhs), alts)
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn print_then_parse_is_identity(g in grammar()) {
        let text = print_bnf(&g);
        prop_assert_eq!(parse_bnf(&text).unwrap(), g);
    }

    #[test]
    fn printing_is_stable(g in grammar()) {
        let once = print_bnf(&g);
        prop_assert_eq!(print_bnf(&parse_bnf(&once).unwrap()), once);
    }

    #[test]
    fn shuffle_keeps_symbols(g in grammar(), seed: u64, pick: prop::sample::Index) {
        let i = pick.index(g.rule_sets().len());
        let s = shuffle_rule_set(&g, i, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(s.start(), g.start());
        for (j, (a, b)) in g.rule_sets().iter().zip(s.rule_sets()).enumerate() {
            prop_assert_eq!(&a.lhs, &b.lhs);
            if j != i {
                prop_assert_eq!(a, b);
            }
            for (x, y) in a.alternatives.iter().zip(&b.alternatives) {
                prop_assert_eq!(counts(x), counts(y));
            }
        }
    }

    #[test]
    fn space_insert_only_adds_spaces(g in grammar(), seed: u64, p in 0.0f64..=1.0, pick: prop::sample::Index) {
        let i = pick.index(g.rule_sets().len());
        let s = space_insert(&g, i, p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for (j, (a, b)) in g.rule_sets().iter().zip(s.rule_sets()).enumerate() {
            if j != i {
                prop_assert_eq!(a, b);
            }
            for (x, y) in a.alternatives.iter().zip(&b.alternatives) {
                prop_assert!(y.len() <= 2 * x.len());
                let kept: Vec<&Symbol> = {
                    // Remove inserted spaces greedily against the original.
                    let mut rest = x.iter().peekable();
                    let mut kept = Vec::new();
                    for sym in y {
                        if rest.peek() == Some(&sym) {
                            kept.push(rest.next().unwrap());
                        } else {
                            prop_assert_eq!(sym, &Symbol::t(" "));
                        }
                    }
                    kept
                };
                prop_assert_eq!(kept, x.iter().collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn selection_is_stable_top_half(scores in prop::collection::vec(-1i64..=6, 0..20)) {
        let sel = select_indices(&scores);
        prop_assert_eq!(sel.len(), scores.len() / 2);
        // Every selected index beats or ties every unselected one, ties
        // resolved by position.
        for &s in &sel {
            for u in (0..scores.len()).filter(|u| !sel.contains(u)) {
                prop_assert!(scores[s] > scores[u] || (scores[s] == scores[u] && s < u));
            }
        }
        prop_assert!(sel.windows(2).all(|w| (scores[w[0]], std::cmp::Reverse(w[0])) > (scores[w[1]], std::cmp::Reverse(w[1]))));
    }

    #[test]
    fn splice_takes_prefix_and_suffix(a in grammar(), b in grammar(), pick: prop::sample::Index) {
        // Disjoint names, so no rule sets merge.
        let b = rename(&b, "b:");
        let l = a.rule_sets().len().min(b.rule_sets().len());
        let w = pick.index(l) + 1;
        let c = splice(&a, &b, w);
        prop_assert_eq!(c.rule_sets().len(), b.rule_sets().len());
        prop_assert_eq!(&c.rule_sets()[..w - 1], &a.rule_sets()[..w - 1]);
        prop_assert_eq!(&c.rule_sets()[w - 1..], &b.rule_sets()[w - 1..]);
        prop_assert_eq!(c.start(), a.start());
    }

    #[test]
    fn fitness_is_bounded(
        g in grammar(),
        pos in prop::collection::vec("[a-c ]{0,4}", 0..4),
        neg in prop::collection::vec("[a-c ]{0,4}", 0..4),
    ) {
        let f = grammar_fitness(&g, &pos, &neg);
        prop_assert!(f >= -1 && f <= (pos.len() + neg.len()) as i64);
        prop_assert_eq!(f == -1, !g.is_valid());
        prop_assert_eq!(fitness(&print_bnf(&g), &pos, &neg), f);
    }

    #[test]
    fn garbage_text_scores_minus_one(text in "[^<]*") {
        prop_assert_eq!(fitness(&text, &["a"], &["b"]), -1);
    }
}
