use std::collections::BTreeSet;

use proptest::prelude::*;

use enteval::datagen::{check_disjoint, negate, SplitSpec, Variant};
use enteval::tasks::Splits;
use enteval::toytrain::{
    total_loss, Decoders, LossSettings, SoftmaxMode, ToyBiLM, ToyConfig, ToyPair,
};
use enteval::types::MAX_DESCRIPTION_TOKENS;
use enteval::wikient::{extract_pairs, parse_dump, parse_wikitext};

fn small_model(vocab: usize, seed: u64) -> (ToyBiLM, Decoders) {
    let cfg = ToyConfig {
        dim: 3,
        hidden: 3,
        proj: 2,
        init_scale: 0.5,
    };
    let m = ToyBiLM::new(vocab, cfg, seed).unwrap();
    let d = Decoders::new(&m, seed);
    (m, d)
}

fn toy_pair(vocab: usize) -> impl Strategy<Value = ToyPair> {
    let first = vocab as u32;
    (
        prop::collection::vec(5..first, 2..8),
        prop::collection::vec(5..first, 2..6),
        any::<prop::sample::Index>(),
        any::<prop::sample::Index>(),
    )
        .prop_map(|(context, description, a, b)| {
            let (i, j) = (a.index(context.len()), b.index(context.len()));
            ToyPair {
                context: context.iter().map(|&t| t as usize).collect(),
                span: (i.min(j), i.max(j)),
                description: description.iter().map(|&t| t as usize).collect(),
            }
        })
}

proptest! {
    #[test]
    fn fitted_splits_never_exceed_what_is_available(
        train in 0usize..20_000, valid in 0usize..20_000, test in 0usize..20_000,
        available in 0usize..70_000, even: bool,
    ) {
        let spec = SplitSpec::new(train, valid, test);
        let fit = spec.fit(available, even);
        prop_assert!(fit.total() <= available.max(spec.total()));
        prop_assert!(fit.train <= train && fit.valid <= valid && fit.test <= test);
        if available >= spec.total() {
            prop_assert_eq!(fit, spec);
        } else if even {
            prop_assert!(fit.train % 2 == 0 && fit.valid % 2 == 0 && fit.test % 2 == 0);
        }
    }

    #[test]
    fn disjointness_check_flags_any_repeated_id(ids in prop::collection::vec(0u8..30, 3..30)) {
        let names: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
        let third = names.len() / 3;
        let splits = Splits {
            train: names[..third].to_vec(),
            valid: names[third..2 * third].to_vec(),
            test: names[2 * third..].to_vec(),
        };
        let repeated = names.iter().collect::<BTreeSet<_>>().len() < names.len();
        prop_assert_eq!(check_disjoint(&splits, |s| s.as_str()).is_err(), repeated);
    }

    #[test]
    fn negation_adds_exactly_one_not(
        subject in prop::collection::vec("[a-z]{1,6}", 1..3),
        object in prop::collection::vec("[a-z]{1,6}", 1..3),
        verb in prop::sample::select(vec!["is", "are", "can", "has"]),
    ) {
        let mut tokens: Vec<String> = subject.clone();
        tokens.push(verb.to_owned());
        tokens.extend(object.iter().cloned());
        prop_assume!(!tokens.iter().any(|t| t == "not"));
        let first = (0, subject.len() - 1);
        let second = (subject.len() + 1, tokens.len() - 1);
        let sentence = Variant { tokens: tokens.clone(), first, second };
        let negated = negate(&sentence);
        prop_assert!(negated.is_some(), "auxiliary verb between the concepts");
        let n = negated.unwrap();
        prop_assert_eq!(n.tokens.len(), tokens.len() + 1);
        prop_assert_eq!(n.tokens.iter().filter(|t| *t == "not").count(), 1);
        prop_assert_eq!(&n.tokens[n.first.0..=n.first.1], &tokens[first.0..=first.1]);
        prop_assert_eq!(&n.tokens[n.second.0..=n.second.1], &tokens[second.0..=second.1]);
        prop_assert!(negate(&n).is_none(), "already negated");
    }

    #[test]
    fn wikitext_parser_never_panics(text in "(\\[\\[|\\]\\]|\\{\\{|\\}\\}|<ref>|</ref>|'''|\\||=|[a-z ]|\n){0,80}") {
        let _ = parse_wikitext(&text);
    }

    #[test]
    fn descriptions_are_truncated(words in 1usize..260) {
        let body: Vec<String> = (0..words).map(|k| format!("w{k}")).collect();
        let xml = format!(
            "<mediawiki><page><title>A</title><ns>0</ns><id>1</id><revision><text>[[B]] {}.</text></revision></page>\
             <page><title>B</title><ns>0</ns><id>2</id><revision><text>b is {} .</text></revision></page></mediawiki>",
            body.join(" "),
            body.join(" "),
        );
        let extraction = extract_pairs(&parse_dump(xml.as_bytes()).unwrap());
        for d in &extraction.descriptions {
            prop_assert!(d.tokens().len() <= MAX_DESCRIPTION_TOKENS);
        }
        prop_assert_eq!(extraction.pairs.len(), 1);
    }

    #[test]
    fn full_complement_sampling_is_exact(pair in toy_pair(9), seed in 0u64..1000) {
        let (m, d) = small_model(9, seed);
        let complement = LossSettings { softmax: SoftmaxMode::Sampled { negatives: 8 }, ..LossSettings::default() };
        prop_assert_eq!(
            total_loss(&m, &d, &pair, LossSettings::default(), seed).unwrap(),
            total_loss(&m, &d, &pair, complement, seed).unwrap()
        );
    }
}
