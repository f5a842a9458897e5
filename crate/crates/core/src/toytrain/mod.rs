//! Desk-scale training of a bidirectional LM with hyperlink reconstruction.
//!
//! Each training pair is a sentence `x` containing a linked mention and the
//! truncated description `y` of the linked entity. The objective sums a
//! bidirectional language-model loss over both sequences with two
//! bag-of-words reconstruction losses:
//!
//! * `l_desc` predicts description tokens from the averaged contextual
//!   vectors of the mention, read off `[BOC] x` (span shifted by one).
//! * `l_ctx` predicts context tokens from the averaged contextual vectors of
//!   `[BOD] y` over all description positions.
//!
//! `l_etn` is `l_ctx` restricted to the mention tokens. Gradients are
//! hand-derived and checked against finite differences in [`grad_check`].

mod gradcheck;
mod loss;
mod model;
mod train;
mod vocab;

pub use gradcheck::{grad_check, GradCheck};
pub use loss::{
    l_ctx, l_desc, l_etn, l_lang, loss_and_grad, total_loss, Grads, LossBreakdown, LossSettings,
    SoftmaxMode, Variant,
};
pub use model::{BowDecoder, Decoders, ToyBiLM, ToyConfig};
pub use train::{batch_loss_and_grad, curve_tsv, train, CurvePoint, TrainRun, TrainSettings};
pub use vocab::{ToyPair, Vocab, BOC, BOC_ID, BOD, BOD_ID, BOS, EOS, SPECIALS, UNK, UNK_ID};

use rayon::prelude::*;

use crate::error::Result;
use crate::wikient::HyperlinkPair;

/// Vocabulary over all context and description tokens plus the pairs
/// mapped onto it.
pub fn build_corpus(
    pairs: &[HyperlinkPair],
    min_count: usize,
    max_vocab: usize,
) -> (Vocab, Vec<ToyPair>) {
    let texts = pairs
        .iter()
        .flat_map(|p| [p.context.tokens(), p.description.tokens()]);
    let vocab = Vocab::build(texts, min_count, max_vocab);
    let toy = pairs
        .iter()
        .map(|p| ToyPair::from_pair(p, &vocab))
        .collect();
    (vocab, toy)
}

/// Trains every variant from the same initial parameters, one run per
/// thread. Runs come back in `variants` order.
pub fn train_variants(
    model: &ToyBiLM,
    decoders: &Decoders,
    pairs: &[ToyPair],
    variants: &[Variant],
    settings: &TrainSettings,
) -> Result<Vec<TrainRun>> {
    variants
        .par_iter()
        .map(|&v| train(model.clone(), decoders.clone(), pairs, v, settings))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const V: usize = 12;

    fn tiny_config() -> ToyConfig {
        ToyConfig {
            dim: 4,
            hidden: 4,
            proj: 3,
            init_scale: 0.5,
        }
    }

    fn uniform_model() -> (ToyBiLM, Decoders) {
        let mut m = ToyBiLM::new(V, tiny_config(), 1).unwrap();
        m.zero_output_layers();
        let d = Decoders::uniform(&m);
        (m, d)
    }

    fn random_model(seed: u64) -> (ToyBiLM, Decoders) {
        let m = ToyBiLM::new(V, tiny_config(), seed).unwrap();
        let d = Decoders::new(&m, seed);
        (m, d)
    }

    fn pair() -> ToyPair {
        ToyPair {
            context: vec![5, 6, 7, 8, 9],
            span: (1, 2),
            description: vec![10, 11, 5],
        }
    }

    fn full() -> LossSettings {
        LossSettings::default()
    }

    fn complement() -> LossSettings {
        LossSettings {
            softmax: SoftmaxMode::Sampled { negatives: V - 1 },
            ..LossSettings::default()
        }
    }

    #[test]
    fn uniform_lang_oracle() {
        let (m, _) = uniform_model();
        let log_v = (V as f64).ln();
        let two = l_lang(&m, &[5, 6], SoftmaxMode::Full, 0).unwrap();
        assert!((two - 2.0 * log_v).abs() < 1e-12);
        let five = l_lang(&m, &[5, 6, 7, 8, 9], SoftmaxMode::Full, 0).unwrap();
        assert!((five - 8.0 * log_v).abs() < 1e-12);
        assert!(l_lang(&m, &[5], SoftmaxMode::Full, 0).is_err());
    }

    #[test]
    fn uniform_bow_oracles() {
        let (m, d) = uniform_model();
        let log_v = (V as f64).ln();
        let p = pair();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        assert!(close(
            l_desc(&m, &d.desc, &p, full(), 0).unwrap(),
            3.0 * log_v
        ));
        assert!(close(
            l_ctx(&m, &d.ctx, &p, full(), 0).unwrap(),
            5.0 * log_v
        ));
        assert!(close(
            l_etn(&m, &d.ctx, &p, full(), 0).unwrap(),
            2.0 * log_v
        ));
        let one = ToyPair {
            span: (3, 3),
            ..p.clone()
        };
        assert!(close(l_etn(&m, &d.ctx, &one, full(), 0).unwrap(), log_v));
    }

    #[test]
    fn positive_cap() {
        let (m, d) = uniform_model();
        let log_v = (V as f64).ln();
        let long = ToyPair {
            description: (0..60).map(|k| 5 + k % 7).collect(),
            ..pair()
        };
        let cap50 = l_desc(&m, &d.desc, &long, full(), 3).unwrap();
        assert!((cap50 - 50.0 * log_v).abs() < 1e-9);
        let cap1 = LossSettings {
            positive_cap: 1,
            ..full()
        };
        assert!((l_desc(&m, &d.desc, &long, cap1, 3).unwrap() - log_v).abs() < 1e-12);
        let zero = LossSettings {
            positive_cap: 0,
            ..full()
        };
        assert!(l_desc(&m, &d.desc, &long, zero, 3).is_err());
    }

    #[test]
    fn capped_positive_is_seeded() {
        let (m, d) = random_model(4);
        let long = ToyPair {
            description: (0..20).map(|k| 5 + k % 7).collect(),
            ..pair()
        };
        let cap1 = LossSettings {
            positive_cap: 1,
            ..full()
        };
        let a = l_desc(&m, &d.desc, &long, cap1, 9).unwrap();
        assert_eq!(a, l_desc(&m, &d.desc, &long, cap1, 9).unwrap());
        let differs = (0..20).any(|s| l_desc(&m, &d.desc, &long, cap1, s).unwrap() != a);
        assert!(differs);
    }

    #[test]
    fn full_complement_matches_exact_softmax() {
        let (m, d) = random_model(7);
        let p = pair();
        for s in 0..4 {
            assert_eq!(
                l_lang(&m, &p.context, SoftmaxMode::Full, s).unwrap(),
                l_lang(&m, &p.context, SoftmaxMode::Sampled { negatives: V - 1 }, s).unwrap()
            );
            assert_eq!(
                total_loss(&m, &d, &p, full(), s).unwrap(),
                total_loss(&m, &d, &p, complement(), s).unwrap()
            );
        }
        let few = LossSettings {
            softmax: SoftmaxMode::Sampled { negatives: 3 },
            ..full()
        };
        let sampled = l_lang(&m, &p.context, few.softmax, 0).unwrap();
        assert!(sampled < l_lang(&m, &p.context, SoftmaxMode::Full, 0).unwrap());
        let no_negatives = LossSettings {
            softmax: SoftmaxMode::Sampled { negatives: 0 },
            ..full()
        };
        assert!(total_loss(&m, &d, &p, no_negatives, 0).is_err());
    }

    #[test]
    fn totals_are_sums_of_terms() {
        let (m, d) = random_model(3);
        let p = pair();
        let all = total_loss(&m, &d, &p, full(), 0).unwrap();
        for term in [all.lang_x, all.lang_y, all.ctx, all.etn, all.desc] {
            assert!(term >= 0.0);
        }
        let f = all.total(Variant::Full);
        assert!((f - (all.lang_x + all.lang_y + all.ctx + all.desc)).abs() < 1e-12);
        assert!(all.total(Variant::NoCtx) < f);
        for variant in [
            Variant::Baseline,
            Variant::Full,
            Variant::NoCtx,
            Variant::Etn,
        ] {
            let (active, _) = loss_and_grad(&m, &d, &p, variant, full(), 0).unwrap();
            assert!(
                (active.total(variant) - all.total(variant)).abs() < 1e-12,
                "{variant:?}"
            );
        }
    }

    #[test]
    fn etn_equals_ctx_when_span_covers_sentence() {
        let (m, d) = random_model(5);
        let p = ToyPair {
            span: (0, 4),
            ..pair()
        };
        let ctx = l_ctx(&m, &d.ctx, &p, full(), 0).unwrap();
        assert_eq!(ctx, l_etn(&m, &d.ctx, &p, full(), 0).unwrap());
        let all = total_loss(&m, &d, &p, full(), 0).unwrap();
        assert_eq!(all.total(Variant::Full), all.total(Variant::Etn));
    }

    #[test]
    fn zero_loss_pair_has_zero_gradient() {
        let (mut m, mut d) = random_model(2);
        let p = ToyPair {
            context: vec![6, 6, 6],
            span: (1, 1),
            description: vec![6, 6],
        };
        m.bias_output(6, 1000.0);
        d.ctx.bias_output(6, 1000.0);
        d.desc.bias_output(6, 1000.0);
        for variant in [Variant::Full, Variant::Etn] {
            let (loss, g) = loss_and_grad(&m, &d, &p, variant, full(), 0).unwrap();
            assert_eq!(loss.total(variant), 0.0);
            assert_eq!(g.norm(), 0.0);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (m, d) = random_model(11);
        let p = pair();
        for variant in [
            Variant::Baseline,
            Variant::Full,
            Variant::NoCtx,
            Variant::Etn,
        ] {
            let check = grad_check(&m, &d, &p, variant, 1e-5).unwrap();
            assert_eq!(
                check.n_parameters,
                m.n_parameters() + d.ctx.theta.len() + d.desc.theta.len()
            );
            assert!(check.max_relative_error < 1e-4, "{variant:?}: {check:?}");
        }
    }

    #[test]
    fn finite_difference_error_plateaus_across_epsilons() {
        let (m, d) = random_model(13);
        let errs: Vec<f64> = [1e-3, 1e-4, 1e-5]
            .iter()
            .map(|&e| {
                grad_check(&m, &d, &pair(), Variant::Full, e)
                    .unwrap()
                    .max_relative_error
            })
            .collect();
        for e in &errs {
            assert!(*e < 1e-4, "{errs:?}");
        }
    }

    #[test]
    fn training_lowers_the_objective() {
        let (m, d) = random_model(17);
        let pairs = vec![
            pair(),
            ToyPair {
                span: (3, 4),
                ..pair()
            },
        ];
        let settings = TrainSettings {
            steps: 20,
            ..TrainSettings::default()
        };
        let run = train(m, d, &pairs, Variant::Full, &settings).unwrap();
        assert!(run.curve.windows(2).all(|w| w[1].total < w[0].total));
        assert!(run.reduction() > 0.0);
        let tsv = curve_tsv(&[run]);
        assert!(tsv.starts_with("variant\tstep"));
        assert!(tsv.lines().nth(1).unwrap().starts_with("full\t0\t"));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [
            Variant::Baseline,
            Variant::Full,
            Variant::NoCtx,
            Variant::Etn,
        ] {
            assert_eq!(Variant::parse(v.name()).unwrap(), v);
        }
        assert!(Variant::parse("elmo").is_err());
    }
}
