use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{BowDecoder, Decoders, ToyBiLM};
use super::vocab::ToyPair;
use crate::error::{Error, Result};

/// How each log-probability is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoftmaxMode {
    /// Exact softmax over the vocabulary.
    Full,
    /// Softmax over the target plus `negatives` distinct uniform draws from
    /// the rest of the vocabulary (all of it when `negatives >= V - 1`).
    Sampled { negatives: usize },
}

/// Which hyperlink objective to optimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Language-model terms only (the no-hyperlink baseline).
    Baseline,
    /// `l_lang(x) + l_lang(y) + l_ctx + l_desc`.
    Full,
    /// Without `l_ctx`.
    NoCtx,
    /// `l_etn` in place of `l_ctx`.
    Etn,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Full => "full",
            Variant::NoCtx => "no_ctx",
            Variant::Etn => "etn",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        Ok(match s {
            "baseline" => Variant::Baseline,
            "full" => Variant::Full,
            "no_ctx" => Variant::NoCtx,
            "etn" => Variant::Etn,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown variant {other:?} (baseline, full, no_ctx, etn)"
                )))
            }
        })
    }
}

/// Sampling knobs shared by every loss term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossSettings {
    pub softmax: SoftmaxMode,
    /// At most this many reconstruction targets per bag-of-words term.
    pub positive_cap: usize,
}

impl LossSettings {
    pub fn validate(&self) -> Result<()> {
        if self.positive_cap == 0 {
            return Err(Error::InvalidArgument(
                "positive cap must be at least 1".into(),
            ));
        }
        if self.softmax == (SoftmaxMode::Sampled { negatives: 0 }) {
            return Err(Error::InvalidArgument(
                "sampled softmax needs at least 1 negative".into(),
            ));
        }
        Ok(())
    }
}

impl Default for LossSettings {
    fn default() -> Self {
        LossSettings {
            softmax: SoftmaxMode::Full,
            positive_cap: 50,
        }
    }
}

/// Per-term losses of one pair (or a batch mean).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub lang_x: f64,
    pub lang_y: f64,
    pub ctx: f64,
    pub etn: f64,
    pub desc: f64,
}

impl LossBreakdown {
    pub fn total(&self, variant: Variant) -> f64 {
        let lang = self.lang_x + self.lang_y;
        match variant {
            Variant::Baseline => lang,
            Variant::Full => lang + self.ctx + self.desc,
            Variant::NoCtx => lang + self.desc,
            Variant::Etn => lang + self.etn + self.desc,
        }
    }

    pub(crate) fn add_scaled(&mut self, other: &LossBreakdown, scale: f64) {
        self.lang_x += other.lang_x * scale;
        self.lang_y += other.lang_y * scale;
        self.ctx += other.ctx * scale;
        self.etn += other.etn * scale;
        self.desc += other.desc * scale;
    }
}

/// Gradients laid out like the parameters they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub model: Vec<f64>,
    pub ctx: Vec<f64>,
    pub desc: Vec<f64>,
}

impl Grads {
    pub fn zeros(model: &ToyBiLM, decoders: &Decoders) -> Self {
        Grads {
            model: vec![0.0; model.theta.len()],
            ctx: vec![0.0; decoders.ctx.theta.len()],
            desc: vec![0.0; decoders.desc.theta.len()],
        }
    }

    pub(crate) fn add_scaled(&mut self, other: &Grads, scale: f64) {
        for (a, b) in [
            (&mut self.model, &other.model),
            (&mut self.ctx, &other.ctx),
            (&mut self.desc, &other.desc),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y * scale;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.model
            .iter()
            .chain(&self.ctx)
            .chain(&self.desc)
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Draws reconstruction targets and negatives; seeded per evaluation so
/// that repeated evaluations see identical samples.
pub(crate) struct Sampler {
    rng: ChaCha8Rng,
    settings: LossSettings,
}

impl Sampler {
    pub fn new(settings: LossSettings, seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            settings,
        }
    }

    /// Candidate classes for `target`, sorted ascending so that the full
    /// complement reproduces the exact softmax bit for bit.
    fn candidates(&mut self, target: usize, vocab: usize) -> Vec<usize> {
        match self.settings.softmax {
            SoftmaxMode::Sampled { negatives } if negatives < vocab - 1 => {
                let mut out: Vec<usize> = index::sample(&mut self.rng, vocab - 1, negatives)
                    .into_iter()
                    .map(|k| if k >= target { k + 1 } else { k })
                    .collect();
                out.push(target);
                out.sort_unstable();
                out
            }
            _ => (0..vocab).collect(),
        }
    }

    /// Up to `positive_cap` token occurrences, in sequence order.
    fn positives(&mut self, tokens: &[usize]) -> Vec<usize> {
        let cap = self.settings.positive_cap;
        if tokens.len() <= cap {
            return tokens.to_vec();
        }
        let mut picked = index::sample(&mut self.rng, tokens.len(), cap).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|k| tokens[k]).collect()
    }
}

/// `-log softmax(logits)[target]` over `candidates`; adds the gradient
/// w.r.t. the logits into `dlogits`.
fn softmax_nll(logits: &[f64], target: usize, candidates: &[usize], dlogits: &mut [f64]) -> f64 {
    let max = candidates
        .iter()
        .map(|&c| logits[c])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for &c in candidates {
        total += (logits[c] - max).exp();
    }
    for &c in candidates {
        dlogits[c] += (logits[c] - max).exp() / total;
    }
    dlogits[target] -= 1.0;
    total.ln() + max - logits[target]
}

/// `l_lang` of one sequence: forward next-token plus backward
/// previous-token negative log-likelihoods. Positions without a neighbour
/// contribute nothing, so a length-T sequence has 2(T-1) terms.
pub(crate) fn lang_term(
    model: &ToyBiLM,
    ids: &[usize],
    sampler: &mut Sampler,
    grad: &mut [f64],
) -> f64 {
    let n = ids.len();
    if n < 2 {
        return 0.0;
    }
    let trace = model.forward(ids);
    let p = model.config.proj;
    let mut dz = [vec![vec![0.0; p]; n], vec![vec![0.0; p]; n]];
    let mut loss = 0.0;
    for dir in 0..2 {
        let positions: Vec<(usize, usize)> = if dir == 0 {
            (0..n - 1).map(|t| (t, t + 1)).collect()
        } else {
            (1..n).map(|t| (t, t - 1)).collect()
        };
        for (t, target) in positions {
            let z = &trace.zs[dir][t];
            let logits = model.lm_logits(dir, z);
            let mut dl = vec![0.0; model.vocab_size];
            let cands = sampler.candidates(ids[target], model.vocab_size);
            loss += softmax_nll(&logits, ids[target], &cands, &mut dl);
            let d = model.lm_backward(dir, z, &dl, grad);
            for (a, b) in dz[dir][t].iter_mut().zip(d) {
                *a += b;
            }
        }
    }
    model.backward(&trace, &dz, grad);
    loss
}

/// Bag-of-words reconstruction of `targets` from the mean contextual
/// vector of `cond` over positions `span` (inclusive).
#[allow(clippy::too_many_arguments)]
pub(crate) fn bow_term(
    model: &ToyBiLM,
    decoder: &BowDecoder,
    cond: &[usize],
    span: (usize, usize),
    targets: &[usize],
    sampler: &mut Sampler,
    model_grad: &mut [f64],
    decoder_grad: &mut [f64],
) -> f64 {
    let positives = sampler.positives(targets);
    if positives.is_empty() {
        return 0.0;
    }
    let trace = model.forward(cond);
    let width = span.1 - span.0 + 1;
    let mut m = vec![0.0; model.output_dim()];
    for t in span.0..=span.1 {
        for (a, b) in m.iter_mut().zip(trace.contextual(t)) {
            *a += b / width as f64;
        }
    }
    let logits = decoder.logits(&m);
    let mut dl = vec![0.0; model.vocab_size];
    let mut loss = 0.0;
    for &y in &positives {
        let cands = sampler.candidates(y, model.vocab_size);
        loss += softmax_nll(&logits, y, &cands, &mut dl);
    }
    let dm = decoder.backward(&m, &dl, decoder_grad);
    let p = model.config.proj;
    let n = cond.len();
    let mut dz = [vec![vec![0.0; p]; n], vec![vec![0.0; p]; n]];
    for t in span.0..=span.1 {
        for k in 0..p {
            dz[0][t][k] += dm[k] / width as f64;
            dz[1][t][k] += dm[p + k] / width as f64;
        }
    }
    model.backward(&trace, &dz, model_grad);
    loss
}

/// Loss terms and gradients of one pair. Only the terms the variant
/// optimizes are computed; the others stay zero.
pub fn loss_and_grad(
    model: &ToyBiLM,
    decoders: &Decoders,
    pair: &ToyPair,
    variant: Variant,
    settings: LossSettings,
    seed: u64,
) -> Result<(LossBreakdown, Grads)> {
    settings.validate()?;
    pair.validate(model.vocab_size)?;
    let mut sampler = Sampler::new(settings, seed);
    let mut g = Grads::zeros(model, decoders);
    let mut out = LossBreakdown {
        lang_x: lang_term(model, &pair.context, &mut sampler, &mut g.model),
        lang_y: lang_term(model, &pair.description, &mut sampler, &mut g.model),
        ..LossBreakdown::default()
    };
    let (boc, span) = pair.marked_context();
    let bod = pair.marked_description();
    let desc_span = (1, pair.description.len());
    if variant != Variant::Baseline {
        out.desc = bow_term(
            model,
            &decoders.desc,
            &boc,
            span,
            &pair.description,
            &mut sampler,
            &mut g.model,
            &mut g.desc,
        );
    }
    match variant {
        Variant::Full => {
            out.ctx = bow_term(
                model,
                &decoders.ctx,
                &bod,
                desc_span,
                &pair.context,
                &mut sampler,
                &mut g.model,
                &mut g.ctx,
            );
        }
        Variant::Etn => {
            let mention = &pair.context[pair.span.0..=pair.span.1];
            out.etn = bow_term(
                model,
                &decoders.ctx,
                &bod,
                desc_span,
                mention,
                &mut sampler,
                &mut g.model,
                &mut g.ctx,
            );
        }
        Variant::Baseline | Variant::NoCtx => {}
    }
    Ok((out, g))
}

/// Every loss term of one pair, each under its own sampler seeded with
/// `seed`.
pub fn total_loss(
    model: &ToyBiLM,
    decoders: &Decoders,
    pair: &ToyPair,
    settings: LossSettings,
    seed: u64,
) -> Result<LossBreakdown> {
    settings.validate()?;
    pair.validate(model.vocab_size)?;
    Ok(LossBreakdown {
        lang_x: single_lang(model, &pair.context, settings, seed),
        lang_y: single_lang(model, &pair.description, settings, seed),
        ctx: l_ctx(model, &decoders.ctx, pair, settings, seed)?,
        etn: l_etn(model, &decoders.ctx, pair, settings, seed)?,
        desc: l_desc(model, &decoders.desc, pair, settings, seed)?,
    })
}

fn single_lang(model: &ToyBiLM, ids: &[usize], settings: LossSettings, seed: u64) -> f64 {
    let mut sampler = Sampler::new(settings, seed);
    let mut scratch = vec![0.0; model.theta.len()];
    lang_term(model, ids, &mut sampler, &mut scratch)
}

/// `l_lang` of a single sequence of at least two tokens.
pub fn l_lang(model: &ToyBiLM, ids: &[usize], softmax: SoftmaxMode, seed: u64) -> Result<f64> {
    if ids.len() < 2 {
        return Err(Error::InvalidArgument(
            "l_lang needs at least 2 tokens".into(),
        ));
    }
    model.check_ids(ids)?;
    let settings = LossSettings {
        softmax,
        ..LossSettings::default()
    };
    settings.validate()?;
    Ok(single_lang(model, ids, settings, seed))
}

fn single_bow(
    model: &ToyBiLM,
    decoder: &BowDecoder,
    cond: &[usize],
    span: (usize, usize),
    targets: &[usize],
    settings: LossSettings,
    seed: u64,
) -> f64 {
    let mut sampler = Sampler::new(settings, seed);
    let mut mg = vec![0.0; model.theta.len()];
    let mut dg = vec![0.0; decoder.theta.len()];
    bow_term(
        model,
        decoder,
        cond,
        span,
        targets,
        &mut sampler,
        &mut mg,
        &mut dg,
    )
}

/// `l_desc`: description tokens from the `[BOC]`-marked mention.
pub fn l_desc(
    model: &ToyBiLM,
    decoder: &BowDecoder,
    pair: &ToyPair,
    settings: LossSettings,
    seed: u64,
) -> Result<f64> {
    settings.validate()?;
    pair.validate(model.vocab_size)?;
    let (boc, span) = pair.marked_context();
    Ok(single_bow(
        model,
        decoder,
        &boc,
        span,
        &pair.description,
        settings,
        seed,
    ))
}

/// `l_ctx`: context tokens from the `[BOD]`-marked description.
pub fn l_ctx(
    model: &ToyBiLM,
    decoder: &BowDecoder,
    pair: &ToyPair,
    settings: LossSettings,
    seed: u64,
) -> Result<f64> {
    settings.validate()?;
    pair.validate(model.vocab_size)?;
    let bod = pair.marked_description();
    Ok(single_bow(
        model,
        decoder,
        &bod,
        (1, pair.description.len()),
        &pair.context,
        settings,
        seed,
    ))
}

/// `l_etn`: like `l_ctx` but reconstructing only the mention tokens.
pub fn l_etn(
    model: &ToyBiLM,
    decoder: &BowDecoder,
    pair: &ToyPair,
    settings: LossSettings,
    seed: u64,
) -> Result<f64> {
    settings.validate()?;
    pair.validate(model.vocab_size)?;
    let bod = pair.marked_description();
    let mention = &pair.context[pair.span.0..=pair.span.1];
    Ok(single_bow(
        model,
        decoder,
        &bod,
        (1, pair.description.len()),
        mention,
        settings,
        seed,
    ))
}
