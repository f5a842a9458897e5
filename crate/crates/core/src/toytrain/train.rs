use std::fmt::Write as _;

use super::loss::{loss_and_grad, Grads, LossBreakdown, LossSettings, SoftmaxMode, Variant};
use super::model::{Decoders, ToyBiLM};
use super::vocab::ToyPair;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    /// Accepted updates.
    pub steps: usize,
    /// Initial step size.
    pub learning_rate: f64,
    pub loss: LossSettings,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            steps: 200,
            learning_rate: 2.0,
            loss: LossSettings::default(),
            seed: 42,
        }
    }
}

/// Step size growth after an accepted update and shrink after a rejected one.
const GROW: f64 = 1.2;
const SHRINK: f64 = 0.5;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub learning_rate: f64,
    pub loss: LossBreakdown,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub variant: Variant,
    /// Entry 0 is the initial loss.
    pub curve: Vec<CurvePoint>,
    pub model: ToyBiLM,
    pub decoders: Decoders,
}

impl TrainRun {
    /// `1 - final / initial` of the optimized total.
    pub fn reduction(&self) -> f64 {
        let first = self.curve.first().map_or(0.0, |p| p.total);
        let last = self.curve.last().map_or(0.0, |p| p.total);
        if first > 0.0 {
            1.0 - last / first
        } else {
            0.0
        }
    }
}

fn pair_seed(step_seed: u64, k: usize) -> u64 {
    step_seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Mean loss terms and mean gradient over `pairs`.
pub fn batch_loss_and_grad(
    model: &ToyBiLM,
    decoders: &Decoders,
    pairs: &[ToyPair],
    variant: Variant,
    settings: LossSettings,
    seed: u64,
) -> Result<(LossBreakdown, Grads)> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no training pairs".into()));
    }
    let scale = 1.0 / pairs.len() as f64;
    let mut loss = LossBreakdown::default();
    let mut grads = Grads::zeros(model, decoders);
    for (k, pair) in pairs.iter().enumerate() {
        let (l, g) = loss_and_grad(model, decoders, pair, variant, settings, pair_seed(seed, k))?;
        loss.add_scaled(&l, scale);
        grads.add_scaled(&g, scale);
    }
    Ok((loss, grads))
}

fn stepped(model: &ToyBiLM, decoders: &Decoders, g: &Grads, lr: f64) -> (ToyBiLM, Decoders) {
    let mut m = model.clone();
    let mut d = decoders.clone();
    for (theta, grad) in [
        (&mut m.theta, &g.model),
        (&mut d.ctx.theta, &g.ctx),
        (&mut d.desc.theta, &g.desc),
    ] {
        for (t, x) in theta.iter_mut().zip(grad) {
            *t -= lr * x;
        }
    }
    (m, d)
}

/// Full-batch gradient descent with an adaptive step: a step is kept
/// only if it lowers the objective (then the step grows), otherwise it is
/// halved and retried. Under full softmax the recorded totals therefore
/// decrease strictly until the step size underflows, which ends training.
pub fn train(
    mut model: ToyBiLM,
    mut decoders: Decoders,
    pairs: &[ToyPair],
    variant: Variant,
    settings: &TrainSettings,
) -> Result<TrainRun> {
    if !(settings.learning_rate > 0.0) {
        return Err(Error::InvalidArgument(
            "learning rate must be positive".into(),
        ));
    }
    let step_seed = |step: usize| settings.seed.wrapping_add(step as u64);
    let sampled = matches!(settings.loss.softmax, SoftmaxMode::Sampled { .. });
    let mut lr = settings.learning_rate;
    let (mut loss, mut grads) = batch_loss_and_grad(
        &model,
        &decoders,
        pairs,
        variant,
        settings.loss,
        step_seed(0),
    )?;
    if !loss.total(variant).is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            loss: loss.total(variant),
        });
    }
    let mut curve = vec![CurvePoint {
        step: 0,
        learning_rate: lr,
        loss,
        total: loss.total(variant),
    }];
    'steps: for step in 1..=settings.steps {
        let seed = step_seed(step);
        if sampled {
            // compare both points under the same negatives
            (loss, grads) =
                batch_loss_and_grad(&model, &decoders, pairs, variant, settings.loss, seed)?;
        }
        loop {
            let (m, d) = stepped(&model, &decoders, &grads, lr);
            let (new_loss, new_grads) =
                batch_loss_and_grad(&m, &d, pairs, variant, settings.loss, seed)?;
            let new_total = new_loss.total(variant);
            if new_total.is_finite() && new_total < loss.total(variant) {
                (model, decoders, loss, grads) = (m, d, new_loss, new_grads);
                curve.push(CurvePoint {
                    step,
                    learning_rate: lr,
                    loss,
                    total: new_total,
                });
                lr *= GROW;
                break;
            }
            lr *= SHRINK;
            if lr < MIN_STEP {
                break 'steps;
            }
        }
    }
    Ok(TrainRun {
        variant,
        curve,
        model,
        decoders,
    })
}

/// Loss curves as TSV: one row per recorded step and run.
pub fn curve_tsv(runs: &[TrainRun]) -> String {
    let mut out =
        String::from("variant\tstep\tlearning_rate\ttotal\tlang_x\tlang_y\tctx\tetn\tdesc\n");
    for run in runs {
        for p in &run.curve {
            let l = &p.loss;
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6e}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                run.variant.name(),
                p.step,
                p.learning_rate,
                p.total,
                l.lang_x,
                l.lang_y,
                l.ctx,
                l.etn,
                l.desc
            );
        }
    }
    out
}
