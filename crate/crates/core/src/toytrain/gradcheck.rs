use super::loss::{loss_and_grad, LossSettings, SoftmaxMode, Variant};
use super::model::{Decoders, ToyBiLM};
use super::vocab::ToyPair;
use crate::error::Result;

/// Denominator floor so that near-zero gradients compare on an absolute
/// scale instead of blowing up the relative error.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Flat index (model, then ctx decoder, then desc decoder) of the worst
    /// parameter.
    pub worst_parameter: usize,
    pub n_parameters: usize,
}

fn slot<'a>(m: &'a mut ToyBiLM, d: &'a mut Decoders, block: usize, k: usize) -> &'a mut f64 {
    match block {
        0 => &mut m.theta[k],
        1 => &mut d.ctx.theta[k],
        _ => &mut d.desc.theta[k],
    }
}

/// Compares analytic gradients with central finite differences for every
/// parameter, under exact softmax and no positive subsampling.
///
/// The error of one parameter is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check(
    model: &ToyBiLM,
    decoders: &Decoders,
    pair: &ToyPair,
    variant: Variant,
    epsilon: f64,
) -> Result<GradCheck> {
    let settings = LossSettings {
        softmax: SoftmaxMode::Full,
        positive_cap: usize::MAX,
    };
    let (_, analytic) = loss_and_grad(model, decoders, pair, variant, settings, 0)?;
    let eval = |m: &ToyBiLM, d: &Decoders| -> Result<f64> {
        Ok(loss_and_grad(m, d, pair, variant, settings, 0)?
            .0
            .total(variant))
    };
    let mut m = model.clone();
    let mut d = decoders.clone();
    let mut worst = (0.0f64, 0usize);
    let mut flat = 0;
    for block in 0..3 {
        let n = match block {
            0 => m.theta.len(),
            1 => d.ctx.theta.len(),
            _ => d.desc.theta.len(),
        };
        for k in 0..n {
            let orig = *slot(&mut m, &mut d, block, k);
            *slot(&mut m, &mut d, block, k) = orig + epsilon;
            let plus = eval(&m, &d)?;
            *slot(&mut m, &mut d, block, k) = orig - epsilon;
            let minus = eval(&m, &d)?;
            *slot(&mut m, &mut d, block, k) = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = match block {
                0 => analytic.model[k],
                1 => analytic.ctx[k],
                _ => analytic.desc[k],
            };
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            if rel > worst.0 {
                worst = (rel, flat);
            }
            flat += 1;
        }
    }
    Ok(GradCheck {
        max_relative_error: worst.0,
        worst_parameter: worst.1,
        n_parameters: flat,
    })
}
