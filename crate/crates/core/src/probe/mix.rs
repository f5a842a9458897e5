use serde::{Deserialize, Serialize};

use crate::embed_io::EmbeddingSet;
use crate::error::{Error, Result};

/// How per-layer mixing scalars are turned into layer coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    /// `scale * softmax(raw)`.
    #[default]
    SoftmaxScaled,
    /// `raw` used directly.
    Unnormalized,
}

impl std::str::FromStr for MixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax_scaled" | "softmax" => Ok(MixMode::SoftmaxScaled),
            "unnormalized" => Ok(MixMode::Unnormalized),
            other => Err(Error::InvalidArgument(format!(
                "unknown mix mode {other:?}"
            ))),
        }
    }
}

/// Trainable layer-mixing scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixWeights {
    pub mode: MixMode,
    pub raw: Vec<f32>,
    pub scale: f32,
}

impl MixWeights {
    /// Uniform softmax weights with unit scale (the arithmetic layer mean).
    pub fn uniform(n_layers: usize) -> Self {
        MixWeights {
            mode: MixMode::SoftmaxScaled,
            raw: vec![0.0; n_layers],
            scale: 1.0,
        }
    }

    /// Initial weights for `mode`: uniform softmax, or `1 / L` per layer.
    pub fn initial(mode: MixMode, n_layers: usize) -> Self {
        match mode {
            MixMode::SoftmaxScaled => MixWeights::uniform(n_layers),
            MixMode::Unnormalized => MixWeights {
                mode,
                raw: vec![1.0 / n_layers.max(1) as f32; n_layers],
                scale: 1.0,
            },
        }
    }

    pub fn n_layers(&self) -> usize {
        self.raw.len()
    }

    /// Effective per-layer coefficients.
    pub fn coefficients(&self) -> Vec<f64> {
        let raw: Vec<f64> = self.raw.iter().map(|&r| r as f64).collect();
        coefficients(self.mode, &raw, self.scale as f64)
    }
}

pub(crate) fn softmax(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|r| (r - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub(crate) fn coefficients(mode: MixMode, raw: &[f64], scale: f64) -> Vec<f64> {
    match mode {
        MixMode::SoftmaxScaled => softmax(raw).into_iter().map(|s| s * scale).collect(),
        MixMode::Unnormalized => raw.to_vec(),
    }
}

/// Weighted layer sum for one instance.
pub(crate) fn mix_row(set: &EmbeddingSet, row: usize, coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; set.dim()];
    for (layer, &c) in coeffs.iter().enumerate() {
        for (o, &v) in out.iter_mut().zip(set.vector(row, layer)) {
            *o += c * v as f64;
        }
    }
    out
}

/// Combines every instance's layers into a single vector.
pub fn mix_layers(set: &EmbeddingSet, weights: &MixWeights) -> Result<Vec<Vec<f32>>> {
    if weights.n_layers() != set.n_layers() {
        return Err(Error::InvalidArgument(format!(
            "mixing weights cover {} layers, embeddings have {}",
            weights.n_layers(),
            set.n_layers()
        )));
    }
    let coeffs = weights.coefficients();
    Ok((0..set.n_instances())
        .map(|row| {
            mix_row(set, row, &coeffs)
                .into_iter()
                .map(|v| v as f32)
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_layer_set() -> EmbeddingSet {
        EmbeddingSet::new(vec!["a".into()], 3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 9.0]).unwrap()
    }

    #[test]
    fn uniform_softmax_is_mean() {
        let out = mix_layers(&three_layer_set(), &MixWeights::uniform(3)).unwrap();
        assert!((out[0][0] - 3.0).abs() < 1e-6);
        assert!((out[0][1] - 5.0).abs() < 1e-6);
    }

    #[test]
    fn unnormalized_one_hot_selects_layer() {
        let w = MixWeights {
            mode: MixMode::Unnormalized,
            raw: vec![1.0, 0.0, 0.0],
            scale: 1.0,
        };
        assert_eq!(mix_layers(&three_layer_set(), &w).unwrap()[0], [1.0, 2.0]);
    }

    #[test]
    fn saturated_softmax_scales_first_layer() {
        let w = MixWeights {
            mode: MixMode::SoftmaxScaled,
            raw: vec![10.0, 0.0, 0.0],
            scale: 2.0,
        };
        // softmax weights: e^10/(e^10+2) for layer 0, about 4.5e-5 for the others
        let out = mix_layers(&three_layer_set(), &w).unwrap();
        for (got, base) in out[0].iter().zip([1.0f32, 2.0]) {
            assert!(((got - 2.0 * base) / (2.0 * base)).abs() < 1e-3, "{got}");
        }
    }

    #[test]
    fn softmax_coefficients_sum_to_scale() {
        let w = MixWeights {
            mode: MixMode::SoftmaxScaled,
            raw: vec![0.3, -1.2, 2.5, 0.0],
            scale: 1.7,
        };
        let total: f64 = w.coefficients().iter().sum();
        assert!((total - 1.7).abs() < 1e-6);
    }

    #[test]
    fn layer_count_mismatch() {
        assert!(matches!(
            mix_layers(&three_layer_set(), &MixWeights::uniform(2)),
            Err(Error::InvalidArgument(_))
        ));
    }
}
