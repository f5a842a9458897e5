use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mix::{coefficients, mix_row, softmax, MixMode, MixWeights};
use crate::embed_io::{self, ContainerKind, EmbeddingSet};
use crate::error::{Error, Result};

/// How inputs are turned into classifier features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Featurizer {
    /// The mixed representation itself.
    Identity,
    /// `[a, b, a * b, |a - b|]` over two mixed representations.
    Pair,
}

/// Rows of one or two embedding sets fed to a probe.
#[derive(Debug, Clone)]
pub struct ProbeInputs<'a> {
    pub featurizer: Featurizer,
    pub left: &'a EmbeddingSet,
    pub right: &'a EmbeddingSet,
    /// `(left row, right row)`; the right row is ignored for `Identity`.
    pub rows: Vec<(usize, usize)>,
}

impl<'a> ProbeInputs<'a> {
    pub fn single(set: &'a EmbeddingSet, rows: Vec<usize>) -> Self {
        ProbeInputs {
            featurizer: Featurizer::Identity,
            left: set,
            right: set,
            rows: rows.into_iter().map(|r| (r, r)).collect(),
        }
    }

    pub fn pair(
        left: &'a EmbeddingSet,
        right: &'a EmbeddingSet,
        rows: Vec<(usize, usize)>,
    ) -> Self {
        ProbeInputs {
            featurizer: Featurizer::Pair,
            left,
            right,
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_layers(&self) -> usize {
        self.left.n_layers()
    }

    pub fn feature_dim(&self) -> usize {
        match self.featurizer {
            Featurizer::Identity => self.left.dim(),
            Featurizer::Pair => 4 * self.left.dim(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.featurizer == Featurizer::Pair
            && (self.left.dim() != self.right.dim()
                || self.left.n_layers() != self.right.n_layers())
        {
            return Err(Error::InvalidArgument(format!(
                "pair inputs disagree: {}x{} vs {}x{}",
                self.left.n_layers(),
                self.left.dim(),
                self.right.n_layers(),
                self.right.dim()
            )));
        }
        for &(l, r) in &self.rows {
            if l >= self.left.n_instances() || r >= self.right.n_instances() {
                return Err(Error::InvalidArgument(format!(
                    "probe row ({l}, {r}) out of range"
                )));
            }
        }
        Ok(())
    }

    /// Mixed vectors of example `k`.
    fn mixed(&self, k: usize, coeffs: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
        let (l, r) = self.rows[k];
        let a = mix_row(self.left, l, coeffs);
        let b = match self.featurizer {
            Featurizer::Identity => None,
            Featurizer::Pair => Some(mix_row(self.right, r, coeffs)),
        };
        (a, b)
    }

    /// Features of every example under fixed mixing weights.
    pub fn features(&self, mix: &MixWeights) -> Result<FeatureMatrix> {
        self.validate()?;
        if mix.n_layers() != self.n_layers() {
            return Err(Error::InvalidArgument(format!(
                "mixing weights cover {} layers, inputs have {}",
                mix.n_layers(),
                self.n_layers()
            )));
        }
        let coeffs = mix.coefficients();
        let cols = self.feature_dim();
        let mut data = Vec::with_capacity(self.len() * cols);
        for k in 0..self.len() {
            let (a, b) = self.mixed(k, &coeffs);
            featurize(&a, b.as_deref(), &mut data);
        }
        Ok(FeatureMatrix {
            rows: self.len(),
            cols,
            data,
        })
    }
}

fn featurize(a: &[f64], b: Option<&[f64]>, out: &mut Vec<f64>) {
    match b {
        None => out.extend_from_slice(a),
        Some(b) => {
            out.extend_from_slice(a);
            out.extend_from_slice(b);
            out.extend(a.iter().zip(b).map(|(x, y)| x * y));
            out.extend(a.iter().zip(b).map(|(x, y)| (x - y).abs()));
        }
    }
}

/// Dense row-major features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged feature rows".into()));
        }
        Ok(FeatureMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }
}

/// A group of consecutive examples competing in one softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateGroup {
    pub start: usize,
    pub len: usize,
    pub gold: usize,
}

/// Supervision for a probe; the variant selects the loss.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Binary log loss on one sigmoid output.
    Binary(Vec<bool>),
    /// Cross-entropy over `n_classes` softmax outputs.
    Multiclass {
        n_classes: usize,
        labels: Vec<usize>,
    },
    /// Independent binary log losses, one sigmoid per class.
    Multilabel {
        n_classes: usize,
        labels: Vec<Vec<usize>>,
    },
    /// Cross-entropy over the scores of each candidate group (one output).
    Grouped(Vec<CandidateGroup>),
}

/// Loss family, named after the targets it trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    BinaryLog,
    CrossEntropy,
    MultilabelBinaryLog,
    GroupedCrossEntropy,
}

impl Targets {
    pub fn loss(&self) -> Loss {
        match self {
            Targets::Binary(_) => Loss::BinaryLog,
            Targets::Multiclass { .. } => Loss::CrossEntropy,
            Targets::Multilabel { .. } => Loss::MultilabelBinaryLog,
            Targets::Grouped(_) => Loss::GroupedCrossEntropy,
        }
    }

    pub fn n_outputs(&self) -> usize {
        match self {
            Targets::Binary(_) | Targets::Grouped(_) => 1,
            Targets::Multiclass { n_classes, .. } | Targets::Multilabel { n_classes, .. } => {
                *n_classes
            }
        }
    }

    fn validate(&self, n_examples: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            Targets::Binary(y) if y.len() != n_examples => {
                bad(format!("{} labels for {n_examples} examples", y.len()))
            }
            Targets::Multiclass { n_classes, labels } => {
                if labels.len() != n_examples {
                    return bad(format!("{} labels for {n_examples} examples", labels.len()));
                }
                match labels.iter().find(|&&l| l >= *n_classes) {
                    Some(l) => bad(format!("label {l} >= {n_classes} classes")),
                    None => Ok(()),
                }
            }
            Targets::Multilabel { n_classes, labels } => {
                if labels.len() != n_examples {
                    return bad(format!(
                        "{} label sets for {n_examples} examples",
                        labels.len()
                    ));
                }
                match labels.iter().flatten().find(|&&l| l >= *n_classes) {
                    Some(l) => bad(format!("label {l} >= {n_classes} classes")),
                    None => Ok(()),
                }
            }
            Targets::Grouped(groups) => {
                for g in groups {
                    if g.len == 0 || g.gold >= g.len || g.start + g.len > n_examples {
                        return bad(format!("invalid candidate group {g:?}"));
                    }
                }
                Ok(())
            }
            Targets::Binary(_) => Ok(()),
        }
    }

    fn n_terms(&self) -> usize {
        match self {
            Targets::Binary(y) => y.len(),
            Targets::Multiclass { labels, .. } => labels.len(),
            Targets::Multilabel { labels, .. } => labels.len(),
            Targets::Grouped(g) => g.len(),
        }
    }
}

/// Probe optimizer settings. Defaults are conservative, not tuned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// `None` trains full-batch with backtracking; `Some(b)` runs seeded
    /// mini-batch SGD.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub early_stop_patience: usize,
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1.0,
            epochs: 200,
            batch_size: None,
            seed: 42,
            early_stop_patience: 20,
            l2: 1e-4,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0)
            || self.epochs == 0
            || self.l2 < 0.0
            || self.batch_size == Some(0)
        {
            return Err(Error::InvalidArgument(format!(
                "invalid training config {self:?}"
            )));
        }
        Ok(())
    }
}

/// Output nonlinearity of a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Output {
    Sigmoid,
    Softmax,
}

/// Weights (classes x features, row-major) and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub n_classes: usize,
    pub n_features: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub output: Output,
}

impl LinearModel {
    pub fn zeros(n_classes: usize, n_features: usize, output: Output) -> Self {
        LinearModel {
            n_classes,
            n_features,
            weights: vec![0.0; n_classes * n_features],
            bias: vec![0.0; n_classes],
            output,
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_classes)
            .map(|c| {
                let w = &self.weights[c * self.n_features..(c + 1) * self.n_features];
                self.bias[c] as f64 + w.iter().zip(x).map(|(&w, x)| w as f64 * x).sum::<f64>()
            })
            .collect()
    }

    /// Stores the model as an `EEV1` container flagged as a model:
    /// one instance per class (`"<output>:<class>"`), one layer holding the
    /// weight row followed by the bias.
    pub fn to_container(&self) -> EmbeddingSet {
        let tag = match self.output {
            Output::Sigmoid => "sigmoid",
            Output::Softmax => "softmax",
        };
        let rows = (0..self.n_classes).map(|c| {
            let mut row = self.weights[c * self.n_features..(c + 1) * self.n_features].to_vec();
            row.push(self.bias[c]);
            (format!("{tag}:{c}"), row)
        });
        EmbeddingSet::from_rows(1, self.n_features + 1, rows).expect("consistent model shape")
    }

    pub fn from_container(set: &EmbeddingSet) -> Result<Self> {
        if set.n_layers() != 1 || set.dim() == 0 || set.n_instances() == 0 {
            return Err(Error::format(
                8,
                "model container must have 1 layer and nonzero shape",
            ));
        }
        let output = match set.instance_ids()[0].split(':').next() {
            Some("sigmoid") => Output::Sigmoid,
            Some("softmax") => Output::Softmax,
            _ => return Err(Error::format(32, "unrecognized model output tag")),
        };
        let n_features = set.dim() - 1;
        let mut weights = Vec::with_capacity(set.n_instances() * n_features);
        let mut bias = Vec::with_capacity(set.n_instances());
        for c in 0..set.n_instances() {
            let row = set.vector(c, 0);
            weights.extend_from_slice(&row[..n_features]);
            bias.push(row[n_features]);
        }
        Ok(LinearModel {
            n_classes: set.n_instances(),
            n_features,
            weights,
            bias,
            output,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        embed_io::write_container(&self.to_container(), ContainerKind::Model, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        match embed_io::read_container(path)? {
            (ContainerKind::Model, set) => LinearModel::from_container(&set),
            (ContainerKind::Embeddings, _) => Err(Error::format(
                4,
                format!("{} is an embedding set, not a model", path.display()),
            )),
        }
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Class probabilities for every feature row.
pub fn predict_proba(model: &LinearModel, features: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
    if features.cols != model.n_features {
        return Err(Error::InvalidArgument(format!(
            "features have {} columns, model expects {}",
            features.cols, model.n_features
        )));
    }
    Ok((0..features.rows)
        .map(|k| {
            let z = model.logits(features.row(k));
            match model.output {
                Output::Sigmoid => z.into_iter().map(sigmoid).collect(),
                Output::Softmax => softmax(&z),
            }
        })
        .collect())
}

/// All trainable probe parameters in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub n_outputs: usize,
    pub n_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub mix_raw: Vec<f64>,
    pub mix_scale: f64,
}

impl Params {
    fn zeros_like(&self) -> Params {
        Params {
            n_outputs: self.n_outputs,
            n_features: self.n_features,
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
            mix_raw: vec![0.0; self.mix_raw.len()],
            mix_scale: 0.0,
        }
    }

    /// Every scalar in a fixed order (weights, bias, mix raw, mix scale).
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.extend_from_slice(&self.bias);
        v.extend_from_slice(&self.mix_raw);
        v.push(self.mix_scale);
        v
    }

    pub fn unflatten(&self, flat: &[f64]) -> Params {
        let (w, rest) = flat.split_at(self.weights.len());
        let (b, rest) = rest.split_at(self.bias.len());
        let (m, rest) = rest.split_at(self.mix_raw.len());
        Params {
            weights: w.to_vec(),
            bias: b.to_vec(),
            mix_raw: m.to_vec(),
            mix_scale: rest[0],
            ..*self
        }
    }

    fn axpy(&mut self, alpha: f64, other: &Params, train_mix: bool) {
        for (p, g) in self.weights.iter_mut().zip(&other.weights) {
            *p += alpha * g;
        }
        for (p, g) in self.bias.iter_mut().zip(&other.bias) {
            *p += alpha * g;
        }
        if train_mix {
            for (p, g) in self.mix_raw.iter_mut().zip(&other.mix_raw) {
                *p += alpha * g;
            }
            self.mix_scale += alpha * other.mix_scale;
        }
    }
}

/// Regularized mean probe loss with analytic gradients.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    pub inputs: &'a ProbeInputs<'a>,
    pub targets: &'a Targets,
    pub l2: f64,
    pub mix_mode: MixMode,
    pub train_mix: bool,
}

impl<'a> Objective<'a> {
    pub fn new(
        inputs: &'a ProbeInputs<'a>,
        targets: &'a Targets,
        l2: f64,
        mix_mode: MixMode,
        train_mix: bool,
    ) -> Result<Self> {
        inputs.validate()?;
        targets.validate(inputs.len())?;
        Ok(Objective {
            inputs,
            targets,
            l2,
            mix_mode,
            train_mix,
        })
    }

    /// Loss over all terms.
    pub fn loss(&self, params: &Params) -> f64 {
        self.evaluate(params, None, false).0
    }

    /// Loss and gradient over all terms.
    pub fn loss_and_grad(&self, params: &Params) -> (f64, Params) {
        let (loss, grad) = self.evaluate(params, None, true);
        (loss, grad.expect("gradient requested"))
    }

    /// Evaluates over a subset of terms (examples, or groups for grouped
    /// targets). `None` means every term.
    fn evaluate(
        &self,
        params: &Params,
        terms: Option<&[usize]>,
        want_grad: bool,
    ) -> (f64, Option<Params>) {
        let coeffs = coefficients(self.mix_mode, &params.mix_raw, params.mix_scale);
        let mut grad = want_grad.then(|| params.zeros_like());
        let mut total = 0.0;

        let all: Vec<usize>;
        let terms = match terms {
            Some(t) => t,
            None => {
                all = (0..self.targets.n_terms()).collect();
                &all
            }
        };
        let n_terms = terms.len().max(1) as f64;
        let mut dcoeff = vec![0.0; coeffs.len()];
        let mut phi = Vec::with_capacity(self.inputs.feature_dim());

        // forward+backward for a single example given dL/dlogits
        let mut example = |k: usize, dlogits: &[f64], grad: &mut Params, cache: &ExampleCache| {
            for (c, &g) in dlogits.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &mut grad.weights[c * params.n_features..(c + 1) * params.n_features];
                for (w, &x) in row.iter_mut().zip(&cache.phi) {
                    *w += g * x / n_terms;
                }
                grad.bias[c] += g / n_terms;
            }
            if !self.train_mix {
                return;
            }
            let f = params.n_features;
            let mut dphi = vec![0.0; f];
            for (c, &g) in dlogits.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                for (d, &w) in dphi.iter_mut().zip(&params.weights[c * f..(c + 1) * f]) {
                    *d += g * w / n_terms;
                }
            }
            let (l, r) = self.inputs.rows[k];
            match &cache.b {
                None => accumulate_layer_grad(self.inputs.left, l, &dphi, &mut dcoeff),
                Some(b) => {
                    let d = b.len();
                    let a = &cache.a;
                    let mut da = vec![0.0; d];
                    let mut db = vec![0.0; d];
                    for i in 0..d {
                        let sign = (a[i] - b[i]).signum() * if a[i] == b[i] { 0.0 } else { 1.0 };
                        da[i] = dphi[i] + dphi[2 * d + i] * b[i] + dphi[3 * d + i] * sign;
                        db[i] = dphi[d + i] + dphi[2 * d + i] * a[i] - dphi[3 * d + i] * sign;
                    }
                    accumulate_layer_grad(self.inputs.left, l, &da, &mut dcoeff);
                    accumulate_layer_grad(self.inputs.right, r, &db, &mut dcoeff);
                }
            }
        };

        let forward = |k: usize, phi: &mut Vec<f64>| -> (Vec<f64>, ExampleCache) {
            let (a, b) = self.inputs.mixed(k, &coeffs);
            phi.clear();
            featurize(&a, b.as_deref(), phi);
            let z = logits(params, phi);
            (
                z,
                ExampleCache {
                    a,
                    b,
                    phi: phi.clone(),
                },
            )
        };

        match self.targets {
            Targets::Binary(y) => {
                for &k in terms {
                    let (z, cache) = forward(k, &mut phi);
                    let t = if y[k] { 1.0 } else { 0.0 };
                    total += softplus(z[0]) - t * z[0];
                    if let Some(g) = grad.as_mut() {
                        example(k, &[sigmoid(z[0]) - t], g, &cache);
                    }
                }
            }
            Targets::Multiclass { labels, .. } => {
                for &k in terms {
                    let (z, cache) = forward(k, &mut phi);
                    total += log_sum_exp(&z) - z[labels[k]];
                    if let Some(g) = grad.as_mut() {
                        let mut d = softmax(&z);
                        d[labels[k]] -= 1.0;
                        example(k, &d, g, &cache);
                    }
                }
            }
            Targets::Multilabel { labels, .. } => {
                for &k in terms {
                    let (z, cache) = forward(k, &mut phi);
                    let mut t = vec![0.0; z.len()];
                    for &l in &labels[k] {
                        t[l] = 1.0;
                    }
                    total += z
                        .iter()
                        .zip(&t)
                        .map(|(&z, &t)| softplus(z) - t * z)
                        .sum::<f64>();
                    if let Some(g) = grad.as_mut() {
                        let d: Vec<f64> = z.iter().zip(&t).map(|(&z, &t)| sigmoid(z) - t).collect();
                        example(k, &d, g, &cache);
                    }
                }
            }
            Targets::Grouped(groups) => {
                for &gi in terms {
                    let group = groups[gi];
                    let mut scores = Vec::with_capacity(group.len);
                    let mut caches = Vec::with_capacity(group.len);
                    for k in group.start..group.start + group.len {
                        let (z, cache) = forward(k, &mut phi);
                        scores.push(z[0]);
                        caches.push(cache);
                    }
                    total += log_sum_exp(&scores) - scores[group.gold];
                    if let Some(g) = grad.as_mut() {
                        let mut d = softmax(&scores);
                        d[group.gold] -= 1.0;
                        for (off, cache) in caches.iter().enumerate() {
                            example(group.start + off, &[d[off]], g, cache);
                        }
                    }
                }
            }
        }

        let mut loss = total / n_terms;
        loss += 0.5 * self.l2 * params.weights.iter().map(|w| w * w).sum::<f64>();
        if let Some(g) = grad.as_mut() {
            for (gw, w) in g.weights.iter_mut().zip(&params.weights) {
                *gw += self.l2 * w;
            }
            if self.train_mix {
                chain_mix_grad(self.mix_mode, &params.mix_raw, params.mix_scale, &dcoeff, g);
            }
        }
        (loss, grad)
    }
}

struct ExampleCache {
    a: Vec<f64>,
    b: Option<Vec<f64>>,
    phi: Vec<f64>,
}

fn logits(params: &Params, phi: &[f64]) -> Vec<f64> {
    let f = params.n_features;
    (0..params.n_outputs)
        .map(|c| {
            params.bias[c]
                + params.weights[c * f..(c + 1) * f]
                    .iter()
                    .zip(phi)
                    .map(|(w, x)| w * x)
                    .sum::<f64>()
        })
        .collect()
}

fn accumulate_layer_grad(set: &EmbeddingSet, row: usize, dmixed: &[f64], dcoeff: &mut [f64]) {
    for (layer, dc) in dcoeff.iter_mut().enumerate() {
        *dc += set
            .vector(row, layer)
            .iter()
            .zip(dmixed)
            .map(|(&v, &d)| v as f64 * d)
            .sum::<f64>();
    }
}

fn chain_mix_grad(mode: MixMode, raw: &[f64], scale: f64, dcoeff: &[f64], grad: &mut Params) {
    match mode {
        MixMode::Unnormalized => grad.mix_raw.copy_from_slice(dcoeff),
        MixMode::SoftmaxScaled => {
            let s = softmax(raw);
            let inner: f64 = dcoeff.iter().zip(&s).map(|(d, s)| d * s).sum();
            grad.mix_scale = inner;
            for (k, g) in grad.mix_raw.iter_mut().enumerate() {
                *g = scale * s[k] * (dcoeff[k] - inner);
            }
        }
    }
}

/// A trained probe plus its optimization trace.
#[derive(Debug, Clone)]
pub struct TrainedProbe {
    pub model: LinearModel,
    pub mix: MixWeights,
    /// Training loss after each epoch; entry 0 is the initial loss.
    pub history: Vec<f64>,
    pub best_epoch: usize,
}

/// Dev data for early stopping.
#[derive(Debug, Clone, Copy)]
pub struct DevSet<'a> {
    pub inputs: &'a ProbeInputs<'a>,
    pub targets: &'a Targets,
}

/// Mixing configuration for training.
#[derive(Debug, Clone, PartialEq)]
pub struct MixSetup {
    pub initial: MixWeights,
    pub trainable: bool,
}

impl MixSetup {
    pub fn fixed(weights: MixWeights) -> Self {
        MixSetup {
            initial: weights,
            trainable: false,
        }
    }

    pub fn trainable(weights: MixWeights) -> Self {
        MixSetup {
            initial: weights,
            trainable: true,
        }
    }
}

fn initial_params(n_outputs: usize, n_features: usize, mix: &MixWeights, seed: u64) -> Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Params {
        n_outputs,
        n_features,
        weights: (0..n_outputs * n_features)
            .map(|_| rng.random_range(-0.01..0.01))
            .collect(),
        bias: vec![0.0; n_outputs],
        mix_raw: mix.raw.iter().map(|&r| r as f64).collect(),
        mix_scale: mix.scale as f64,
    }
}

fn finish(
    params: &Params,
    targets: &Targets,
    mode: MixMode,
    history: Vec<f64>,
    best_epoch: usize,
) -> TrainedProbe {
    let output = match targets {
        Targets::Multiclass { .. } => Output::Softmax,
        _ => Output::Sigmoid,
    };
    TrainedProbe {
        model: LinearModel {
            n_classes: params.n_outputs,
            n_features: params.n_features,
            weights: params.weights.iter().map(|&w| w as f32).collect(),
            bias: params.bias.iter().map(|&b| b as f32).collect(),
            output,
        },
        mix: MixWeights {
            mode,
            raw: params.mix_raw.iter().map(|&r| r as f32).collect(),
            scale: params.mix_scale as f32,
        },
        history,
        best_epoch,
    }
}

/// Trains a linear probe by first-order descent.
///
/// Full-batch mode takes gradient steps with step halving until the loss
/// does not increase. With a dev set the parameters with the lowest dev
/// loss are returned, and training stops after `early_stop_patience`
/// epochs without improvement.
pub fn train_linear(
    inputs: &ProbeInputs<'_>,
    targets: &Targets,
    cfg: &TrainConfig,
    mix: &MixSetup,
    dev: Option<DevSet<'_>>,
) -> Result<TrainedProbe> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    if mix.initial.n_layers() != inputs.n_layers() {
        return Err(Error::InvalidArgument(format!(
            "mixing weights cover {} layers, inputs have {}",
            mix.initial.n_layers(),
            inputs.n_layers()
        )));
    }
    let objective = Objective::new(inputs, targets, cfg.l2, mix.initial.mode, mix.trainable)?;
    let dev_objective = dev
        .map(|d| Objective::new(d.inputs, d.targets, 0.0, mix.initial.mode, false))
        .transpose()?;
    if let Some(d) = &dev_objective {
        if d.inputs.feature_dim() != inputs.feature_dim() {
            return Err(Error::InvalidArgument(
                "dev features differ in width".into(),
            ));
        }
    }

    let mut params = initial_params(
        targets.n_outputs(),
        inputs.feature_dim(),
        &mix.initial,
        cfg.seed,
    );
    let (mut loss, mut grad) = objective.loss_and_grad(&params);
    if !loss.is_finite() {
        return Err(Error::Divergence { epoch: 0, loss });
    }
    let mut history = vec![loss];
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut since_best = 0usize;
    let mut step = cfg.learning_rate;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let n_terms = targets.n_terms();

    for epoch in 1..=cfg.epochs {
        match cfg.batch_size {
            Some(batch) if batch < n_terms => {
                let mut order: Vec<usize> = (0..n_terms).collect();
                order.shuffle(&mut rng);
                for chunk in order.chunks(batch) {
                    let (_, g) = objective.evaluate(&params, Some(chunk), true);
                    params.axpy(-cfg.learning_rate, &g.expect("gradient"), mix.trainable);
                }
                let (l, g) = objective.loss_and_grad(&params);
                if !l.is_finite() {
                    return Err(Error::Divergence { epoch, loss: l });
                }
                loss = l;
                grad = g;
            }
            _ => {
                let mut accepted = false;
                while step >= cfg.learning_rate * 1e-12 {
                    let mut candidate = params.clone();
                    candidate.axpy(-step, &grad, mix.trainable);
                    let (l, g) = objective.loss_and_grad(&candidate);
                    if l.is_finite() && l <= loss {
                        params = candidate;
                        loss = l;
                        grad = g;
                        accepted = true;
                        step = (step * 2.0).min(cfg.learning_rate);
                        break;
                    }
                    step *= 0.5;
                }
                if !accepted {
                    break;
                }
            }
        }
        history.push(loss);

        match &dev_objective {
            Some(d) => {
                let dev_loss = d.loss(&params);
                if dev_loss < best.0 {
                    best = (dev_loss, params.clone(), epoch);
                    since_best = 0;
                } else {
                    since_best += 1;
                    if since_best >= cfg.early_stop_patience {
                        break;
                    }
                }
            }
            None => best = (loss, params.clone(), epoch),
        }
    }
    if best.0.is_infinite() {
        best = (loss, params, history.len() - 1);
    }
    Ok(finish(&best.1, targets, mix.initial.mode, history, best.2))
}

impl TrainedProbe {
    /// Features of `inputs` under the trained mixing weights.
    pub fn features(&self, inputs: &ProbeInputs<'_>) -> Result<FeatureMatrix> {
        inputs.features(&self.mix)
    }

    /// Raw logits for every example.
    pub fn logits(&self, inputs: &ProbeInputs<'_>) -> Result<Vec<Vec<f64>>> {
        let x = self.features(inputs)?;
        Ok((0..x.rows).map(|k| self.model.logits(x.row(k))).collect())
    }

    pub fn predict_proba(&self, inputs: &ProbeInputs<'_>) -> Result<Vec<Vec<f64>>> {
        predict_proba(&self.model, &self.features(inputs)?)
    }

    /// Number of trainable scalars, mixing weights included.
    pub fn n_parameters(&self) -> usize {
        self.model.n_parameters()
            + self.mix.raw.len()
            + usize::from(self.mix.mode == MixMode::SoftmaxScaled)
    }
}

/// Parameter vector matching `train_linear`'s initialization, exposed for
/// gradient checks.
pub fn initial_parameters(
    inputs: &ProbeInputs<'_>,
    targets: &Targets,
    mix: &MixWeights,
    seed: u64,
) -> Params {
    initial_params(targets.n_outputs(), inputs.feature_dim(), mix, seed)
}

/// Draws a seeded random parameter vector (weights and mix) for tests.
pub fn random_parameters(
    inputs: &ProbeInputs<'_>,
    targets: &Targets,
    mix_mode: MixMode,
    seed: u64,
) -> Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_out = targets.n_outputs();
    let f = inputs.feature_dim();
    let mut gen = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let weights = gen(n_out * f);
    let bias = gen(n_out);
    let mix_raw = gen(inputs.n_layers());
    let mix_scale = match mix_mode {
        MixMode::SoftmaxScaled => 1.3,
        MixMode::Unnormalized => 1.0,
    };
    Params {
        n_outputs: n_out,
        n_features: f,
        weights,
        bias,
        mix_raw,
        mix_scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_from(rows: &[Vec<f32>], layers: usize) -> EmbeddingSet {
        let dim = rows[0].len() / layers;
        EmbeddingSet::from_rows(
            layers,
            dim,
            rows.iter()
                .enumerate()
                .map(|(i, r)| (format!("r{i}"), r.clone())),
        )
        .unwrap()
    }

    #[test]
    fn single_example_is_fit() {
        let set = set_from(&[vec![0.3, -0.7]], 1);
        let inputs = ProbeInputs::single(&set, vec![0]);
        let targets = Targets::Binary(vec![true]);
        let probe = train_linear(
            &inputs,
            &targets,
            &TrainConfig::default(),
            &MixSetup::fixed(MixWeights::uniform(1)),
            None,
        )
        .unwrap();
        assert!(probe.predict_proba(&inputs).unwrap()[0][0] > 0.5);
    }

    #[test]
    fn predict_proba_shapes() {
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5]]).unwrap();
        let zero = LinearModel::zeros(3, 2, Output::Softmax);
        for row in predict_proba(&zero, &x).unwrap() {
            for p in &row {
                assert!((p - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        let zero = LinearModel::zeros(2, 2, Output::Sigmoid);
        assert_eq!(predict_proba(&zero, &x).unwrap()[0], [0.5, 0.5]);

        let mut big = LinearModel::zeros(1, 2, Output::Sigmoid);
        big.bias[0] = 5.0; // sigmoid(5) = 0.9933
        assert!(predict_proba(&big, &x).unwrap()[0][0] >= 0.99);

        let model = LinearModel {
            n_classes: 3,
            n_features: 2,
            weights: vec![0.5, -1.0, 2.0, 0.1, -0.3, 0.7],
            bias: vec![0.1, 0.2, -0.4],
            output: Output::Softmax,
        };
        for row in predict_proba(&model, &x).unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let narrow = FeatureMatrix::from_rows(&[vec![1.0]]).unwrap();
        assert!(predict_proba(&model, &narrow).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.eev");
        let model = LinearModel {
            n_classes: 2,
            n_features: 3,
            weights: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            bias: vec![-1.0, 0.5],
            output: Output::Softmax,
        };
        model.save(&path).unwrap();
        assert_eq!(LinearModel::load(&path).unwrap(), model);
        assert!(embed_io::read_embeddings(&path).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let set = set_from(&[vec![f32::INFINITY, 1.0]], 1);
        let inputs = ProbeInputs::single(&set, vec![0]);
        let targets = Targets::Binary(vec![true]);
        let err = train_linear(
            &inputs,
            &targets,
            &TrainConfig::default(),
            &MixSetup::fixed(MixWeights::uniform(1)),
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
        assert!(err.to_string().contains("smaller learning rate"));
    }

    #[test]
    fn label_validation() {
        let set = set_from(&[vec![1.0], vec![2.0]], 1);
        let inputs = ProbeInputs::single(&set, vec![0, 1]);
        let targets = Targets::Multiclass {
            n_classes: 2,
            labels: vec![0, 2],
        };
        assert!(train_linear(
            &inputs,
            &targets,
            &TrainConfig::default(),
            &MixSetup::fixed(MixWeights::uniform(1)),
            None
        )
        .is_err());
    }

    #[test]
    fn minibatch_mode_runs_and_is_deterministic() {
        let rows: Vec<Vec<f32>> = (0..40)
            .map(|i| vec![(i as f32 / 20.0) - 1.0, ((i * 7) % 5) as f32 / 5.0])
            .collect();
        let set = set_from(&rows, 1);
        let inputs = ProbeInputs::single(&set, (0..40).collect());
        let targets = Targets::Binary((0..40).map(|i| i >= 20).collect());
        let cfg = TrainConfig {
            batch_size: Some(8),
            learning_rate: 0.5,
            epochs: 30,
            ..Default::default()
        };
        let mix = MixSetup::fixed(MixWeights::uniform(1));
        let a = train_linear(&inputs, &targets, &cfg, &mix, None).unwrap();
        let b = train_linear(&inputs, &targets, &cfg, &mix, None).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.history.last().unwrap() < &a.history[0]);
    }

    #[test]
    fn full_batch_loss_never_increases() {
        let rows: Vec<Vec<f32>> = (0..30)
            .map(|i| {
                vec![
                    (i as f32).sin(),
                    (i as f32 * 0.37).cos(),
                    0.1 * i as f32,
                    -0.5,
                    0.2,
                    (i % 3) as f32,
                ]
            })
            .collect();
        let set = set_from(&rows, 3);
        let inputs = ProbeInputs::single(&set, (0..30).collect());
        let targets = Targets::Multiclass {
            n_classes: 3,
            labels: (0..30).map(|i| i % 3).collect(),
        };
        let cfg = TrainConfig {
            epochs: 60,
            l2: 1e-3,
            ..Default::default()
        };
        let probe = train_linear(
            &inputs,
            &targets,
            &cfg,
            &MixSetup::trainable(MixWeights::uniform(3)),
            None,
        )
        .unwrap();
        for w in probe.history.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let total: f32 = probe.mix.coefficients().iter().map(|&c| c as f32).sum();
        assert!((total - probe.mix.scale).abs() < 1e-5);
    }
}
