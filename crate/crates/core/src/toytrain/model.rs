use std::ops::Range;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sizes of the toy contextualizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    /// Token embedding width.
    pub dim: usize,
    /// Recurrent state width per direction.
    pub hidden: usize,
    /// Projected output width per direction.
    pub proj: usize,
    /// Initial weights are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            dim: 16,
            hidden: 16,
            proj: 8,
            init_scale: 0.1,
        }
    }
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub emb: Range<usize>,
    pub dirs: [DirLayout; 2],
    pub total: usize,
}

/// One direction: recurrence `W e + U h + b`, projection `P h`, and the
/// language-model softmax layer `O z + c`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DirLayout {
    pub w: Range<usize>,
    pub u: Range<usize>,
    pub b: Range<usize>,
    pub p: Range<usize>,
    pub o: Range<usize>,
    pub c: Range<usize>,
}

impl Layout {
    fn new(v: usize, cfg: &ToyConfig) -> Layout {
        let (d, h, p) = (cfg.dim, cfg.hidden, cfg.proj);
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let emb = take(v * d);
        let mut dir = || DirLayout {
            w: take(h * d),
            u: take(h * h),
            b: take(h),
            p: take(p * h),
            o: take(v * p),
            c: take(v),
        };
        let dirs = [dir(), dir()];
        Layout {
            emb,
            dirs,
            total: at,
        }
    }
}

/// A bidirectional single-layer tanh RNN language model.
///
/// The contextual vector at position t is `[z_fwd(t); z_bwd(t)]`, with
/// width `2 * proj`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBiLM {
    pub vocab_size: usize,
    pub config: ToyConfig,
    pub theta: Vec<f64>,
    pub(crate) layout: Layout,
}

fn uniform(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> impl Iterator<Item = f64> + '_ {
    (0..n).map(move |_| {
        if scale > 0.0 {
            rng.random_range(-scale..=scale)
        } else {
            0.0
        }
    })
}

impl ToyBiLM {
    pub fn new(vocab_size: usize, config: ToyConfig, seed: u64) -> Result<Self> {
        if vocab_size < 2 || config.dim == 0 || config.hidden == 0 || config.proj == 0 {
            return Err(Error::InvalidArgument(
                "toy model needs vocab >= 2 and nonzero sizes".into(),
            ));
        }
        let layout = Layout::new(vocab_size, &config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; layout.total];
        // biases stay zero
        let mut fill = |r: &Range<usize>, theta: &mut Vec<f64>| {
            for (slot, v) in
                theta[r.clone()]
                    .iter_mut()
                    .zip(uniform(r.len(), config.init_scale, &mut rng))
            {
                *slot = v;
            }
        };
        fill(&layout.emb, &mut theta);
        for dir in &layout.dirs {
            for r in [&dir.w, &dir.u, &dir.p, &dir.o] {
                fill(r, &mut theta);
            }
        }
        Ok(ToyBiLM {
            vocab_size,
            config,
            theta,
            layout,
        })
    }

    /// Width of the contextual vectors.
    pub fn output_dim(&self) -> usize {
        2 * self.config.proj
    }

    pub fn n_parameters(&self) -> usize {
        self.theta.len()
    }

    /// Sets the language-model softmax weights and biases of both
    /// directions to zero, making every prediction uniform.
    pub fn zero_output_layers(&mut self) {
        for d in 0..2 {
            let dir = self.layout.dirs[d].clone();
            self.theta[dir.o].fill(0.0);
            self.theta[dir.c].fill(0.0);
        }
    }

    /// Adds `value` to the language-model output bias of `token`.
    pub fn bias_output(&mut self, token: usize, value: f64) {
        for d in 0..2 {
            let at = self.layout.dirs[d].c.start + token;
            self.theta[at] += value;
        }
    }

    pub(crate) fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&t| t >= self.vocab_size) {
            Some(t) => Err(Error::InvalidArgument(format!(
                "token id {t} outside vocab of {}",
                self.vocab_size
            ))),
            None => Ok(()),
        }
    }

    /// Runs both directions over `ids`.
    pub(crate) fn forward(&self, ids: &[usize]) -> Trace {
        let (d, h, p) = (self.config.dim, self.config.hidden, self.config.proj);
        let th = &self.theta;
        let emb =
            |t: usize| &th[self.layout.emb.start + t * d..self.layout.emb.start + (t + 1) * d];
        let n = ids.len();
        let mut hs = [vec![vec![0.0; h]; n], vec![vec![0.0; h]; n]];
        let mut zs = [vec![vec![0.0; p]; n], vec![vec![0.0; p]; n]];
        for (dir_index, dir) in self.layout.dirs.iter().enumerate() {
            let order: Vec<usize> = if dir_index == 0 {
                (0..n).collect()
            } else {
                (0..n).rev().collect()
            };
            let mut prev = vec![0.0; h];
            for &t in &order {
                let e = emb(ids[t]);
                let mut state = vec![0.0; h];
                for i in 0..h {
                    let mut a = th[dir.b.start + i];
                    let w = &th[dir.w.start + i * d..dir.w.start + (i + 1) * d];
                    a += w.iter().zip(e).map(|(x, y)| x * y).sum::<f64>();
                    let u = &th[dir.u.start + i * h..dir.u.start + (i + 1) * h];
                    a += u.iter().zip(&prev).map(|(x, y)| x * y).sum::<f64>();
                    state[i] = a.tanh();
                }
                for k in 0..p {
                    let row = &th[dir.p.start + k * h..dir.p.start + (k + 1) * h];
                    zs[dir_index][t][k] = row.iter().zip(&state).map(|(x, y)| x * y).sum();
                }
                hs[dir_index][t] = state.clone();
                prev = state;
            }
        }
        Trace {
            ids: ids.to_vec(),
            hs,
            zs,
        }
    }

    /// Backpropagates `dz[dir][t]` (gradients w.r.t. the projected outputs)
    /// through both recurrences into `grad`.
    pub(crate) fn backward(&self, trace: &Trace, dz: &[Vec<Vec<f64>>; 2], grad: &mut [f64]) {
        let (d, h, p) = (self.config.dim, self.config.hidden, self.config.proj);
        let th = &self.theta;
        let n = trace.ids.len();
        for (dir_index, dir) in self.layout.dirs.iter().enumerate() {
            // reverse of the forward visiting order
            let order: Vec<usize> = if dir_index == 0 {
                (0..n).rev().collect()
            } else {
                (0..n).collect()
            };
            let hs = &trace.hs[dir_index];
            let mut carry = vec![0.0; h];
            for &t in &order {
                let state = &hs[t];
                let mut dh = carry.clone();
                for k in 0..p {
                    let g = dz[dir_index][t][k];
                    if g == 0.0 {
                        continue;
                    }
                    for i in 0..h {
                        grad[dir.p.start + k * h + i] += g * state[i];
                        dh[i] += th[dir.p.start + k * h + i] * g;
                    }
                }
                let prev_t = if dir_index == 0 {
                    t.checked_sub(1)
                } else {
                    (t + 1 < n).then_some(t + 1)
                };
                let e_start = self.layout.emb.start + trace.ids[t] * d;
                carry = vec![0.0; h];
                for i in 0..h {
                    let da = dh[i] * (1.0 - state[i] * state[i]);
                    if da == 0.0 {
                        continue;
                    }
                    grad[dir.b.start + i] += da;
                    for j in 0..d {
                        grad[dir.w.start + i * d + j] += da * th[e_start + j];
                        grad[e_start + j] += th[dir.w.start + i * d + j] * da;
                    }
                    if let Some(pt) = prev_t {
                        let prev = &hs[pt];
                        for j in 0..h {
                            grad[dir.u.start + i * h + j] += da * prev[j];
                            carry[j] += th[dir.u.start + i * h + j] * da;
                        }
                    }
                }
            }
        }
    }

    /// Language-model logits of direction `dir` at position `t`.
    pub(crate) fn lm_logits(&self, dir: usize, z: &[f64]) -> Vec<f64> {
        let p = self.config.proj;
        let l = &self.layout.dirs[dir];
        (0..self.vocab_size)
            .map(|v| {
                let row = &self.theta[l.o.start + v * p..l.o.start + (v + 1) * p];
                self.theta[l.c.start + v] + row.iter().zip(z).map(|(x, y)| x * y).sum::<f64>()
            })
            .collect()
    }

    /// Accumulates the gradient of the LM softmax layer and returns dz.
    pub(crate) fn lm_backward(
        &self,
        dir: usize,
        z: &[f64],
        dlogits: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        let p = self.config.proj;
        let l = &self.layout.dirs[dir];
        let mut dz = vec![0.0; p];
        for (v, &g) in dlogits.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[l.c.start + v] += g;
            for k in 0..p {
                grad[l.o.start + v * p + k] += g * z[k];
                dz[k] += self.theta[l.o.start + v * p + k] * g;
            }
        }
        dz
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    pub ids: Vec<usize>,
    pub hs: [Vec<Vec<f64>>; 2],
    /// Projected outputs per direction and position.
    pub zs: [Vec<Vec<f64>>; 2],
}

impl Trace {
    /// `[z_fwd(t); z_bwd(t)]`.
    pub fn contextual(&self, t: usize) -> Vec<f64> {
        let mut out = self.zs[0][t].clone();
        out.extend_from_slice(&self.zs[1][t]);
        out
    }
}

/// Bag-of-words decoder: a linear map from a conditioning vector to
/// vocabulary logits.
#[derive(Debug, Clone, PartialEq)]
pub struct BowDecoder {
    pub vocab_size: usize,
    pub input_dim: usize,
    /// Row-major `vocab_size x input_dim` weights, then `vocab_size` biases.
    pub theta: Vec<f64>,
}

impl BowDecoder {
    pub fn new(vocab_size: usize, input_dim: usize, init_scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta: Vec<f64> = uniform(vocab_size * input_dim, init_scale, &mut rng).collect();
        theta.extend(std::iter::repeat_n(0.0, vocab_size));
        BowDecoder {
            vocab_size,
            input_dim,
            theta,
        }
    }

    /// A decoder whose output is uniform over the vocabulary.
    pub fn uniform(vocab_size: usize, input_dim: usize) -> Self {
        BowDecoder::new(vocab_size, input_dim, 0.0, 0)
    }

    fn bias_start(&self) -> usize {
        self.vocab_size * self.input_dim
    }

    pub fn bias_output(&mut self, token: usize, value: f64) {
        let at = self.bias_start() + token;
        self.theta[at] += value;
    }

    pub(crate) fn logits(&self, m: &[f64]) -> Vec<f64> {
        let k = self.input_dim;
        (0..self.vocab_size)
            .map(|v| {
                self.theta[self.bias_start() + v]
                    + self.theta[v * k..(v + 1) * k]
                        .iter()
                        .zip(m)
                        .map(|(x, y)| x * y)
                        .sum::<f64>()
            })
            .collect()
    }

    pub(crate) fn backward(&self, m: &[f64], dlogits: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let k = self.input_dim;
        let mut dm = vec![0.0; k];
        for (v, &g) in dlogits.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[self.bias_start() + v] += g;
            for j in 0..k {
                grad[v * k + j] += g * m[j];
                dm[j] += self.theta[v * k + j] * g;
            }
        }
        dm
    }
}

/// Separate decoders for the two reconstruction directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoders {
    /// Predicts context tokens from a description (`l_ctx`, `l_etn`).
    pub ctx: BowDecoder,
    /// Predicts description tokens from a mention (`l_desc`).
    pub desc: BowDecoder,
}

impl Decoders {
    pub fn new(model: &ToyBiLM, seed: u64) -> Self {
        let (v, k, s) = (
            model.vocab_size,
            model.output_dim(),
            model.config.init_scale,
        );
        Decoders {
            ctx: BowDecoder::new(v, k, s, seed ^ 0x5ca1_ab1e),
            desc: BowDecoder::new(v, k, s, seed ^ 0x0dec_0de5),
        }
    }

    pub fn uniform(model: &ToyBiLM) -> Self {
        let (v, k) = (model.vocab_size, model.output_dim());
        Decoders {
            ctx: BowDecoder::uniform(v, k),
            desc: BowDecoder::uniform(v, k),
        }
    }
}
