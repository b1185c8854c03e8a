//! Token sequence encoder: embedding, window-3 convolutions, GRU and two
//! fully connected layers.

use serde::{Deserialize, Serialize};

use super::ops::{
    col2im_1d, im2col_1d, l2_normalize, l2_normalize_backward, linear, linear_backward, matvec_add, matvec_t_add, relu_backward_in_place,
    relu_in_place,
};
use super::params::{ParamSet, TensorSpec};
use super::real::{gemm, Real};
use super::EncoderError;
use crate::dataset::TokenSequence;

/// Text encoder widths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextArch {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Output channels of each window-3 convolution, in order.
    pub conv_channels: Vec<usize>,
    pub hidden: usize,
    pub fc_hidden: usize,
    pub out_dim: usize,
}

impl TextArch {
    /// 128-wide embedding, convolutions 128/128/128/256, GRU 256, FC
    /// 256→256→128.
    pub fn standard(vocab_size: usize) -> Self {
        Self { vocab_size, embed_dim: 128, conv_channels: vec![128, 128, 128, 256], hidden: 256, fc_hidden: 256, out_dim: 128 }
    }

    fn conv_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embed_dim
        } else {
            self.conv_channels[layer - 1]
        }
    }

    fn gru_input(&self) -> usize {
        self.conv_channels.last().copied().unwrap_or(self.embed_dim)
    }

    pub fn tensor_specs(&self) -> Vec<TensorSpec> {
        let mut specs = vec![TensorSpec::weight("text.embedding", vec![self.vocab_size, self.embed_dim], 1)];
        for (l, &c_out) in self.conv_channels.iter().enumerate() {
            let c_in = self.conv_input(l);
            specs.push(TensorSpec::weight(format!("text.conv{}.weight", l + 1), vec![c_out, c_in, 3], c_in * 3));
            specs.push(TensorSpec::bias(format!("text.conv{}.bias", l + 1), c_out));
        }
        let (i, h) = (self.gru_input(), self.hidden);
        specs.extend([
            TensorSpec::weight("text.gru.weight_ih", vec![3 * h, i], i),
            TensorSpec::weight("text.gru.weight_hh", vec![3 * h, h], h),
            TensorSpec::bias("text.gru.bias_ih", 3 * h),
            TensorSpec::bias("text.gru.bias_hh", 3 * h),
            TensorSpec::weight("text.fc1.weight", vec![self.fc_hidden, h], h),
            TensorSpec::bias("text.fc1.bias", self.fc_hidden),
            TensorSpec::weight("text.fc2.weight", vec![self.out_dim, self.fc_hidden], self.fc_hidden),
            TensorSpec::bias("text.fc2.bias", self.out_dim),
        ]);
        specs
    }

    /// Closed-form scalar count of [`Self::tensor_specs`].
    pub fn param_count(&self) -> usize {
        let mut total = self.vocab_size * self.embed_dim;
        for (l, &c_out) in self.conv_channels.iter().enumerate() {
            total += c_out * self.conv_input(l) * 3 + c_out;
        }
        let (i, h) = (self.gru_input(), self.hidden);
        total += 3 * h * (i + h + 2);
        total + self.fc_hidden * (h + 1) + self.out_dim * (self.fc_hidden + 1)
    }
}

/// Text encoder parameters with their architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder<T> {
    pub arch: TextArch,
    pub params: ParamSet<T>,
}

/// Activations kept for the backward pass of one sequence.
#[derive(Debug, Clone)]
pub struct TextCache<T> {
    tokens: Vec<u32>,
    /// Input of each convolution, then the GRU input.
    acts: Vec<Vec<T>>,
    /// Hidden state before each step, `len × hidden`.
    h_prev: Vec<T>,
    /// Gate values per step, each `len × hidden`.
    r: Vec<T>,
    z: Vec<T>,
    n: Vec<T>,
    /// `W_hn·h + b_hn` per step.
    gh_n: Vec<T>,
    h_last: Vec<T>,
    fc1: Vec<T>,
    out: Vec<T>,
    norm: T,
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

// Tensor indices in declaration order.
const EMBED: usize = 0;

impl<T: Real> TextEncoder<T> {
    pub fn new(arch: TextArch, params: ParamSet<T>) -> Result<Self, EncoderError> {
        if params.specs() != arch.tensor_specs().as_slice() {
            return Err(EncoderError::Shape("text parameters do not match the architecture".into()));
        }
        Ok(Self { arch, params })
    }

    pub fn seeded(arch: TextArch, seed: u64) -> Self {
        let params = ParamSet::seeded(arch.tensor_specs(), seed);
        Self { arch, params }
    }

    fn conv_w(&self, l: usize) -> usize {
        1 + 2 * l
    }

    fn gru_base(&self) -> usize {
        1 + 2 * self.arch.conv_channels.len()
    }

    pub fn cast<U: Real>(&self) -> TextEncoder<U> {
        TextEncoder { arch: self.arch.clone(), params: self.params.cast() }
    }

    /// Embeds one sequence; only the first `true_length` tokens are read.
    pub fn forward(&self, seq: &TokenSequence) -> Result<(Vec<T>, TextCache<T>), EncoderError> {
        let a = &self.arch;
        let len = seq.true_length.min(seq.tokens.len());
        let tokens = seq.tokens[..len].to_vec();
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= a.vocab_size) {
            return Err(EncoderError::TokenOutOfRange { id: bad, vocab_size: a.vocab_size });
        }
        let table = self.params.tensor(EMBED);
        let mut x = Vec::with_capacity(len * a.embed_dim);
        for &t in &tokens {
            x.extend_from_slice(&table[t as usize * a.embed_dim..(t as usize + 1) * a.embed_dim]);
        }
        let mut acts = Vec::with_capacity(a.conv_channels.len() + 1);
        for (l, &c_out) in a.conv_channels.iter().enumerate() {
            let c_in = a.conv_input(l);
            let cols = im2col_1d(&x, len, c_in);
            let w = self.conv_w(l);
            let mut y = linear(&cols, len, self.params.tensor(w), self.params.tensor(w + 1), 3 * c_in, c_out);
            relu_in_place(&mut y);
            acts.push(std::mem::replace(&mut x, y));
        }

        let (i_dim, h) = (a.gru_input(), a.hidden);
        let g = self.gru_base();
        let (w_ih, w_hh, b_ih, b_hh) = (self.params.tensor(g), self.params.tensor(g + 1), self.params.tensor(g + 2), self.params.tensor(g + 3));
        let gi = linear(&x, len, w_ih, b_ih, i_dim, 3 * h);
        acts.push(x);
        let mut state = vec![T::zero(); h];
        let mut cache_h = Vec::with_capacity(len * h);
        let (mut rs, mut zs, mut ns, mut ghn) = (Vec::with_capacity(len * h), Vec::with_capacity(len * h), Vec::with_capacity(len * h), Vec::with_capacity(len * h));
        let mut gh = vec![T::zero(); 3 * h];
        for t in 0..len {
            gh.copy_from_slice(b_hh);
            matvec_add(w_hh, &state, &mut gh);
            cache_h.extend_from_slice(&state);
            let gi_t = &gi[t * 3 * h..(t + 1) * 3 * h];
            for u in 0..h {
                let r = sigmoid(gi_t[u] + gh[u]);
                let z = sigmoid(gi_t[h + u] + gh[h + u]);
                let n = (gi_t[2 * h + u] + r * gh[2 * h + u]).tanh();
                rs.push(r);
                zs.push(z);
                ns.push(n);
                ghn.push(gh[2 * h + u]);
                state[u] = (T::one() - z) * n + z * state[u];
            }
        }

        let f1w = g + 4;
        let mut fc1 = linear(&state, 1, self.params.tensor(f1w), self.params.tensor(f1w + 1), h, a.fc_hidden);
        relu_in_place(&mut fc1);
        let f2 = linear(&fc1, 1, self.params.tensor(f1w + 2), self.params.tensor(f1w + 3), a.fc_hidden, a.out_dim);
        let (out, norm) = l2_normalize(&f2);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(EncoderError::NonFinite("text embedding".into()));
        }
        let cache = TextCache { tokens, acts, h_prev: cache_h, r: rs, z: zs, n: ns, gh_n: ghn, h_last: state, fc1, out: out.clone(), norm };
        Ok((out, cache))
    }

    /// Adds the gradient of `⟨d_out, embedding⟩` to `grads`.
    pub fn backward(&self, cache: &TextCache<T>, d_out: &[T], grads: &mut ParamSet<T>) {
        let a = &self.arch;
        let (h, len) = (a.hidden, cache.tokens.len());
        let g = self.gru_base();
        let f1w = g + 4;

        let df2 = l2_normalize_backward(&cache.out, cache.norm, d_out);
        let mut df1 = {
            let (dw, db) = split_pair(grads, f1w + 2);
            linear_backward(&cache.fc1, &df2, 1, self.params.tensor(f1w + 2), a.fc_hidden, a.out_dim, dw, db, true).expect("dx")
        };
        relu_backward_in_place(&mut df1, &cache.fc1);
        let mut dh = {
            let (dw, db) = split_pair(grads, f1w);
            linear_backward(&cache.h_last, &df1, 1, self.params.tensor(f1w), h, a.fc_hidden, dw, db, true).expect("dx")
        };

        let w_hh = self.params.tensor(g + 1);
        let mut d_gi = vec![T::zero(); len * 3 * h];
        let mut d_gh = vec![T::zero(); len * 3 * h];
        let mut dh_prev = vec![T::zero(); h];
        for t in (0..len).rev() {
            let off = t * h;
            let dgi_t = &mut d_gi[t * 3 * h..(t + 1) * 3 * h];
            let dgh_t = &mut d_gh[t * 3 * h..(t + 1) * 3 * h];
            for u in 0..h {
                let (r, z, n, hp, ghn) = (cache.r[off + u], cache.z[off + u], cache.n[off + u], cache.h_prev[off + u], cache.gh_n[off + u]);
                let d = dh[u];
                let dn_pre = d * (T::one() - z) * (T::one() - n * n);
                let dz_pre = d * (hp - n) * z * (T::one() - z);
                let dr_pre = dn_pre * ghn * r * (T::one() - r);
                dgi_t[u] = dr_pre;
                dgi_t[h + u] = dz_pre;
                dgi_t[2 * h + u] = dn_pre;
                dgh_t[u] = dr_pre;
                dgh_t[h + u] = dz_pre;
                dgh_t[2 * h + u] = dn_pre * r;
                dh_prev[u] = d * z;
            }
            matvec_t_add(w_hh, dgh_t, &mut dh_prev);
            std::mem::swap(&mut dh, &mut dh_prev);
        }
        let i_dim = a.gru_input();
        let gru_in = cache.acts.last().expect("gru input");
        // dW_hh += dGhᵀ·H_prev and dW_ih += dGiᵀ·X over all steps at once.
        gemm(true, false, 3 * h, h, len, &d_gh, &cache.h_prev, T::one(), grads.tensor_mut(g + 1));
        gemm(true, false, 3 * h, i_dim, len, &d_gi, gru_in, T::one(), grads.tensor_mut(g));
        accumulate_rows(grads.tensor_mut(g + 2), &d_gi, 3 * h);
        accumulate_rows(grads.tensor_mut(g + 3), &d_gh, 3 * h);
        let mut dx = vec![T::zero(); len * i_dim];
        gemm(false, false, len, i_dim, 3 * h, &d_gi, self.params.tensor(g), T::zero(), &mut dx);

        for l in (0..a.conv_channels.len()).rev() {
            let (c_in, c_out) = (a.conv_input(l), a.conv_channels[l]);
            relu_backward_in_place(&mut dx, &cache.acts[l + 1]);
            let cols = im2col_1d(&cache.acts[l], len, c_in);
            let w = self.conv_w(l);
            let (dw, db) = split_pair(grads, w);
            let dcols = linear_backward(&cols, &dx, len, self.params.tensor(w), 3 * c_in, c_out, dw, db, true).expect("dx");
            dx = col2im_1d(&dcols, len, c_in);
        }
        let d_table = grads.tensor_mut(EMBED);
        for (t, &tok) in cache.tokens.iter().enumerate() {
            let row = &mut d_table[tok as usize * a.embed_dim..(tok as usize + 1) * a.embed_dim];
            for (g, &d) in row.iter_mut().zip(&dx[t * a.embed_dim..(t + 1) * a.embed_dim]) {
                *g += d;
            }
        }
    }
}

/// Mutable views of tensors `i` and `i + 1` (a weight and its bias).
pub(crate) fn split_pair<T: Real>(grads: &mut ParamSet<T>, i: usize) -> (&mut [T], &mut [T]) {
    let (start, mid, end) = (grads.offset(i), grads.offset(i + 1), grads.offset(i + 1) + grads.specs()[i + 1].numel());
    let (head, tail) = grads.data_mut()[start..end].split_at_mut(mid - start);
    (head, tail)
}

fn accumulate_rows<T: Real>(dst: &mut [T], rows: &[T], width: usize) {
    for row in rows.chunks_exact(width) {
        for (d, &v) in dst.iter_mut().zip(row) {
            *d += v;
        }
    }
}
