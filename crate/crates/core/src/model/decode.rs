//! Incremental forward pass with cached keys and values, used for sampling.
//!
//! Computes the same function as [`Model::logits_node`] one position at a
//! time, so decoding a row costs O(K) transformer positions instead of
//! O(K²).

use super::transformer::LN_EPS;
use super::Model;
use crate::autodiff::{causal_row_softmax, gelu_value, Real};

/// Decoding state for a batch of rows advancing in lockstep.
pub(super) struct Decoder<'m, T: Real> {
    model: &'m Model<T>,
    rows: usize,
    pos: usize,
    /// Per layer, `[rows, num_columns, d]`.
    keys: Vec<Vec<T>>,
    values: Vec<Vec<T>>,
}

/// `out[r] = x[r] · w + bias` for `x: [m, k]`, `w: [k, n]`.
fn affine<T: Real>(x: &[T], m: usize, k: usize, w: &[T], bias: &[T], n: usize) -> Vec<T> {
    let mut out: Vec<T> = bias.iter().copied().cycle().take(m * n).collect();
    T::gemm(m, k, n, x, (k as isize, 1), w, (n as isize, 1), T::one(), &mut out, (n as isize, 1));
    out
}

fn layer_norm<T: Real>(x: &[T], n: usize, gain: &[T], bias: &[T]) -> Vec<T> {
    let eps = T::from_f64(LN_EPS);
    let inv_n = T::from_f64(1.0 / n as f64);
    let mut out = Vec::with_capacity(x.len());
    for row in x.chunks(n) {
        let mean = row.iter().copied().sum::<T>() * inv_n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_n;
        let rstd = T::one() / (var + eps).sqrt();
        out.extend(row.iter().zip(gain.iter().zip(bias)).map(|(&v, (&g, &b))| (v - mean) * rstd * g + b));
    }
    out
}

impl<'m, T: Real> Decoder<'m, T> {
    pub(super) fn new(model: &'m Model<T>, rows: usize) -> Self {
        let c = model.config();
        let size = rows * c.num_columns * c.d_model;
        Self {
            model,
            rows,
            pos: 0,
            keys: (0..c.n_layers).map(|_| vec![T::zero(); size]).collect(),
            values: (0..c.n_layers).map(|_| vec![T::zero(); size]).collect(),
        }
    }

    /// Feeds one token per row at the next position and returns the logits
    /// of tokens `lo..hi` there, `[rows, hi − lo]`.
    pub(super) fn step(&mut self, tokens: &[u32], (lo, hi): (usize, usize)) -> Vec<T> {
        let model = self.model;
        let c = *model.config();
        let (d, f, k) = (c.d_model, c.d_ff(), c.num_columns);
        let (m, p) = (self.rows, self.pos);
        assert!(tokens.len() == m && p < k, "decoder step out of range");
        let store = model.params();
        let ids = &model.ids;
        let tok = store.values(ids.tok);
        let pos = &store.values(ids.pos)[p * d..(p + 1) * d];
        let mut x = Vec::with_capacity(m * d);
        for &t in tokens {
            let t = t as usize;
            x.extend(tok[t * d..(t + 1) * d].iter().zip(pos).map(|(&a, &b)| a + b));
        }

        let heads = c.n_heads;
        let dh = d / heads;
        let scale = T::from_f64(1.0 / (dh as f64).sqrt());
        let mut scores = vec![T::zero(); p + 1];
        let mut probs = vec![T::zero(); p + 1];
        for (l, layer) in ids.layers.iter().enumerate() {
            let a = layer_norm(&x, d, store.values(layer.ln1_gain), store.values(layer.ln1_bias));
            let mut bias = store.values(layer.q_b).to_vec();
            bias.extend(std::iter::repeat_n(T::zero(), d));
            bias.extend_from_slice(store.values(layer.v_b));
            let qkv = affine(&a, m, d, store.values(layer.qkv_w), &bias, 3 * d);
            let (keys, values) = (&mut self.keys[l], &mut self.values[l]);
            for r in 0..m {
                let at = (r * k + p) * d;
                keys[at..at + d].copy_from_slice(&qkv[r * 3 * d + d..r * 3 * d + 2 * d]);
                values[at..at + d].copy_from_slice(&qkv[r * 3 * d + 2 * d..(r + 1) * 3 * d]);
            }
            let mut att = vec![T::zero(); m * d];
            for r in 0..m {
                for h in 0..heads {
                    let q = &qkv[r * 3 * d + h * dh..][..dh];
                    for (j, s) in scores.iter_mut().enumerate() {
                        let key = &keys[(r * k + j) * d + h * dh..][..dh];
                        *s = q.iter().zip(key).map(|(&a, &b)| a * b).sum::<T>() * scale;
                    }
                    causal_row_softmax(&scores, &mut probs);
                    let out = &mut att[r * d + h * dh..][..dh];
                    for (j, &w) in probs.iter().enumerate() {
                        let v = &values[(r * k + j) * d + h * dh..][..dh];
                        for (o, &vv) in out.iter_mut().zip(v) {
                            *o += w * vv;
                        }
                    }
                }
            }
            let o = affine(&att, m, d, store.values(layer.proj_w), store.values(layer.proj_b), d);
            x.iter_mut().zip(&o).for_each(|(a, &b)| *a += b);

            let h2 = layer_norm(&x, d, store.values(layer.ln2_gain), store.values(layer.ln2_bias));
            let mut hidden = affine(&h2, m, d, store.values(layer.fc_w), store.values(layer.fc_b), f);
            hidden.iter_mut().for_each(|v| *v = gelu_value(*v));
            let o = affine(&hidden, m, f, store.values(layer.out_w), store.values(layer.out_b), d);
            x.iter_mut().zip(&o).for_each(|(a, &b)| *a += b);
        }
        let hf = layer_norm(&x, d, store.values(ids.lnf_gain), store.values(ids.lnf_bias));
        self.pos += 1;

        let n = hi - lo;
        let mut logits = vec![T::zero(); m * n];
        T::gemm(m, d, n, &hf, (d as isize, 1), &tok[lo * d..], (1, d as isize), T::zero(), &mut logits, (n as isize, 1));
        logits
    }
}
