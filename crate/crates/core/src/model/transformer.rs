//! Pre-norm GPT-2 style decoder over column-token sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelConfig, ModelError};
use crate::autodiff::{AutodiffError, Graph, NodeId, ParamId, ParamStore, Real, Tensor};

const INIT_STD: f64 = 0.02;
pub(super) const LN_EPS: f64 = 1e-5;

pub(super) struct LayerIds {
    pub(super) ln1_gain: ParamId,
    pub(super) ln1_bias: ParamId,
    pub(super) qkv_w: ParamId,
    pub(super) q_b: ParamId,
    pub(super) v_b: ParamId,
    pub(super) proj_w: ParamId,
    pub(super) proj_b: ParamId,
    pub(super) ln2_gain: ParamId,
    pub(super) ln2_bias: ParamId,
    pub(super) fc_w: ParamId,
    pub(super) fc_b: ParamId,
    pub(super) out_w: ParamId,
    pub(super) out_b: ParamId,
}

pub(super) struct ParamIds {
    pub(super) tok: ParamId,
    pub(super) pos: ParamId,
    pub(super) layers: Vec<LayerIds>,
    pub(super) lnf_gain: ParamId,
    pub(super) lnf_bias: ParamId,
}

enum Init {
    Normal,
    Zeros,
    Ones,
}

/// Declared parameter order: names, shapes, initializers.
fn declare(config: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let d = config.d_model;
    let f = config.d_ff();
    let mut out = vec![
        ("tok_emb".to_string(), vec![config.vocab_size + 1, d], Init::Normal),
        ("pos_emb".to_string(), vec![config.num_columns + 1, d], Init::Normal),
    ];
    for l in 0..config.n_layers {
        let p = |s: &str| format!("h{l}.{s}");
        out.extend([
            (p("ln1.gain"), vec![d], Init::Ones),
            (p("ln1.bias"), vec![d], Init::Zeros),
            (p("attn.qkv.w"), vec![d, 3 * d], Init::Normal),
            (p("attn.q.b"), vec![d], Init::Zeros),
            (p("attn.v.b"), vec![d], Init::Zeros),
            (p("attn.proj.w"), vec![d, d], Init::Normal),
            (p("attn.proj.b"), vec![d], Init::Zeros),
            (p("ln2.gain"), vec![d], Init::Ones),
            (p("ln2.bias"), vec![d], Init::Zeros),
            (p("mlp.fc.w"), vec![d, f], Init::Normal),
            (p("mlp.fc.b"), vec![f], Init::Zeros),
            (p("mlp.proj.w"), vec![f, d], Init::Normal),
            (p("mlp.proj.b"), vec![d], Init::Zeros),
        ]);
    }
    out.push(("ln_f.gain".to_string(), vec![d], Init::Ones));
    out.push(("ln_f.bias".to_string(), vec![d], Init::Zeros));
    out
}

impl ParamIds {
    fn resolve<T: Real>(store: &ParamStore<T>, config: &ModelConfig) -> Result<Self, ModelError> {
        for (name, shape, _) in declare(config) {
            let id = store
                .id(&name)
                .ok_or_else(|| ModelError::InvalidConfig(format!("missing parameter {name}")))?;
            if store.spec(id).shape != shape {
                return Err(ModelError::InvalidConfig(format!(
                    "parameter {name} has shape {:?}, expected {shape:?}",
                    store.spec(id).shape
                )));
            }
        }
        let get = |n: String| store.id(&n).expect("checked above");
        Ok(Self {
            tok: get("tok_emb".into()),
            pos: get("pos_emb".into()),
            layers: (0..config.n_layers)
                .map(|l| {
                    let p = |s: &str| get(format!("h{l}.{s}"));
                    LayerIds {
                        ln1_gain: p("ln1.gain"),
                        ln1_bias: p("ln1.bias"),
                        qkv_w: p("attn.qkv.w"),
                        q_b: p("attn.q.b"),
                        v_b: p("attn.v.b"),
                        proj_w: p("attn.proj.w"),
                        proj_b: p("attn.proj.b"),
                        ln2_gain: p("ln2.gain"),
                        ln2_bias: p("ln2.bias"),
                        fc_w: p("mlp.fc.w"),
                        fc_b: p("mlp.fc.b"),
                        out_w: p("mlp.proj.w"),
                        out_b: p("mlp.proj.b"),
                    }
                })
                .collect(),
            lnf_gain: get("ln_f.gain".into()),
            lnf_bias: get("ln_f.bias".into()),
        })
    }
}

/// Transformer weights plus the per-position token ranges used for masking.
///
/// `layout[j]` is the half-open token range of the column predicted at
/// position `j`; the begin-of-row token is `config.vocab_size`.
pub struct Model<T: Real> {
    config: ModelConfig,
    layout: Vec<(usize, usize)>,
    params: ParamStore<T>,
    pub(super) ids: ParamIds,
}

impl<T: Real> Clone for Model<T> {
    fn clone(&self) -> Self {
        Self::from_params(self.config, self.layout.clone(), self.params.clone())
            .expect("already validated")
    }
}

fn check_layout(config: &ModelConfig, layout: &[(usize, usize)]) -> Result<(), ModelError> {
    if layout.len() != config.num_columns {
        return Err(ModelError::InvalidConfig(format!(
            "layout has {} columns, config has {}",
            layout.len(),
            config.num_columns
        )));
    }
    if layout
        .iter()
        .any(|&(lo, hi)| lo >= hi || hi > config.vocab_size)
    {
        return Err(ModelError::InvalidConfig("column range outside vocabulary".into()));
    }
    Ok(())
}

impl<T: Real> Model<T> {
    /// Fresh weights: N(0, 0.02²) for embeddings and projections, zero
    /// biases, unit layer-norm gains.
    pub fn init(
        config: ModelConfig,
        layout: Vec<(usize, usize)>,
        seed: u64,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        check_layout(&config, &layout)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut store = ParamStore::new();
        for (name, shape, init) in declare(&config) {
            let n: usize = shape.iter().product();
            let data: Vec<T> = match init {
                Init::Normal => (0..n).map(|_| T::from_f64(normal.sample(&mut rng))).collect(),
                Init::Zeros => vec![T::zero(); n],
                Init::Ones => vec![T::one(); n],
            };
            store.add(name, Tensor::new(shape, data)?);
        }
        Self::from_params(config, layout, store)
    }

    pub fn from_params(
        config: ModelConfig,
        layout: Vec<(usize, usize)>,
        params: ParamStore<T>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        check_layout(&config, &layout)?;
        let ids = ParamIds::resolve(&params, &config)?;
        if params.len() != config.num_params() {
            return Err(ModelError::InvalidConfig("unexpected parameter count".into()));
        }
        Ok(Self {
            config,
            layout,
            params,
            ids,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &[(usize, usize)] {
        &self.layout
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn bos(&self) -> u32 {
        self.config.vocab_size as u32
    }

    pub fn cast<U: Real>(&self) -> Model<U> {
        Model::from_params(self.config, self.layout.clone(), self.params.cast())
            .expect("same layout")
    }

    fn check_tokens(&self, tokens: &[u32]) -> Result<(), ModelError> {
        for (j, &t) in tokens.iter().enumerate() {
            let (lo, hi) = self.layout[j];
            if !(lo..hi).contains(&(t as usize)) {
                return Err(ModelError::TokenOutOfRange { position: j, token: t });
            }
        }
        Ok(())
    }

    /// Logits for `seqs` stacked sequences of `len` tokens each (begin-of-row
    /// included), shape `[seqs·len, vocab_size + 1]`.
    pub fn logits_node(
        &self,
        g: &mut Graph<'_, T>,
        tokens: &[u32],
        seqs: usize,
        len: usize,
    ) -> Result<NodeId, ModelError> {
        if len == 0 || len > self.config.num_columns || tokens.len() != seqs * len {
            return Err(ModelError::PrefixTooLong {
                len,
                max: self.config.num_columns,
            });
        }
        let ids: Vec<usize> = tokens.iter().map(|&t| t as usize).collect();
        let positions: Vec<usize> = (0..seqs).flat_map(|_| 0..len).collect();
        let tok_table = g.param(self.ids.tok);
        let pos_table = g.param(self.ids.pos);
        let tok = g.embedding(tok_table, &ids)?;
        let pos = g.embedding(pos_table, &positions)?;
        let mut h = g.add(tok, pos)?;
        let d = self.config.d_model;
        let zero_key_bias = g.input("zero_key_bias", Tensor::zeros(vec![1, d])?)?;
        for layer in &self.ids.layers {
            let (gain, bias) = (g.param(layer.ln1_gain), g.param(layer.ln1_bias));
            let a = g.layer_norm(h, gain, bias, LN_EPS)?;
            let w = g.param(layer.qkv_w);
            let qb = g.param(layer.q_b);
            let qb = g.reshape(qb, vec![1, d])?;
            let vb = g.param(layer.v_b);
            let vb = g.reshape(vb, vec![1, d])?;
            let b = g.concat_cols(&[qb, zero_key_bias, vb])?;
            let b = g.reshape(b, vec![3 * d])?;
            let qkv = g.matmul(a, w)?;
            let qkv = g.add_row(qkv, b)?;
            let att = g.causal_attention(qkv, seqs, len, self.config.n_heads)?;
            let w = g.param(layer.proj_w);
            let b = g.param(layer.proj_b);
            let o = g.matmul(att, w)?;
            let o = g.add_row(o, b)?;
            h = g.add(h, o)?;

            let (gain, bias) = (g.param(layer.ln2_gain), g.param(layer.ln2_bias));
            let m = g.layer_norm(h, gain, bias, LN_EPS)?;
            let w = g.param(layer.fc_w);
            let b = g.param(layer.fc_b);
            let f = g.matmul(m, w)?;
            let f = g.add_row(f, b)?;
            let f = g.gelu(f)?;
            let w = g.param(layer.out_w);
            let b = g.param(layer.out_b);
            let f = g.matmul(f, w)?;
            let f = g.add_row(f, b)?;
            h = g.add(h, f)?;
        }
        let (gain, bias) = (g.param(self.ids.lnf_gain), g.param(self.ids.lnf_bias));
        let hf = g.layer_norm(h, gain, bias, LN_EPS)?;
        Ok(g.matmul_nt(hf, tok_table)?)
    }

    /// Summed negative log-likelihood of full rows, as a scalar node.
    ///
    /// Position `j` sees the begin-of-row token followed by the row's first
    /// `j` tokens and is scored with its softmax restricted to column `j`'s
    /// range.
    pub fn loss_node<R: AsRef<[u32]>>(
        &self,
        g: &mut Graph<'_, T>,
        rows: &[R],
    ) -> Result<NodeId, ModelError> {
        for row in rows {
            self.check_row(row.as_ref())?;
        }
        Ok(self.loss_node_prechecked(g, rows)?)
    }

    pub(crate) fn check_row(&self, row: &[u32]) -> Result<(), ModelError> {
        let k = self.config.num_columns;
        if row.len() != k {
            return Err(ModelError::RowWidth {
                expected: k,
                got: row.len(),
            });
        }
        self.check_tokens(row)
    }

    /// [`loss_node`](Self::loss_node) for rows already passed through
    /// `check_row`.
    pub(crate) fn loss_node_prechecked<R: AsRef<[u32]>>(
        &self,
        g: &mut Graph<'_, T>,
        rows: &[R],
    ) -> Result<NodeId, AutodiffError> {
        let k = self.config.num_columns;
        let mut inputs = Vec::with_capacity(rows.len() * k);
        let mut targets = Vec::with_capacity(rows.len() * k);
        for row in rows {
            let row = row.as_ref();
            inputs.push(self.bos());
            inputs.extend_from_slice(&row[..k - 1]);
            targets.extend(row.iter().map(|&t| t as usize));
        }
        let ranges: Vec<(usize, usize)> = rows.iter().flat_map(|_| self.layout.iter().copied()).collect();
        let logits = self
            .logits_node(g, &inputs, rows.len(), k)
            .map_err(|e| match e {
                ModelError::Autodiff(e) => e,
                _ => AutodiffError::InvalidShape(vec![rows.len(), k]),
            })?;
        g.softmax_cross_entropy(logits, &targets, &ranges)
    }

    /// −log P(row) under the chain-rule factorization.
    pub fn row_nll(&self, row: &[u32]) -> Result<f64, ModelError> {
        let mut g = Graph::new(&self.params);
        let loss = self.loss_node(&mut g, &[row])?;
        Ok(g.value(loss)[0].as_f64())
    }

    /// Summed NLL over `rows`, evaluated in chunks.
    pub fn total_nll<R: AsRef<[u32]>>(&self, rows: &[R], chunk: usize) -> Result<f64, ModelError> {
        let mut total = 0.0;
        for part in rows.chunks(chunk.max(1)) {
            let mut g = Graph::new(&self.params);
            let loss = self.loss_node(&mut g, part)?;
            total += g.value(loss)[0].as_f64();
        }
        Ok(total)
    }

    /// Unmasked next-token logits over the |V| column tokens after `prefix`.
    pub fn forward_logits(&self, prefix: &[u32]) -> Result<Vec<T>, ModelError> {
        Ok(self.forward_logits_batch(&[prefix])?.pop().expect("one row"))
    }

    /// [`forward_logits`](Self::forward_logits) for several prefixes of equal
    /// length in one pass.
    pub fn forward_logits_batch<R: AsRef<[u32]>>(
        &self,
        prefixes: &[R],
    ) -> Result<Vec<Vec<T>>, ModelError> {
        let Some(first) = prefixes.first() else {
            return Ok(Vec::new());
        };
        let k = first.as_ref().len();
        if k >= self.config.num_columns {
            return Err(ModelError::PrefixTooLong {
                len: k,
                max: self.config.num_columns - 1,
            });
        }
        let len = k + 1;
        let mut tokens = Vec::with_capacity(prefixes.len() * len);
        for p in prefixes {
            let p = p.as_ref();
            if p.len() != k {
                return Err(ModelError::RowWidth {
                    expected: k,
                    got: p.len(),
                });
            }
            self.check_tokens(p)?;
            tokens.push(self.bos());
            tokens.extend_from_slice(p);
        }
        let mut g = Graph::new(&self.params);
        let logits = self.logits_node(&mut g, &tokens, prefixes.len(), len)?;
        let width = self.config.vocab_size + 1;
        let values = g.value(logits);
        Ok((0..prefixes.len())
            .map(|s| {
                let row = (s * len + k) * width;
                values[row..row + self.config.vocab_size].to_vec()
            })
            .collect())
    }
}

/// Sets every logit outside `range` to −∞.
pub fn mask_logits<T: Real>(logits: &[T], range: (usize, usize)) -> Vec<T> {
    logits
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if (range.0..range.1).contains(&i) {
                x
            } else {
                T::neg_infinity()
            }
        })
        .collect()
}

/// Softmax in f64; −∞ entries get probability zero.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
