//! Define-by-run computation graph.
//!
//! Every op evaluates eagerly when it is recorded, so building the graph *is*
//! the forward pass: feed named inputs with [`Graph::input`], chain ops, and
//! read results with [`Graph::value`]. Nodes are appended in evaluation
//! order, which makes the node list topologically sorted by construction.
//! [`Graph::backward`](super::Graph::backward) walks it in reverse.

use super::{AutodiffError, ParamId, ParamStore, Real, Tensor};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

const GELU_COEF: f64 = 0.044_715;
// sqrt(2 / pi)
const GELU_SCALE: f64 = 0.797_884_560_802_865_4;

pub(crate) enum Op<T> {
    Input,
    Param(ParamId),
    MatMul {
        a: NodeId,
        b: NodeId,
        trans_b: bool,
    },
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, T),
    Gelu(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        normed: Vec<T>,
        inv_std: Vec<T>,
    },
    CausalSoftmax(NodeId),
    CausalAttention {
        qkv: NodeId,
        seqs: usize,
        len: usize,
        heads: usize,
        probs: Vec<T>,
    },
    SoftmaxCrossEntropy {
        logits: NodeId,
        targets: Vec<usize>,
        probs: Vec<T>,
    },
    Embedding {
        table: NodeId,
        ids: Vec<usize>,
    },
    SliceCols {
        a: NodeId,
        start: usize,
    },
    ConcatCols(Vec<NodeId>),
    Reshape(NodeId),
    Transpose(NodeId),
    Sum(NodeId),
}

pub(crate) struct Node<T> {
    pub(crate) op: Op<T>,
    pub(crate) shape: Vec<usize>,
    /// Empty for parameter leaves, whose values live in the store.
    pub(crate) value: Vec<T>,
    pub(crate) needs_grad: bool,
    name: Option<String>,
}

/// A recorded computation over parameters from one [`ParamStore`].
pub struct Graph<'p, T: Real> {
    pub(crate) params: &'p ParamStore<T>,
    pub(crate) nodes: Vec<Node<T>>,
    param_nodes: Vec<Option<NodeId>>,
}

fn mismatch(op: &'static str, expected: &[usize], got: &[usize]) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        expected: expected.to_vec(),
        got: got.to_vec(),
    }
}

/// Row-wise log-sum-exp over `row[lo..hi]`.
fn log_sum_exp<T: Real>(row: &[T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = row.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(128),
            param_nodes: vec![None; params.specs().len()],
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn value(&self, id: NodeId) -> &[T] {
        match self.nodes[id.0].op {
            Op::Param(pid) => self.params.values(pid),
            _ => &self.nodes[id.0].value,
        }
    }

    pub fn tensor(&self, id: NodeId) -> Tensor<T> {
        Tensor::new(self.shape(id).to_vec(), self.value(id).to_vec())
            .expect("node shapes are validated on insertion")
    }

    /// Looks up an input node by the name it was fed under.
    pub fn input_named(&self, name: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| matches!(n.op, Op::Input) && n.name.as_deref() == Some(name))
            .map(NodeId)
    }

    fn push(
        &mut self,
        op: Op<T>,
        shape: Vec<usize>,
        value: Vec<T>,
        needs_grad: bool,
        name: &'static str,
    ) -> Result<NodeId, AutodiffError> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite { op: name });
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            shape,
            value,
            needs_grad,
            name: None,
        });
        Ok(id)
    }

    fn grad_any(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].needs_grad)
    }

    fn dims2(&self, id: NodeId, op: &'static str) -> Result<(usize, usize), AutodiffError> {
        match *self.shape(id) {
            [r, c] => Ok((r, c)),
            ref s => Err(AutodiffError::NotAMatrix {
                op,
                shape: s.to_vec(),
            }),
        }
    }

    /// Feeds a named data tensor. Inputs never receive gradients.
    pub fn input(&mut self, name: &str, tensor: Tensor<T>) -> Result<NodeId, AutodiffError> {
        let shape = tensor.shape().to_vec();
        let id = self.push(Op::Input, shape, tensor.into_data(), false, "input")?;
        self.nodes[id.0].name = Some(name.to_string());
        Ok(id)
    }

    /// Leaf node for a parameter. Repeated calls return the same node.
    pub fn param(&mut self, pid: ParamId) -> NodeId {
        if let Some(id) = self.param_nodes[pid.0] {
            return id;
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op: Op::Param(pid),
            shape: self.params.spec(pid).shape.clone(),
            value: Vec::new(),
            needs_grad: true,
            name: None,
        });
        self.param_nodes[pid.0] = Some(id);
        id
    }

    fn matmul_impl(&mut self, a: NodeId, b: NodeId, trans_b: bool) -> Result<NodeId, AutodiffError> {
        let op_name = if trans_b { "matmul_nt" } else { "matmul" };
        let (m, k) = self.dims2(a, op_name)?;
        let (br, bc) = self.dims2(b, op_name)?;
        let (kb, n, b_strides) = if trans_b {
            (bc, br, (1, bc as isize))
        } else {
            (br, bc, (bc as isize, 1))
        };
        if k != kb {
            return Err(mismatch(op_name, &[m, k], self.shape(b)));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            self.value(a),
            (k as isize, 1),
            self.value(b),
            b_strides,
            T::zero(),
            &mut out,
            (n as isize, 1),
        );
        let g = self.grad_any(&[a, b]);
        self.push(Op::MatMul { a, b, trans_b }, vec![m, n], out, g, op_name)
    }

    /// `a · b` for `a: [m, k]`, `b: [k, n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.matmul_impl(a, b, false)
    }

    /// `a · bᵀ` for `a: [m, k]`, `b: [n, k]`.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.matmul_impl(a, b, true)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("add", self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x + y)
            .collect();
        let g = self.grad_any(&[a, b]);
        self.push(Op::Add(a, b), self.shape(a).to_vec(), out, g, "add")
    }

    /// Adds a length-`n` vector to every row of an `[m, n]` matrix.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId, AutodiffError> {
        let (m, n) = self.dims2(a, "add_row")?;
        if self.shape(bias) != [n] {
            return Err(mismatch("add_row", &[n], self.shape(bias)));
        }
        let b = self.value(bias);
        let mut out = self.value(a).to_vec();
        for row in out.chunks_exact_mut(n) {
            for (x, &y) in row.iter_mut().zip(b) {
                *x += y;
            }
        }
        let g = self.grad_any(&[a, bias]);
        self.push(Op::AddRow(a, bias), vec![m, n], out, g, "add_row")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch("mul", self.shape(a), self.shape(b)));
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x * y)
            .collect();
        let g = self.grad_any(&[a, b]);
        self.push(Op::Mul(a, b), self.shape(a).to_vec(), out, g, "mul")
    }

    pub fn scale(&mut self, a: NodeId, factor: T) -> Result<NodeId, AutodiffError> {
        let out = self.value(a).iter().map(|&x| x * factor).collect();
        let g = self.grad_any(&[a]);
        self.push(Op::Scale(a, factor), self.shape(a).to_vec(), out, g, "scale")
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let out = self.value(a).iter().map(|&x| gelu_value(x)).collect();
        let g = self.grad_any(&[a]);
        self.push(Op::Gelu(a), self.shape(a).to_vec(), out, g, "gelu")
    }

    /// Normalizes each row of `x: [m, n]` then applies `gain` and `bias`.
    pub fn layer_norm(
        &mut self,
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        eps: f64,
    ) -> Result<NodeId, AutodiffError> {
        let (m, n) = self.dims2(x, "layer_norm")?;
        if self.shape(gain) != [n] || self.shape(bias) != [n] {
            return Err(mismatch("layer_norm", &[n], self.shape(gain)));
        }
        let eps = T::from_f64(eps);
        let inv_n = T::from_f64(1.0 / n as f64);
        let xv = self.value(x);
        let (gv, bv) = (self.value(gain), self.value(bias));
        let mut normed = vec![T::zero(); m * n];
        let mut inv_std = vec![T::zero(); m];
        let mut out = vec![T::zero(); m * n];
        for r in 0..m {
            let row = &xv[r * n..(r + 1) * n];
            let mean = row.iter().copied().sum::<T>() * inv_n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_n;
            let rstd = T::one() / (var + eps).sqrt();
            inv_std[r] = rstd;
            for j in 0..n {
                let z = (row[j] - mean) * rstd;
                normed[r * n + j] = z;
                out[r * n + j] = z * gv[j] + bv[j];
            }
        }
        let g = self.grad_any(&[x, gain, bias]);
        self.push(
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            },
            vec![m, n],
            out,
            g,
            "layer_norm",
        )
    }

    /// Row softmax of a square score matrix where row `i` only sees
    /// columns `0..=i`; masked entries are exactly zero.
    pub fn causal_softmax(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let (m, n) = self.dims2(a, "causal_softmax")?;
        if m != n {
            return Err(mismatch("causal_softmax", &[m, m], &[m, n]));
        }
        let mut out = vec![T::zero(); m * n];
        let av = self.value(a);
        for i in 0..m {
            causal_row_softmax(&av[i * n..i * n + i + 1], &mut out[i * n..i * n + i + 1]);
        }
        let g = self.grad_any(&[a]);
        self.push(Op::CausalSoftmax(a), vec![m, n], out, g, "causal_softmax")
    }

    /// Fused multi-head causal self-attention.
    ///
    /// `qkv` is `[seqs·len, 3·d]` with query, key and value blocks side by
    /// side; each block splits into `heads` column groups. Sequences are
    /// stacked along rows and never attend to each other. Output is
    /// `[seqs·len, d]` with heads concatenated along columns.
    pub fn causal_attention(
        &mut self,
        qkv: NodeId,
        seqs: usize,
        len: usize,
        heads: usize,
    ) -> Result<NodeId, AutodiffError> {
        let (rows, width) = self.dims2(qkv, "causal_attention")?;
        if rows != seqs * len || width % 3 != 0 || heads == 0 || (width / 3) % heads != 0 {
            return Err(mismatch("causal_attention", &[seqs * len, width], &[rows, width]));
        }
        let d = width / 3;
        let dh = d / heads;
        let scale = T::from_f64(1.0 / (dh as f64).sqrt());
        let src = self.value(qkv);
        let mut probs = vec![T::zero(); seqs * heads * len * len];
        let mut out = vec![T::zero(); rows * d];
        let ld = width as isize;
        for s in 0..seqs {
            let base = s * len * width;
            for h in 0..heads {
                let p = &mut probs[(s * heads + h) * len * len..][..len * len];
                // scores = Q Kᵀ
                T::gemm(
                    len,
                    dh,
                    len,
                    &src[base + h * dh..],
                    (ld, 1),
                    &src[base + d + h * dh..],
                    (1, ld),
                    T::zero(),
                    p,
                    (len as isize, 1),
                );
                for i in 0..len {
                    let row = &mut p[i * len..(i + 1) * len];
                    for v in row[..=i].iter_mut() {
                        *v *= scale;
                    }
                    let scores: Vec<T> = row[..=i].to_vec();
                    causal_row_softmax(&scores, &mut row[..=i]);
                    for v in row[i + 1..].iter_mut() {
                        *v = T::zero();
                    }
                }
                T::gemm(
                    len,
                    len,
                    dh,
                    p,
                    (len as isize, 1),
                    &src[base + 2 * d + h * dh..],
                    (ld, 1),
                    T::zero(),
                    &mut out[s * len * d + h * dh..],
                    (d as isize, 1),
                );
            }
        }
        let g = self.grad_any(&[qkv]);
        self.push(
            Op::CausalAttention {
                qkv,
                seqs,
                len,
                heads,
                probs,
            },
            vec![rows, d],
            out,
            g,
            "causal_attention",
        )
    }

    /// Summed cross-entropy of `logits: [m, v]` against `targets`, with the
    /// softmax of row `r` restricted to `ranges[r]`.
    ///
    /// Restricting the softmax is the same as setting every logit outside
    /// the range to −∞ first. Uses max subtraction for stability.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: NodeId,
        targets: &[usize],
        ranges: &[(usize, usize)],
    ) -> Result<NodeId, AutodiffError> {
        let (m, v) = self.dims2(logits, "softmax_cross_entropy")?;
        if targets.len() != m || ranges.len() != m {
            return Err(mismatch("softmax_cross_entropy", &[m], &[targets.len()]));
        }
        let lv = self.value(logits);
        let mut probs = vec![T::zero(); m * v];
        let mut total = T::zero();
        for r in 0..m {
            let (lo, hi) = ranges[r];
            let t = targets[r];
            if lo >= hi || hi > v || t < lo || t >= hi {
                return Err(AutodiffError::IndexOutOfRange {
                    op: "softmax_cross_entropy",
                    index: t,
                    bound: hi.min(v),
                });
            }
            let row = &lv[r * v + lo..r * v + hi];
            let lse = log_sum_exp(row);
            total += lse - lv[r * v + t];
            for (p, &x) in probs[r * v + lo..r * v + hi].iter_mut().zip(row) {
                *p = (x - lse).exp();
            }
        }
        let g = self.grad_any(&[logits]);
        self.push(
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            vec![1],
            vec![total],
            g,
            "softmax_cross_entropy",
        )
    }

    /// Gathers rows of `table: [v, d]`.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId, AutodiffError> {
        let (v, d) = self.dims2(table, "embedding")?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(AutodiffError::IndexOutOfRange {
                op: "embedding",
                index: bad,
                bound: v,
            });
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            out.extend_from_slice(&tv[i * d..(i + 1) * d]);
        }
        let g = self.grad_any(&[table]);
        self.push(
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            vec![ids.len(), d],
            out,
            g,
            "embedding",
        )
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> Result<NodeId, AutodiffError> {
        let (m, n) = self.dims2(a, "slice_cols")?;
        if start >= end || end > n {
            return Err(AutodiffError::IndexOutOfRange {
                op: "slice_cols",
                index: end,
                bound: n,
            });
        }
        let av = self.value(a);
        let mut out = Vec::with_capacity(m * (end - start));
        for r in 0..m {
            out.extend_from_slice(&av[r * n + start..r * n + end]);
        }
        let g = self.grad_any(&[a]);
        self.push(Op::SliceCols { a, start }, vec![m, end - start], out, g, "slice_cols")
    }

    /// Joins matrices with equal row counts side by side.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let first = *parts.first().ok_or(AutodiffError::InvalidShape(vec![]))?;
        let (m, _) = self.dims2(first, "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims2(p, "concat_cols")?;
            if r != m {
                return Err(mismatch("concat_cols", &[m, c], &[r, c]));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for r in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p)[r * w..(r + 1) * w]);
            }
        }
        let g = self.grad_any(parts);
        self.push(Op::ConcatCols(parts.to_vec()), vec![m, total], out, g, "concat_cols")
    }

    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> Result<NodeId, AutodiffError> {
        let numel: usize = shape.iter().product();
        if shape.is_empty() || numel != self.value(a).len() {
            return Err(mismatch("reshape", self.shape(a), &shape));
        }
        let out = self.value(a).to_vec();
        let g = self.grad_any(&[a]);
        self.push(Op::Reshape(a), shape, out, g, "reshape")
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let (m, n) = self.dims2(a, "transpose")?;
        let av = self.value(a);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = av[i * n + j];
            }
        }
        let g = self.grad_any(&[a]);
        self.push(Op::Transpose(a), vec![n, m], out, g, "transpose")
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        let total = self.value(a).iter().copied().sum();
        let g = self.grad_any(&[a]);
        self.push(Op::Sum(a), vec![1], vec![total], g, "sum")
    }
}

/// Softmax of `scores` into `out`, both already restricted to the visible
/// prefix of a causal row.
pub(crate) fn causal_row_softmax<T: Real>(scores: &[T], out: &mut [T]) {
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum += *o;
    }
    let inv = T::one() / sum;
    for o in out.iter_mut() {
        *o *= inv;
    }
}

pub(crate) fn gelu_value<T: Real>(x: T) -> T {
    let c = T::from_f64(GELU_COEF);
    let s = T::from_f64(GELU_SCALE);
    T::from_f64(0.5) * x * (T::one() + (s * (x + c * x * x * x)).tanh())
}

pub(crate) fn gelu_grad<T: Real>(x: T) -> T {
    let c = T::from_f64(GELU_COEF);
    let s = T::from_f64(GELU_SCALE);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let th = (s * (x + c * x * x * x)).tanh();
    half * (T::one() + th) + half * x * (T::one() - th * th) * s * (T::one() + three * c * x * x)
}
