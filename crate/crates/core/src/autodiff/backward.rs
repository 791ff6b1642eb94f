use super::graph::{gelu_grad, Node, Op};
use super::{AutodiffError, Graph, NodeId, ParamStore, Real};

/// Gradient buffers for one backward pass: per-node accumulators plus the
/// flat parameter gradient.
struct Sinks<T> {
    nodes: Vec<Option<Vec<T>>>,
    params: Vec<T>,
}

impl<T: Real> Sinks<T> {
    /// Accumulator for `id`, or `None` when nothing upstream needs it.
    fn get<'s>(
        &'s mut self,
        nodes: &[Node<T>],
        store: &ParamStore<T>,
        id: NodeId,
    ) -> Option<&'s mut [T]> {
        let node = &nodes[id.0];
        if !node.needs_grad {
            return None;
        }
        match node.op {
            Op::Param(pid) => Some(&mut self.params[store.spec(pid).range()]),
            _ => {
                let numel = node.shape.iter().product();
                Some(
                    self.nodes[id.0]
                        .get_or_insert_with(|| vec![T::zero(); numel])
                        .as_mut_slice(),
                )
            }
        }
    }
}

fn axpy<T: Real>(dst: &mut [T], src: &[T], factor: T) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += factor * s;
    }
}

fn acc<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl<T: Real> Graph<'_, T> {
    /// Reverse pass from a scalar node. Returns `∂loss/∂θ` in the flat
    /// layout of the parameter store; parameters the loss does not touch get
    /// zeros.
    pub fn backward(&self, loss: NodeId) -> Result<Vec<T>, AutodiffError> {
        let shape = self.shape(loss);
        if shape.iter().product::<usize>() != 1 {
            return Err(AutodiffError::NonScalarLoss(shape.to_vec()));
        }
        let mut sinks = Sinks {
            nodes: (0..self.nodes.len()).map(|_| None).collect(),
            params: vec![T::zero(); self.params.len()],
        };
        if !self.nodes[loss.0].needs_grad {
            return Ok(sinks.params);
        }
        sinks.nodes[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = sinks.nodes[idx].take() else {
                continue;
            };
            self.backprop_node(idx, &g, &mut sinks);
        }
        if sinks.params.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite { op: "backward" });
        }
        Ok(sinks.params)
    }

    fn backprop_node(&self, idx: usize, g: &[T], sinks: &mut Sinks<T>) {
        let nodes = &self.nodes;
        let store = self.params;
        let node = &nodes[idx];
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul { a, b, trans_b } => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = node.shape[1];
                let bv = self.value(*b);
                // Effective right operand is k×n.
                let beff = if *trans_b { (1, k as isize) } else { (n as isize, 1) };
                if let Some(da) = sinks.get(nodes, store, *a) {
                    T::gemm(
                        m,
                        n,
                        k,
                        g,
                        (n as isize, 1),
                        bv,
                        (beff.1, beff.0),
                        T::one(),
                        da,
                        (k as isize, 1),
                    );
                }
                let av = self.value(*a);
                if let Some(db) = sinks.get(nodes, store, *b) {
                    T::gemm(
                        k,
                        m,
                        n,
                        av,
                        (1, k as isize),
                        g,
                        (n as isize, 1),
                        T::one(),
                        db,
                        beff,
                    );
                }
            }
            Op::Add(a, b) => {
                if let Some(da) = sinks.get(nodes, store, *a) {
                    acc(da, g);
                }
                if let Some(db) = sinks.get(nodes, store, *b) {
                    acc(db, g);
                }
            }
            Op::AddRow(a, bias) => {
                if let Some(da) = sinks.get(nodes, store, *a) {
                    acc(da, g);
                }
                let n = node.shape[1];
                if let Some(db) = sinks.get(nodes, store, *bias) {
                    for row in g.chunks_exact(n) {
                        acc(db, row);
                    }
                }
            }
            Op::Mul(a, b) => {
                let bv = self.value(*b);
                if let Some(da) = sinks.get(nodes, store, *a) {
                    for ((d, &gi), &y) in da.iter_mut().zip(g).zip(bv) {
                        *d += gi * y;
                    }
                }
                let av = self.value(*a);
                if let Some(db) = sinks.get(nodes, store, *b) {
                    for ((d, &gi), &x) in db.iter_mut().zip(g).zip(av) {
                        *d += gi * x;
                    }
                }
            }
            Op::Scale(a, factor) => {
                if let Some(da) = sinks.get(nodes, store, *a) {
                    axpy(da, g, *factor);
                }
            }
            Op::Gelu(a) => {
                let av = self.value(*a);
                if let Some(da) = sinks.get(nodes, store, *a) {
                    for ((d, &gi), &x) in da.iter_mut().zip(g).zip(av) {
                        *d += gi * gelu_grad(x);
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            } => {
                let n = node.shape[1];
                if let Some(db) = sinks.get(nodes, store, *bias) {
                    for row in g.chunks_exact(n) {
                        acc(db, row);
                    }
                }
                if let Some(dg) = sinks.get(nodes, store, *gain) {
                    for (grow, zrow) in g.chunks_exact(n).zip(normed.chunks_exact(n)) {
                        for ((d, &gi), &z) in dg.iter_mut().zip(grow).zip(zrow) {
                            *d += gi * z;
                        }
                    }
                }
                let gv = self.value(*gain);
                let inv_n = T::from_f64(1.0 / n as f64);
                if let Some(dx) = sinks.get(nodes, store, *x) {
                    let mut dz = vec![T::zero(); n];
                    for (r, &rstd) in inv_std.iter().enumerate() {
                        let grow = &g[r * n..(r + 1) * n];
                        let zrow = &normed[r * n..(r + 1) * n];
                        let mut mean_dz = T::zero();
                        let mut mean_dz_z = T::zero();
                        for j in 0..n {
                            dz[j] = grow[j] * gv[j];
                            mean_dz += dz[j];
                            mean_dz_z += dz[j] * zrow[j];
                        }
                        mean_dz *= inv_n;
                        mean_dz_z *= inv_n;
                        for j in 0..n {
                            dx[r * n + j] += rstd * (dz[j] - mean_dz - zrow[j] * mean_dz_z);
                        }
                    }
                }
            }
            Op::CausalSoftmax(a) => {
                let m = node.shape[0];
                let y = &node.value;
                if let Some(da) = sinks.get(nodes, store, *a) {
                    for i in 0..m {
                        let yr = &y[i * m..i * m + i + 1];
                        let gr = &g[i * m..i * m + i + 1];
                        let dot: T = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                        for j in 0..=i {
                            da[i * m + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
            }
            Op::CausalAttention {
                qkv,
                seqs,
                len,
                heads,
                probs,
            } => {
                let src = self.value(*qkv);
                if let Some(dqkv) = sinks.get(nodes, store, *qkv) {
                    attention_backward(src, g, probs, dqkv, *seqs, *len, *heads);
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let v = self.shape(*logits)[1];
                if let Some(dl) = sinks.get(nodes, store, *logits) {
                    let scale = g[0];
                    axpy(dl, probs, scale);
                    for (r, &t) in targets.iter().enumerate() {
                        dl[r * v + t] -= scale;
                    }
                }
            }
            Op::Embedding { table, ids } => {
                let d = node.shape[1];
                if let Some(dt) = sinks.get(nodes, store, *table) {
                    for (row, &i) in ids.iter().enumerate() {
                        acc(&mut dt[i * d..(i + 1) * d], &g[row * d..(row + 1) * d]);
                    }
                }
            }
            Op::SliceCols { a, start } => {
                let n = self.shape(*a)[1];
                let w = node.shape[1];
                if let Some(da) = sinks.get(nodes, store, *a) {
                    for (r, grow) in g.chunks_exact(w).enumerate() {
                        acc(&mut da[r * n + start..r * n + start + w], grow);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let total = node.shape[1];
                let mut col = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    if let Some(dp) = sinks.get(nodes, store, p) {
                        for (r, grow) in g.chunks_exact(total).enumerate() {
                            acc(&mut dp[r * w..(r + 1) * w], &grow[col..col + w]);
                        }
                    }
                    col += w;
                }
            }
            Op::Reshape(a) => {
                if let Some(da) = sinks.get(nodes, store, *a) {
                    acc(da, g);
                }
            }
            Op::Transpose(a) => {
                let (m, n) = (self.shape(*a)[0], self.shape(*a)[1]);
                if let Some(da) = sinks.get(nodes, store, *a) {
                    for i in 0..m {
                        for j in 0..n {
                            da[i * n + j] += g[j * m + i];
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(da) = sinks.get(nodes, store, *a) {
                    for d in da.iter_mut() {
                        *d += g[0];
                    }
                }
            }
        }
    }
}

fn attention_backward<T: Real>(
    src: &[T],
    g: &[T],
    probs: &[T],
    dqkv: &mut [T],
    seqs: usize,
    len: usize,
    heads: usize,
) {
    let width = src.len() / (seqs * len);
    let d = width / 3;
    let dh = d / heads;
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());
    let ld = width as isize;
    let l = len as isize;
    let mut dp = vec![T::zero(); len * len];
    for s in 0..seqs {
        let base = s * len * width;
        let gbase = s * len * d;
        for h in 0..heads {
            let p = &probs[(s * heads + h) * len * len..][..len * len];
            let q_off = base + h * dh;
            let k_off = base + d + h * dh;
            let v_off = base + 2 * d + h * dh;
            let go = &g[gbase + h * dh..];
            // dV += Pᵀ dO
            T::gemm(
                len,
                len,
                dh,
                p,
                (1, l),
                go,
                (d as isize, 1),
                T::one(),
                &mut dqkv[v_off..],
                (ld, 1),
            );
            // dP = dO Vᵀ
            T::gemm(
                len,
                dh,
                len,
                go,
                (d as isize, 1),
                &src[v_off..],
                (1, ld),
                T::zero(),
                &mut dp,
                (l, 1),
            );
            // dS = P ⊙ (dP − rowsum(dP ⊙ P)), folded with the score scale.
            for i in 0..len {
                let pr = &p[i * len..i * len + i + 1];
                let dr = &mut dp[i * len..(i + 1) * len];
                let dot: T = pr.iter().zip(dr.iter()).map(|(&a, &b)| a * b).sum();
                for j in 0..=i {
                    dr[j] = pr[j] * (dr[j] - dot) * scale;
                }
                for v in dr[i + 1..].iter_mut() {
                    *v = T::zero();
                }
            }
            // dQ += dS K
            T::gemm(
                len,
                len,
                dh,
                &dp,
                (l, 1),
                &src[k_off..],
                (ld, 1),
                T::one(),
                &mut dqkv[q_off..],
                (ld, 1),
            );
            // dK += dSᵀ Q
            T::gemm(
                len,
                len,
                dh,
                &dp,
                (1, l),
                &src[q_off..],
                (ld, 1),
                T::one(),
                &mut dqkv[k_off..],
                (ld, 1),
            );
        }
    }
}
