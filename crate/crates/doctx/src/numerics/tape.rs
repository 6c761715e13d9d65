//! The operation tape and its forward/backward kernels.

use super::NumericsError;

/// Handle to a node on a [`Tape`]. Values are immutable once written; only
/// the gradient buffers are touched by the backward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Tensor(usize);

enum Op {
    Leaf,
    Add(Tensor, Tensor),
    /// Matrix plus a row vector broadcast over every row.
    AddBias(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Scale(Tensor, f64),
    MatMul(Tensor, Tensor),
    /// `a @ b^T` without materializing the transpose.
    MatMulNT(Tensor, Tensor),
    SoftmaxRows(Tensor),
    LayerNorm {
        x: Tensor,
        gain: Tensor,
        bias: Tensor,
        /// Per-row (mean, 1/sqrt(var + eps)) saved by the forward pass.
        stats: Vec<(f64, f64)>,
    },
    Relu(Tensor),
    Embed {
        table: Tensor,
        ids: Vec<u32>,
    },
    ConcatRows(Vec<Tensor>),
    SliceCols {
        x: Tensor,
        start: usize,
        len: usize,
    },
    ConcatCols(Vec<Tensor>),
    CrossEntropy {
        logits: Tensor,
        targets: Vec<u32>,
        smoothing: f64,
        pad_id: u32,
        /// Softmax rows saved by the forward pass.
        probs: Vec<f64>,
        n_scored: usize,
    },
    Sum(Tensor),
}

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// Records a forward computation and runs the reverse pass over it.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, needs_grad: bool) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let grad = vec![0.0; data.len()];
        self.nodes.push(Node {
            shape,
            data,
            grad,
            op,
            needs_grad,
        });
        Tensor(self.nodes.len() - 1)
    }

    /// Constant leaf. Never receives a gradient.
    pub fn constant(&mut self, data: Vec<f64>, shape: &[usize]) -> Tensor {
        self.push(shape.to_vec(), data, Op::Leaf, false)
    }

    /// Differentiable leaf (a parameter or an input under test).
    pub fn param(&mut self, data: &[f64], shape: &[usize]) -> Tensor {
        self.push(shape.to_vec(), data.to_vec(), Op::Leaf, true)
    }

    pub fn value(&self, t: Tensor) -> &[f64] {
        &self.nodes[t.0].data
    }

    pub fn shape(&self, t: Tensor) -> &[usize] {
        &self.nodes[t.0].shape
    }

    /// Gradient accumulated by the last [`Tape::backward`] call.
    pub fn grad(&self, t: Tensor) -> &[f64] {
        &self.nodes[t.0].grad
    }

    fn rows_cols(&self, t: Tensor) -> (usize, usize) {
        let s = &self.nodes[t.0].shape;
        match s.len() {
            2 => (s[0], s[1]),
            1 => (1, s[0]),
            _ => panic!("expected 1-D or 2-D tensor, got shape {s:?}"),
        }
    }

    fn needs(&self, t: Tensor) -> bool {
        self.nodes[t.0].needs_grad
    }

    // ---- ops ----

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Tensor {
        assert_eq!(
            self.nodes[a.0].shape, self.nodes[b.0].shape,
            "add: shape mismatch"
        );
        let data: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x + y)
            .collect();
        let ng = self.needs(a) || self.needs(b);
        self.push(self.nodes[a.0].shape.clone(), data, Op::Add(a, b), ng)
    }

    pub fn add_bias(&mut self, x: Tensor, bias: Tensor) -> Tensor {
        let (r, c) = self.rows_cols(x);
        assert_eq!(self.nodes[bias.0].shape, vec![c], "add_bias: width mismatch");
        let mut data = self.nodes[x.0].data.clone();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] += self.nodes[bias.0].data[j];
            }
        }
        let ng = self.needs(x) || self.needs(bias);
        self.push(self.nodes[x.0].shape.clone(), data, Op::AddBias(x, bias), ng)
    }

    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Tensor {
        assert_eq!(
            self.nodes[a.0].shape, self.nodes[b.0].shape,
            "mul: shape mismatch"
        );
        let data: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x * y)
            .collect();
        let ng = self.needs(a) || self.needs(b);
        self.push(self.nodes[a.0].shape.clone(), data, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: Tensor, c: f64) -> Tensor {
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x * c).collect();
        let ng = self.needs(a);
        self.push(self.nodes[a.0].shape.clone(), data, Op::Scale(a, c), ng)
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, NumericsError> {
        let (m, ka) = self.rows_cols(a);
        let (kb, n) = self.rows_cols(b);
        if ka != kb {
            return Err(NumericsError::Dim {
                op: "matmul",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let data = matmul_nn(&self.nodes[a.0].data, &self.nodes[b.0].data, m, ka, n);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(vec![m, n], data, Op::MatMul(a, b), ng))
    }

    /// `a[m,k] @ b[n,k]^T -> [m,n]`.
    pub fn matmul_nt(&mut self, a: Tensor, b: Tensor) -> Result<Tensor, NumericsError> {
        let (m, ka) = self.rows_cols(a);
        let (n, kb) = self.rows_cols(b);
        if ka != kb {
            return Err(NumericsError::Dim {
                op: "matmul_nt",
                lhs: self.nodes[a.0].shape.clone(),
                rhs: self.nodes[b.0].shape.clone(),
            });
        }
        let data = matmul_nt(&self.nodes[a.0].data, &self.nodes[b.0].data, m, ka, n);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(vec![m, n], data, Op::MatMulNT(a, b), ng))
    }

    /// Row-wise softmax, stabilized by max subtraction.
    pub fn softmax_rows(&mut self, x: Tensor) -> Tensor {
        let (r, c) = self.rows_cols(x);
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = &self.nodes[x.0].data[i * c..(i + 1) * c];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..c {
                let e = (row[j] - mx).exp();
                data[i * c + j] = e;
                sum += e;
            }
            for j in 0..c {
                data[i * c + j] /= sum;
            }
        }
        let ng = self.needs(x);
        self.push(self.nodes[x.0].shape.clone(), data, Op::SoftmaxRows(x), ng)
    }

    /// Per-row normalization to zero mean and unit variance, then an affine
    /// transform with `gain` and `bias` (both of the row width).
    pub fn layer_norm(&mut self, x: Tensor, gain: Tensor, bias: Tensor, eps: f64) -> Tensor {
        let (r, c) = self.rows_cols(x);
        assert!(c >= 1, "layer_norm on empty rows");
        assert_eq!(self.nodes[gain.0].shape, vec![c]);
        assert_eq!(self.nodes[bias.0].shape, vec![c]);
        let mut data = vec![0.0; r * c];
        let mut stats = Vec::with_capacity(r);
        for i in 0..r {
            let row = &self.nodes[x.0].data[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv_std = 1.0 / (var + eps).sqrt();
            stats.push((mean, inv_std));
            for j in 0..c {
                let xhat = (row[j] - mean) * inv_std;
                data[i * c + j] =
                    xhat * self.nodes[gain.0].data[j] + self.nodes[bias.0].data[j];
            }
        }
        let ng = self.needs(x) || self.needs(gain) || self.needs(bias);
        self.push(
            self.nodes[x.0].shape.clone(),
            data,
            Op::LayerNorm { x, gain, bias, stats },
            ng,
        )
    }

    pub fn relu(&mut self, x: Tensor) -> Tensor {
        let data: Vec<f64> = self.nodes[x.0].data.iter().map(|v| v.max(0.0)).collect();
        let ng = self.needs(x);
        self.push(self.nodes[x.0].shape.clone(), data, Op::Relu(x), ng)
    }

    /// Gather rows of `table` by token id.
    pub fn embed(&mut self, table: Tensor, ids: &[u32]) -> Tensor {
        let (v, d) = self.rows_cols(table);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            let id = id as usize;
            assert!(id < v, "embed: id {id} out of table range {v}");
            data.extend_from_slice(&self.nodes[table.0].data[id * d..(id + 1) * d]);
        }
        let ng = self.needs(table);
        self.push(
            vec![ids.len(), d],
            data,
            Op::Embed { table, ids: ids.to_vec() },
            ng,
        )
    }

    /// Stack matrices of equal width along the row axis.
    pub fn concat_rows(&mut self, parts: &[Tensor]) -> Tensor {
        assert!(!parts.is_empty());
        let (_, c) = self.rows_cols(parts[0]);
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (r, pc) = self.rows_cols(p);
            assert_eq!(pc, c, "concat_rows: width mismatch");
            rows += r;
            data.extend_from_slice(&self.nodes[p.0].data);
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(vec![rows, c], data, Op::ConcatRows(parts.to_vec()), ng)
    }

    pub fn slice_cols(&mut self, x: Tensor, start: usize, len: usize) -> Tensor {
        let (r, c) = self.rows_cols(x);
        assert!(start + len <= c, "slice_cols out of range");
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&self.nodes[x.0].data[i * c + start..i * c + start + len]);
        }
        let ng = self.needs(x);
        self.push(vec![r, len], data, Op::SliceCols { x, start, len }, ng)
    }

    /// Concatenate matrices with equal row counts along the column axis.
    pub fn concat_cols(&mut self, parts: &[Tensor]) -> Tensor {
        assert!(!parts.is_empty());
        let (r, _) = self.rows_cols(parts[0]);
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let (pr, pc) = self.rows_cols(p);
                assert_eq!(pr, r, "concat_cols: row mismatch");
                pc
            })
            .collect();
        let total: usize = widths.iter().sum();
        let mut data = vec![0.0; r * total];
        let mut off = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            for i in 0..r {
                data[i * total + off..i * total + off + w]
                    .copy_from_slice(&self.nodes[p.0].data[i * w..(i + 1) * w]);
            }
            off += w;
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(vec![r, total], data, Op::ConcatCols(parts.to_vec()), ng)
    }

    /// Token-level cross entropy with label smoothing, averaged over non-pad
    /// targets. Smoothing spreads `smoothing` of the target mass uniformly
    /// over the whole vocabulary. Returns the scalar loss; per-token log
    /// probabilities of the target ids are available via
    /// [`Tape::log_probs`] on the returned tensor.
    pub fn cross_entropy(
        &mut self,
        logits: Tensor,
        targets: &[u32],
        smoothing: f64,
        pad_id: u32,
    ) -> Result<Tensor, NumericsError> {
        let (t, v) = self.rows_cols(logits);
        assert_eq!(t, targets.len(), "cross_entropy: target length mismatch");
        for &id in targets {
            if id != pad_id && id as usize >= v {
                return Err(NumericsError::Vocabulary { id, vocab: v });
            }
        }
        let mut probs = vec![0.0; t * v];
        let mut loss = 0.0;
        let mut n_scored = 0usize;
        for i in 0..t {
            let row = &self.nodes[logits.0].data[i * v..(i + 1) * v];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..v {
                let e = (row[j] - mx).exp();
                probs[i * v + j] = e;
                sum += e;
            }
            let log_z = mx + sum.ln();
            for j in 0..v {
                probs[i * v + j] /= sum;
            }
            if targets[i] == pad_id {
                continue;
            }
            n_scored += 1;
            let tgt = targets[i] as usize;
            // loss_i = -(1-eps) log p_tgt - eps/V sum_j log p_j
            let log_p_tgt = row[tgt] - log_z;
            loss -= (1.0 - smoothing) * log_p_tgt;
            if smoothing > 0.0 {
                let acc: f64 = row.iter().map(|&x| x - log_z).sum();
                loss -= smoothing / v as f64 * acc;
            }
        }
        let n = n_scored.max(1);
        loss /= n as f64;
        let ng = self.needs(logits);
        Ok(self.push(
            vec![1],
            vec![loss],
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                smoothing,
                pad_id,
                probs,
                n_scored,
            },
            ng,
        ))
    }

    /// Per-token `log P(target_t)` for a [`Tape::cross_entropy`] node.
    /// Pad positions report 0.0.
    pub fn log_probs(&self, ce: Tensor) -> Vec<f64> {
        match &self.nodes[ce.0].op {
            Op::CrossEntropy { targets, pad_id, probs, .. } => {
                let v = probs.len() / targets.len().max(1);
                targets
                    .iter()
                    .enumerate()
                    .map(|(i, &tgt)| {
                        if tgt == *pad_id {
                            0.0
                        } else {
                            probs[i * v + tgt as usize].ln()
                        }
                    })
                    .collect()
            }
            _ => panic!("log_probs on a non-cross-entropy node"),
        }
    }

    pub fn sum(&mut self, x: Tensor) -> Tensor {
        let total: f64 = self.nodes[x.0].data.iter().sum();
        let ng = self.needs(x);
        self.push(vec![1], vec![total], Op::Sum(x), ng)
    }

    /// Reverse pass from a scalar node. Every recorded op is visited exactly
    /// once, in reverse creation order, which is a reverse topological order
    /// because parents always precede children on the tape.
    pub fn backward(&mut self, loss: Tensor) -> Result<(), NumericsError> {
        assert_eq!(self.nodes[loss.0].data.len(), 1, "backward needs a scalar");
        if !self.nodes[loss.0].data[0].is_finite() {
            return Err(NumericsError::NonFinite("backward seed"));
        }
        for node in &mut self.nodes {
            node.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.nodes[loss.0].grad[0] = 1.0;
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            self.step_backward(idx);
        }
        Ok(())
    }

    fn step_backward(&mut self, idx: usize) {
        // Take the op out to appease the borrow checker; leaves are cheap.
        let op = std::mem::replace(&mut self.nodes[idx].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                let g = self.nodes[idx].grad.clone();
                self.accum(*a, &g);
                self.accum(*b, &g);
            }
            Op::AddBias(x, bias) => {
                let g = self.nodes[idx].grad.clone();
                let (r, c) = self.rows_cols(*x);
                self.accum(*x, &g);
                if self.needs(*bias) {
                    let mut gb = vec![0.0; c];
                    for i in 0..r {
                        for j in 0..c {
                            gb[j] += g[i * c + j];
                        }
                    }
                    self.accum(*bias, &gb);
                }
            }
            Op::Mul(a, b) => {
                let g = self.nodes[idx].grad.clone();
                if self.needs(*a) {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[b.0].data)
                        .map(|(gi, bi)| gi * bi)
                        .collect();
                    self.accum(*a, &ga);
                }
                if self.needs(*b) {
                    let gb: Vec<f64> = g
                        .iter()
                        .zip(&self.nodes[a.0].data)
                        .map(|(gi, ai)| gi * ai)
                        .collect();
                    self.accum(*b, &gb);
                }
            }
            Op::Scale(a, c) => {
                let g: Vec<f64> = self.nodes[idx].grad.iter().map(|gi| gi * c).collect();
                self.accum(*a, &g);
            }
            Op::MatMul(a, b) => {
                let (m, k) = self.rows_cols(*a);
                let (_, n) = self.rows_cols(*b);
                let g = self.nodes[idx].grad.clone();
                if self.needs(*a) {
                    // dA = dC @ B^T
                    let ga = matmul_nt(&g, &self.nodes[b.0].data, m, n, k);
                    self.accum(*a, &ga);
                }
                if self.needs(*b) {
                    // dB = A^T @ dC
                    let gb = matmul_tn(&self.nodes[a.0].data, &g, m, k, n);
                    self.accum(*b, &gb);
                }
            }
            Op::MatMulNT(a, b) => {
                let (m, k) = self.rows_cols(*a);
                let (n, _) = self.rows_cols(*b);
                let g = self.nodes[idx].grad.clone();
                if self.needs(*a) {
                    // dA = dC @ B
                    let ga = matmul_nn(&g, &self.nodes[b.0].data, m, n, k);
                    self.accum(*a, &ga);
                }
                if self.needs(*b) {
                    // dB = dC^T @ A
                    let gb = matmul_tn(&g, &self.nodes[a.0].data, m, n, k);
                    self.accum(*b, &gb);
                }
            }
            Op::SoftmaxRows(x) => {
                let (r, c) = self.rows_cols(*x);
                let y = &self.nodes[idx].data;
                let g = &self.nodes[idx].grad;
                let mut gx = vec![0.0; r * c];
                for i in 0..r {
                    let dot: f64 = (0..c).map(|j| g[i * c + j] * y[i * c + j]).sum();
                    for j in 0..c {
                        gx[i * c + j] = y[i * c + j] * (g[i * c + j] - dot);
                    }
                }
                self.accum(*x, &gx);
            }
            Op::LayerNorm { x, gain, bias, stats } => {
                let (r, c) = self.rows_cols(*x);
                let g = self.nodes[idx].grad.clone();
                let mut gx = vec![0.0; r * c];
                let mut ggain = vec![0.0; c];
                let mut gbias = vec![0.0; c];
                for i in 0..r {
                    let (mean, inv_std) = stats[i];
                    let xrow = &self.nodes[x.0].data[i * c..(i + 1) * c];
                    let grow = &g[i * c..(i + 1) * c];
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for j in 0..c {
                        let xhat = (xrow[j] - mean) * inv_std;
                        let dxhat = grow[j] * self.nodes[gain.0].data[j];
                        ggain[j] += grow[j] * xhat;
                        gbias[j] += grow[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                    }
                    let n = c as f64;
                    for j in 0..c {
                        let xhat = (xrow[j] - mean) * inv_std;
                        let dxhat = grow[j] * self.nodes[gain.0].data[j];
                        gx[i * c + j] = inv_std / n
                            * (n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat);
                    }
                }
                self.accum(*x, &gx);
                if self.needs(*gain) {
                    self.accum(*gain, &ggain);
                }
                if self.needs(*bias) {
                    self.accum(*bias, &gbias);
                }
            }
            Op::Relu(x) => {
                let gx: Vec<f64> = self.nodes[idx]
                    .grad
                    .iter()
                    .zip(&self.nodes[x.0].data)
                    .map(|(g, &v)| if v > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accum(*x, &gx);
            }
            Op::Embed { table, ids } => {
                let (_, d) = self.rows_cols(*table);
                let g = self.nodes[idx].grad.clone();
                let gt = &mut self.nodes[table.0].grad;
                for (row, &id) in ids.iter().enumerate() {
                    let id = id as usize;
                    for j in 0..d {
                        gt[id * d + j] += g[row * d + j];
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let g = self.nodes[idx].grad.clone();
                let mut off = 0;
                for &p in parts {
                    let n = self.nodes[p.0].data.len();
                    if self.needs(p) {
                        let slice = g[off..off + n].to_vec();
                        self.accum(p, &slice);
                    }
                    off += n;
                }
            }
            Op::SliceCols { x, start, len } => {
                let (r, c) = self.rows_cols(*x);
                let g = self.nodes[idx].grad.clone();
                let gx = &mut self.nodes[x.0].grad;
                for i in 0..r {
                    for j in 0..*len {
                        gx[i * c + start + j] += g[i * len + j];
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let g = self.nodes[idx].grad.clone();
                let total = self.nodes[idx].shape[1];
                let r = self.nodes[idx].shape[0];
                let mut off = 0;
                for &p in parts {
                    let w = self.nodes[p.0].shape[1];
                    if self.needs(p) {
                        let mut gp = vec![0.0; r * w];
                        for i in 0..r {
                            gp[i * w..(i + 1) * w]
                                .copy_from_slice(&g[i * total + off..i * total + off + w]);
                        }
                        self.accum(p, &gp);
                    }
                    off += w;
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                smoothing,
                pad_id,
                probs,
                n_scored,
            } => {
                let (t, v) = self.rows_cols(*logits);
                let upstream = self.nodes[idx].grad[0];
                let n = (*n_scored).max(1) as f64;
                let mut gl = vec![0.0; t * v];
                for i in 0..t {
                    if targets[i] == *pad_id {
                        continue;
                    }
                    let tgt = targets[i] as usize;
                    for j in 0..v {
                        let q = if j == tgt {
                            1.0 - smoothing + smoothing / v as f64
                        } else {
                            smoothing / v as f64
                        };
                        gl[i * v + j] = upstream * (probs[i * v + j] - q) / n;
                    }
                }
                self.accum(*logits, &gl);
            }
            Op::Sum(x) => {
                let g = self.nodes[idx].grad[0];
                let gx = vec![g; self.nodes[x.0].data.len()];
                self.accum(*x, &gx);
            }
        }
        self.nodes[idx].op = op;
    }

    fn accum(&mut self, t: Tensor, g: &[f64]) {
        if !self.nodes[t.0].needs_grad {
            return;
        }
        for (dst, src) in self.nodes[t.0].grad.iter_mut().zip(g) {
            *dst += src;
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

// Raw kernels. Row-major, accumulation over k in fixed order.

fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

/// `a[m,k] @ b[n,k]^T`.
fn matmul_nt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for p in 0..k {
                s += arow[p] * brow[p];
            }
            c[i * n + j] = s;
        }
    }
    c
}

/// `a[m,k]^T @ b[m,n] -> [k,n]`.
fn matmul_tn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; k * n];
    for p in 0..m {
        let brow = &b[p * n..(p + 1) * n];
        for i in 0..k {
            let av = a[p * k + i];
            if av == 0.0 {
                continue;
            }
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}
