//! Reverse-mode automatic differentiation over a recorded operation tape.
//!
//! Every operation appends a node holding its output tensor and the indices
//! of its inputs, so node ids are already in topological order; `backward`
//! walks them once in reverse, accumulating gradients. A tape is consumed by
//! its backward pass and refuses further use afterwards.

use thiserror::Error;

use super::tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("tape already consumed by a backward pass")]
    TapeConsumed,
    #[error("backward root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("{op}: input shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
}

/// Handle to a node on a specific tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(super) usize);

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Relu(usize),
    Tanh(usize),
    Exp(usize),
    Clamp {
        a: usize,
        lo: f64,
        hi: f64,
    },
    /// Elementwise minimum; ties route the gradient to the first input.
    MinElem(usize, usize),
    MatMul {
        a: usize,
        b: usize,
        m: usize,
        k: usize,
        n: usize,
    },
    /// `a: [rows, cols]` plus a `[cols]` bias added to every row.
    AddRow {
        a: usize,
        bias: usize,
        rows: usize,
        cols: usize,
    },
    Conv2d {
        input: usize,
        weights: usize,
        bias: usize,
        batch: usize,
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        h_out: usize,
        w_out: usize,
    },
    LogSoftmax {
        a: usize,
        rows: usize,
        cols: usize,
    },
    /// Pick one column per row: `out[r] = a[r, indices[r]]`.
    GatherCol {
        a: usize,
        cols: usize,
        indices: Vec<usize>,
    },
    RowSum {
        a: usize,
        rows: usize,
        cols: usize,
    },
    Mean(usize),
    Reshape(usize),
}

struct Node {
    op: Op,
    value: Tensor,
    needs_grad: bool,
}

/// Recorded computation graph for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient of the root with respect to this node, if it was tracked.
    pub fn get(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Output tensor of a node.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn guard(&self) {
        assert!(!self.consumed, "tape already consumed by a backward pass");
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Record an input tensor. Gradients are tracked only for leaves with
    /// `requires_grad` (parameters) and everything computed from them.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.guard();
        self.push(Op::Leaf, value, requires_grad)
    }

    /// Constant input: no gradient tracking.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.leaf(value, false)
    }

    fn binary_same_shape(&self, op_name: &'static str, a: NodeId, b: NodeId) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
        self.guard();
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(
            va.shape(),
            vb.shape(),
            "{op_name}: shapes {:?} and {:?} differ",
            va.shape(),
            vb.shape()
        );
        (
            va.shape().to_vec(),
            va.values().to_vec(),
            vb.values().to_vec(),
        )
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (shape, va, vb) = self.binary_same_shape("add", a, b);
        let out: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x + y).collect();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Add(a.0, b.0), Tensor::new(shape, out), ng)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (shape, va, vb) = self.binary_same_shape("sub", a, b);
        let out: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x - y).collect();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Sub(a.0, b.0), Tensor::new(shape, out), ng)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (shape, va, vb) = self.binary_same_shape("mul", a, b);
        let out: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x * y).collect();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::Mul(a.0, b.0), Tensor::new(shape, out), ng)
    }

    pub fn min_elem(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (shape, va, vb) = self.binary_same_shape("min_elem", a, b);
        let out: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| x.min(*y)).collect();
        let ng = self.needs(a) || self.needs(b);
        self.push(Op::MinElem(a.0, b.0), Tensor::new(shape, out), ng)
    }

    fn unary<F: Fn(f64) -> f64>(&mut self, op: Op, a: NodeId, f: F) -> NodeId {
        self.guard();
        let va = self.value(a);
        let out = Tensor::new(va.shape().to_vec(), va.iter().map(|&x| f(x)).collect());
        let ng = self.needs(a);
        self.push(op, out, ng)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Neg(a.0), a, |x| -x)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.unary(Op::Scale(a.0, c), a, |x| c * x)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Relu(a.0), a, |x| x.max(0.0))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Tanh(a.0), a, f64::tanh)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Exp(a.0), a, f64::exp)
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        assert!(lo <= hi, "clamp: lo {lo} > hi {hi}");
        self.unary(Op::Clamp { a: a.0, lo, hi }, a, |x| x.clamp(lo, hi))
    }

    /// `[m, k] × [k, n] → [m, n]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.guard();
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        assert!(
            sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0],
            "matmul: incompatible shapes {sa:?} × {sb:?}"
        );
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let va = self.value(a).values().to_vec();
        let vb = self.value(b).values().to_vec();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let aip = va[i * k + p];
                if aip == 0.0 {
                    continue;
                }
                let brow = &vb[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        let ng = self.needs(a) || self.needs(b);
        self.push(
            Op::MatMul { a: a.0, b: b.0, m, k, n },
            Tensor::new(vec![m, n], out),
            ng,
        )
    }

    /// Add a `[cols]` bias to every row of a `[rows, cols]` matrix.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        self.guard();
        let (sa, sb) = (self.value(a).shape(), self.value(bias).shape());
        assert!(
            sa.len() == 2 && sb == [sa[1]],
            "add_row: shapes {sa:?} and {sb:?} incompatible"
        );
        let (rows, cols) = (sa[0], sa[1]);
        let va = self.value(a).values();
        let vb = self.value(bias).values();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                out.push(va[r * cols + c] + vb[c]);
            }
        }
        let ng = self.needs(a) || self.needs(bias);
        self.push(
            Op::AddRow { a: a.0, bias: bias.0, rows, cols },
            Tensor::new(vec![rows, cols], out),
            ng,
        )
    }

    /// Valid (no-padding) 2-D convolution with a square kernel.
    /// `input: [batch, c_in, h, w]`, `weights: [c_out, c_in, k, k]`,
    /// `bias: [c_out]` → `[batch, c_out, h_out, w_out]`.
    pub fn conv2d(&mut self, input: NodeId, weights: NodeId, bias: NodeId, stride: usize) -> NodeId {
        self.guard();
        assert!(stride >= 1, "conv2d: stride must be at least 1");
        let si = self.value(input).shape().to_vec();
        let sw = self.value(weights).shape().to_vec();
        let sb = self.value(bias).shape().to_vec();
        assert!(
            si.len() == 4 && sw.len() == 4 && sw[1] == si[1] && sb == [sw[0]],
            "conv2d: incompatible shapes input {si:?}, weights {sw:?}, bias {sb:?}"
        );
        let (batch, c_in, h, w) = (si[0], si[1], si[2], si[3]);
        let (c_out, kernel) = (sw[0], sw[2]);
        assert_eq!(sw[2], sw[3], "conv2d: kernel must be square, got {sw:?}");
        assert!(
            h >= kernel && w >= kernel,
            "conv2d: kernel {kernel} larger than input {h}×{w}"
        );
        let h_out = (h - kernel) / stride + 1;
        let w_out = (w - kernel) / stride + 1;

        let vi = self.value(input).values().to_vec();
        let vw = self.value(weights).values().to_vec();
        let vb = self.value(bias).values().to_vec();
        let mut out = vec![0.0; batch * c_out * h_out * w_out];
        for b in 0..batch {
            for oc in 0..c_out {
                for oy in 0..h_out {
                    for ox in 0..w_out {
                        let mut acc = vb[oc];
                        for ic in 0..c_in {
                            let in_base = ((b * c_in + ic) * h + oy * stride) * w + ox * stride;
                            let w_base = ((oc * c_in + ic) * kernel) * kernel;
                            for ky in 0..kernel {
                                let irow = in_base + ky * w;
                                let wrow = w_base + ky * kernel;
                                for kx in 0..kernel {
                                    acc += vi[irow + kx] * vw[wrow + kx];
                                }
                            }
                        }
                        out[((b * c_out + oc) * h_out + oy) * w_out + ox] = acc;
                    }
                }
            }
        }
        let ng = self.needs(input) || self.needs(weights) || self.needs(bias);
        self.push(
            Op::Conv2d {
                input: input.0,
                weights: weights.0,
                bias: bias.0,
                batch,
                c_in,
                h,
                w,
                c_out,
                kernel,
                stride,
                h_out,
                w_out,
            },
            Tensor::new(vec![batch, c_out, h_out, w_out], out),
            ng,
        )
    }

    /// Row-wise log-softmax of a `[rows, cols]` matrix.
    pub fn log_softmax(&mut self, a: NodeId) -> NodeId {
        self.guard();
        let sa = self.value(a).shape().to_vec();
        assert_eq!(sa.len(), 2, "log_softmax: expected matrix, got {sa:?}");
        let (rows, cols) = (sa[0], sa[1]);
        let va = self.value(a).values();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let row = &va[r * cols..(r + 1) * cols];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
            out.extend(row.iter().map(|&x| x - log_sum));
        }
        let ng = self.needs(a);
        self.push(
            Op::LogSoftmax { a: a.0, rows, cols },
            Tensor::new(vec![rows, cols], out),
            ng,
        )
    }

    /// `out[r] = a[r, indices[r]]` for a `[rows, cols]` matrix → `[rows]`.
    pub fn gather_col(&mut self, a: NodeId, indices: &[usize]) -> NodeId {
        self.guard();
        let sa = self.value(a).shape().to_vec();
        assert_eq!(sa.len(), 2, "gather_col: expected matrix, got {sa:?}");
        let (rows, cols) = (sa[0], sa[1]);
        assert_eq!(indices.len(), rows, "gather_col: one index per row");
        assert!(
            indices.iter().all(|&i| i < cols),
            "gather_col: index out of range for {cols} columns"
        );
        let va = self.value(a).values();
        let out: Vec<f64> = indices
            .iter()
            .enumerate()
            .map(|(r, &c)| va[r * cols + c])
            .collect();
        let ng = self.needs(a);
        self.push(
            Op::GatherCol {
                a: a.0,
                cols,
                indices: indices.to_vec(),
            },
            Tensor::vector(out),
            ng,
        )
    }

    /// Sum each row of a `[rows, cols]` matrix → `[rows]`.
    pub fn row_sum(&mut self, a: NodeId) -> NodeId {
        self.guard();
        let sa = self.value(a).shape().to_vec();
        assert_eq!(sa.len(), 2, "row_sum: expected matrix, got {sa:?}");
        let (rows, cols) = (sa[0], sa[1]);
        let va = self.value(a).values();
        let out: Vec<f64> = (0..rows)
            .map(|r| va[r * cols..(r + 1) * cols].iter().sum())
            .collect();
        let ng = self.needs(a);
        self.push(Op::RowSum { a: a.0, rows, cols }, Tensor::vector(out), ng)
    }

    /// Mean of all elements → scalar.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        self.guard();
        let va = self.value(a);
        assert!(!va.is_empty(), "mean of an empty tensor");
        let m = va.iter().sum::<f64>() / va.len() as f64;
        let ng = self.needs(a);
        self.push(Op::Mean(a.0), Tensor::scalar(m), ng)
    }

    /// Same data under a new shape.
    pub fn reshape(&mut self, a: NodeId, shape: Vec<usize>) -> NodeId {
        self.guard();
        let va = self.value(a).clone().reshaped(shape);
        let ng = self.needs(a);
        self.push(Op::Reshape(a.0), va, ng)
    }

    /// Run the reverse pass from a scalar root (seed gradient 1), consuming
    /// the tape. Returns the gradient of the root with respect to every
    /// gradient-tracked leaf.
    pub fn backward(&mut self, root: NodeId) -> Result<Gradients, NnError> {
        if !self.consumed && self.value(root).len() != 1 {
            return Err(NnError::NonScalarRoot(self.value(root).shape().to_vec()));
        }
        let seed = Tensor::scalar(1.0);
        self.backward_with_grad(root, &seed)
    }

    /// Reverse pass with an explicit seed gradient of the root's shape.
    pub fn backward_with_grad(&mut self, root: NodeId, seed: &Tensor) -> Result<Gradients, NnError> {
        if self.consumed {
            return Err(NnError::TapeConsumed);
        }
        let root_shape = self.value(root).shape();
        if seed.shape() != root_shape {
            return Err(NnError::ShapeMismatch {
                op: "backward",
                detail: format!(
                    "seed shape {:?} does not match root shape {root_shape:?}",
                    seed.shape()
                ),
            });
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(seed.values().to_vec());

        for id in (0..=root.0).rev() {
            if !self.nodes[id].needs_grad {
                grads[id] = None;
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            // Split so we can read this node while writing parent grads.
            let (before, rest) = self.nodes.split_at(id);
            let node = &rest[0];
            let acc = |pid: usize, grads: &mut Vec<Option<Vec<f64>>>, f: &mut dyn FnMut(&mut [f64])| {
                if !before[pid].needs_grad {
                    return;
                }
                let slot = grads[pid]
                    .get_or_insert_with(|| vec![0.0; before[pid].value.len()]);
                f(slot);
            };
            match &node.op {
                Op::Leaf => {
                    // Keep the accumulated gradient for the caller.
                    grads[id] = Some(g);
                }
                Op::Add(a, b) => {
                    acc(*a, &mut grads, &mut |d| {
                        for (dv, gv) in d.iter_mut().zip(&g) {
                            *dv += gv;
                        }
                    });
                    acc(*b, &mut grads, &mut |d| {
                        for (dv, gv) in d.iter_mut().zip(&g) {
                            *dv += gv;
                        }
                    });
                }
                Op::Sub(a, b) => {
                    acc(*a, &mut grads, &mut |d| {
                        for (dv, gv) in d.iter_mut().zip(&g) {
                            *dv += gv;
                        }
                    });
                    acc(*b, &mut grads, &mut |d| {
                        for (dv, gv) in d.iter_mut().zip(&g) {
                            *dv -= gv;
                        }
                    });
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (before[*a].value.values(), before[*b].value.values());
                    acc(*a, &mut grads, &mut |d| {
                        for ((dv, gv), bv) in d.iter_mut().zip(&g).zip(vb) {
                            *dv += gv * bv;
                        }
                    });
                    acc(*b, &mut grads, &mut |d| {
                        for ((dv, gv), av) in d.iter_mut().zip(&g).zip(va) {
                            *dv += gv * av;
                        }
                    });
                }
                Op::Neg(a) => {
                    acc(*a, &mut grads, &mut |d| {
                        for (dv, gv) in d.iter_mut().zip(&g) {
                            *dv -= gv;
                        }
                    });
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    acc(*a, &mut grads, &mut |d| {
                        for (dv, gv) in d.iter_mut().zip(&g) {
                            *dv += c * gv;
                        }
                    });
                }
                Op::Relu(a) => {
                    let va = before[*a].value.values();
                    acc(*a, &mut grads, &mut |d| {
                        for ((dv, gv), xv) in d.iter_mut().zip(&g).zip(va) {
                            if *xv > 0.0 {
                                *dv += gv;
                            }
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.values();
                    acc(*a, &mut grads, &mut |d| {
                        for ((dv, gv), yv) in d.iter_mut().zip(&g).zip(y) {
                            *dv += gv * (1.0 - yv * yv);
                        }
                    });
                }
                Op::Exp(a) => {
                    let y = node.value.values();
                    acc(*a, &mut grads, &mut |d| {
                        for ((dv, gv), yv) in d.iter_mut().zip(&g).zip(y) {
                            *dv += gv * yv;
                        }
                    });
                }
                Op::Clamp { a, lo, hi } => {
                    let (lo, hi) = (*lo, *hi);
                    let va = before[*a].value.values();
                    acc(*a, &mut grads, &mut |d| {
                        for ((dv, gv), xv) in d.iter_mut().zip(&g).zip(va) {
                            if *xv > lo && *xv < hi {
                                *dv += gv;
                            }
                        }
                    });
                }
                Op::MinElem(a, b) => {
                    let (va, vb) = (before[*a].value.values(), before[*b].value.values());
                    acc(*a, &mut grads, &mut |d| {
                        for (i, (dv, gv)) in d.iter_mut().zip(&g).enumerate() {
                            if va[i] <= vb[i] {
                                *dv += gv;
                            }
                        }
                    });
                    acc(*b, &mut grads, &mut |d| {
                        for (i, (dv, gv)) in d.iter_mut().zip(&g).enumerate() {
                            if va[i] > vb[i] {
                                *dv += gv;
                            }
                        }
                    });
                }
                Op::MatMul { a, b, m, k, n } => {
                    let (m, k, n) = (*m, *k, *n);
                    let (va, vb) = (before[*a].value.values(), before[*b].value.values());
                    // dA = g · Bᵀ
                    acc(*a, &mut grads, &mut |d| {
                        for i in 0..m {
                            for p in 0..k {
                                let mut s = 0.0;
                                for j in 0..n {
                                    s += g[i * n + j] * vb[p * n + j];
                                }
                                d[i * k + p] += s;
                            }
                        }
                    });
                    // dB = Aᵀ · g
                    acc(*b, &mut grads, &mut |d| {
                        for p in 0..k {
                            for i in 0..m {
                                let aip = va[i * k + p];
                                if aip == 0.0 {
                                    continue;
                                }
                                for j in 0..n {
                                    d[p * n + j] += aip * g[i * n + j];
                                }
                            }
                        }
                    });
                }
                Op::AddRow { a, bias, rows, cols } => {
                    let (rows, cols) = (*rows, *cols);
                    acc(*a, &mut grads, &mut |d| {
                        for (dv, gv) in d.iter_mut().zip(&g) {
                            *dv += gv;
                        }
                    });
                    acc(*bias, &mut grads, &mut |d| {
                        for r in 0..rows {
                            for c in 0..cols {
                                d[c] += g[r * cols + c];
                            }
                        }
                    });
                }
                Op::Conv2d {
                    input,
                    weights,
                    bias,
                    batch,
                    c_in,
                    h,
                    w,
                    c_out,
                    kernel,
                    stride,
                    h_out,
                    w_out,
                } => {
                    let (batch, c_in, h, w) = (*batch, *c_in, *h, *w);
                    let (c_out, kernel, stride) = (*c_out, *kernel, *stride);
                    let (h_out, w_out) = (*h_out, *w_out);
                    let vi = before[*input].value.values();
                    let vw = before[*weights].value.values();
                    acc(*input, &mut grads, &mut |d| {
                        for b in 0..batch {
                            for oc in 0..c_out {
                                for oy in 0..h_out {
                                    for ox in 0..w_out {
                                        let gv = g[((b * c_out + oc) * h_out + oy) * w_out + ox];
                                        for ic in 0..c_in {
                                            let in_base =
                                                ((b * c_in + ic) * h + oy * stride) * w + ox * stride;
                                            let w_base = ((oc * c_in + ic) * kernel) * kernel;
                                            for ky in 0..kernel {
                                                for kx in 0..kernel {
                                                    d[in_base + ky * w + kx] +=
                                                        gv * vw[w_base + ky * kernel + kx];
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    });
                    acc(*weights, &mut grads, &mut |d| {
                        for b in 0..batch {
                            for oc in 0..c_out {
                                for oy in 0..h_out {
                                    for ox in 0..w_out {
                                        let gv = g[((b * c_out + oc) * h_out + oy) * w_out + ox];
                                        for ic in 0..c_in {
                                            let in_base =
                                                ((b * c_in + ic) * h + oy * stride) * w + ox * stride;
                                            let w_base = ((oc * c_in + ic) * kernel) * kernel;
                                            for ky in 0..kernel {
                                                for kx in 0..kernel {
                                                    d[w_base + ky * kernel + kx] +=
                                                        gv * vi[in_base + ky * w + kx];
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    });
                    acc(*bias, &mut grads, &mut |d| {
                        for b in 0..batch {
                            for oc in 0..c_out {
                                for oy in 0..h_out {
                                    for ox in 0..w_out {
                                        d[oc] += g[((b * c_out + oc) * h_out + oy) * w_out + ox];
                                    }
                                }
                            }
                        }
                    });
                }
                Op::LogSoftmax { a, rows, cols } => {
                    let (rows, cols) = (*rows, *cols);
                    let y = node.value.values();
                    acc(*a, &mut grads, &mut |d| {
                        for r in 0..rows {
                            let row = r * cols;
                            let gsum: f64 = g[row..row + cols].iter().sum();
                            for c in 0..cols {
                                d[row + c] += g[row + c] - y[row + c].exp() * gsum;
                            }
                        }
                    });
                }
                Op::GatherCol { a, cols, indices } => {
                    let cols = *cols;
                    acc(*a, &mut grads, &mut |d| {
                        for (r, &c) in indices.iter().enumerate() {
                            d[r * cols + c] += g[r];
                        }
                    });
                }
                Op::RowSum { a, rows, cols } => {
                    let (rows, cols) = (*rows, *cols);
                    acc(*a, &mut grads, &mut |d| {
                        for r in 0..rows {
                            for c in 0..cols {
                                d[r * cols + c] += g[r];
                            }
                        }
                    });
                }
                Op::Mean(a) => {
                    let n = before[*a].value.len() as f64;
                    acc(*a, &mut grads, &mut |d| {
                        let gv = g[0] / n;
                        for dv in d.iter_mut() {
                            *dv += gv;
                        }
                    });
                }
                Op::Reshape(a) => {
                    acc(*a, &mut grads, &mut |d| {
                        for (dv, gv) in d.iter_mut().zip(&g) {
                            *dv += gv;
                        }
                    });
                }
            }
        }
        Ok(Gradients { grads })
    }
}
