//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] borrows a [`ParamStore`] and records one forward pass. Model
//! weights enter the tape with [`Tape::param`] and are read in place, never
//! copied. [`Tape::backward`] walks the tape in reverse and returns a
//! [`Gradients`] table; only nodes that depend on a `requires_grad` tensor
//! receive gradient, so frozen branches cost nothing on the way back.
//!
//! Broadcasting follows trailing-dimension alignment: in a binary op the
//! smaller operand's shape must be a suffix of the larger one's, which
//! covers bias-add (`[s, d] + [d]`) and per-row affine maps.

use crate::error::{Error, Result};
use crate::tensor::{matrix_dims, ParamId, ParamStore, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

const LN_EPS: f64 = 1e-5;
const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

enum Value {
    Owned(Vec<f64>),
    Param(ParamId),
}

enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Transpose(Var),
    /// `a + sign * b` with trailing broadcast on either side.
    AddScaled { a: Var, b: Var, sign: f64 },
    Mul(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    ConcatRows(Vec<Var>),
    SliceRows { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    SliceCols { x: Var, start: usize },
    GatherRows { table: Var, ids: Vec<usize> },
    Reshape(Var),
    Sum(Var),
    MeanSquare(Var),
}

struct Node {
    shape: Vec<usize>,
    value: Value,
    op: Op,
    requires_grad: bool,
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<Var>>,
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            param_nodes: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.nodes.push(Node {
            shape,
            value: Value::Owned(data),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// A stored parameter. Repeated calls return the same node, so
    /// gradients from every use accumulate in one place.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        let t = self.store.get(id);
        self.nodes.push(Node {
            shape: t.shape().to_vec(),
            value: Value::Param(id),
            op: Op::Param,
            requires_grad: t.requires_grad(),
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(v);
        v
    }

    /// A free-standing tensor; it receives gradient iff `requires_grad` is set.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, t.requires_grad())
    }

    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<Var> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::dim(
                "constant",
                format!("shape {shape:?} vs {} values", data.len()),
            ));
        }
        Ok(self.push(shape.to_vec(), data, Op::Leaf, false))
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].value {
            Value::Owned(d) => d,
            Value::Param(id) => self.store.get(*id).data(),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        matrix_dims(self.shape(v))
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.shape(v), self.value(v).to_vec()).expect("node shape is consistent")
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    fn rg(&self, vs: &[Var]) -> bool {
        vs.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn two_d(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            s => Err(Error::dim(op, format!("expected a matrix, got shape {s:?}"))),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.two_d("matmul", a)?;
        let (k2, n) = self.two_d("matmul", b)?;
        if k != k2 {
            return Err(Error::dim(
                "matmul",
                format!("{:?} x {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let mut out = vec![0.0; m * n];
        matmul_into(self.value(a), self.value(b), &mut out, m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.two_d("transpose", a)?;
        let x = self.value(a);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = x[i * c + j];
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(vec![c, r], out, Op::Transpose(a), rg))
    }

    fn broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<Vec<usize>> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let (big, small) = if sa.len() >= sb.len() { (sa, sb) } else { (sb, sa) };
        if big.ends_with(small) {
            Ok(big.to_vec())
        } else {
            Err(Error::dim(op, format!("cannot broadcast {sa:?} with {sb:?}")))
        }
    }

    fn add_scaled(&mut self, a: Var, b: Var, sign: f64) -> Result<Var> {
        let shape = self.broadcast("add", a, b)?;
        let (xa, xb) = (self.value(a), self.value(b));
        let n: usize = shape.iter().product();
        let out = broadcast_map(xa, xb, n, |x, y| x + sign * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(shape, out, Op::AddScaled { a, b, sign }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.add_scaled(a, b, 1.0)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.add_scaled(a, b, -1.0)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.broadcast("mul", a, b)?;
        let (xa, xb) = (self.value(a), self.value(b));
        let n: usize = shape.iter().product();
        let out = broadcast_map(xa, xb, n, |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(shape, out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * c).collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), out, Op::Scale(a, c), rg)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self
            .value(a)
            .iter()
            .map(|&x| 0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh()))
            .collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), out, Op::Gelu(a), rg)
    }

    /// Softmax over each row.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        self.softmax_impl(a, false)
    }

    /// Row softmax where row `i` only sees columns `j <= i + (cols - rows)`.
    /// For square score matrices this is the usual causal mask.
    pub fn causal_softmax_rows(&mut self, a: Var) -> Var {
        self.softmax_impl(a, true)
    }

    fn softmax_impl(&mut self, a: Var, causal: bool) -> Var {
        let (r, c) = self.dims(a);
        let x = self.value(a);
        let mut out = vec![0.0; r * c];
        let shift = c.saturating_sub(r);
        for i in 0..r {
            let visible = if causal { (i + shift + 1).min(c) } else { c };
            let row = &x[i * c..i * c + visible];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let o = &mut out[i * c..i * c + visible];
            let mut sum = 0.0;
            for (oj, &xj) in o.iter_mut().zip(row) {
                *oj = (xj - max).exp();
                sum += *oj;
            }
            o.iter_mut().for_each(|v| *v /= sum);
        }
        let rg = self.rg(&[a]);
        // Masked entries are exactly zero, so the backward formula needs no mask.
        self.push(self.shape(a).to_vec(), out, Op::Softmax(a), rg)
    }

    /// Per-row normalization to zero mean / unit variance, then `gain * x + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (r, c) = self.dims(x);
        for (name, v) in [("gain", gain), ("bias", bias)] {
            if self.shape(v) != [c] {
                return Err(Error::dim(
                    "layer_norm",
                    format!("{name} shape {:?}, expected [{c}]", self.shape(v)),
                ));
            }
        }
        let xv = self.value(x);
        let (g, b) = (self.value(gain), self.value(bias));
        let mut xhat = vec![0.0; r * c];
        let mut rstd = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            let rs = 1.0 / (var + LN_EPS).sqrt();
            rstd[i] = rs;
            for j in 0..c {
                let h = (row[j] - mean) * rs;
                xhat[i * c + j] = h;
                out[i * c + j] = g[j] * h + b[j];
            }
        }
        let rg = self.rg(&[x, gain, bias]);
        Ok(self.push(
            self.shape(x).to_vec(),
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            },
            rg,
        ))
    }

    /// Stack matrices vertically. All parts must share the column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Contract("concat_rows of nothing".into()));
        };
        let c = self.two_d("concat_rows", first)?.1;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, pc) = self.two_d("concat_rows", p)?;
            if pc != c {
                return Err(Error::dim(
                    "concat_rows",
                    format!("width {pc} does not match {c}"),
                ));
            }
            rows += r;
            out.extend_from_slice(self.value(p));
        }
        let rg = self.rg(parts);
        Ok(self.push(vec![rows, c], out, Op::ConcatRows(parts.to_vec()), rg))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.two_d("slice_rows", x)?;
        if start + len > r {
            return Err(Error::dim(
                "slice_rows",
                format!("rows {start}..{} out of {r}", start + len),
            ));
        }
        let out = self.value(x)[start * c..(start + len) * c].to_vec();
        let rg = self.rg(&[x]);
        Ok(self.push(vec![len, c], out, Op::SliceRows { x, start }, rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Contract("concat_cols of nothing".into()));
        };
        let r = self.two_d("concat_cols", first)?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (pr, pc) = self.two_d("concat_cols", p)?;
            if pr != r {
                return Err(Error::dim("concat_cols", format!("rows {pr} vs {r}")));
            }
            widths.push(pc);
        }
        let c: usize = widths.iter().sum();
        let mut out = vec![0.0; r * c];
        let mut off = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let x = self.value(p);
            for i in 0..r {
                out[i * c + off..i * c + off + w].copy_from_slice(&x[i * w..(i + 1) * w]);
            }
            off += w;
        }
        let rg = self.rg(parts);
        Ok(self.push(vec![r, c], out, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.two_d("slice_cols", x)?;
        if start + len > c {
            return Err(Error::dim(
                "slice_cols",
                format!("cols {start}..{} out of {c}", start + len),
            ));
        }
        let xv = self.value(x);
        let mut out = Vec::with_capacity(r * len);
        for i in 0..r {
            out.extend_from_slice(&xv[i * c + start..i * c + start + len]);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(vec![r, len], out, Op::SliceCols { x, start }, rg))
    }

    /// Embedding lookup: row `ids[i]` of `table` becomes output row `i`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (r, c) = self.two_d("gather_rows", table)?;
        if let Some(&bad) = ids.iter().find(|&&i| i >= r) {
            return Err(Error::Input(format!("row id {bad} out of range for {r} rows")));
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * c);
        for &i in ids {
            out.extend_from_slice(&tv[i * c..(i + 1) * c]);
        }
        let rg = self.rg(&[table]);
        Ok(self.push(
            vec![ids.len(), c],
            out,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != self.value(x).len() {
            return Err(Error::dim(
                "reshape",
                format!("{:?} -> {shape:?}", self.shape(x)),
            ));
        }
        let out = self.value(x).to_vec();
        let rg = self.rg(&[x]);
        Ok(self.push(shape.to_vec(), out, Op::Reshape(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().sum();
        let rg = self.rg(&[x]);
        self.push(vec![1], vec![s], Op::Sum(x), rg)
    }

    /// Mean of squared entries.
    pub fn mean_square(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64;
        let rg = self.rg(&[x]);
        self.push(vec![1], vec![s], Op::MeanSquare(x), rg)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            param_nodes: self.param_nodes.clone(),
        })
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let nodes = &self.nodes;
        macro_rules! acc {
            ($v:expr) => {
                grad_slot(nodes, grads, $v)
            };
        }
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = matrix_dims(&nodes[a.0].shape);
                let n = matrix_dims(&nodes[b.0].shape).1;
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(ga) = acc!(*a) {
                    // ga += g · bᵀ
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let bp = &bv[p * n..(p + 1) * n];
                            ga[i * k + p] += dot(gi, bp);
                        }
                    }
                }
                if let Some(gb) = acc!(*b) {
                    // gb += aᵀ · g
                    for i in 0..m {
                        let gi = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip != 0.0 {
                                axpy(aip, gi, &mut gb[p * n..(p + 1) * n]);
                            }
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                let (r, c) = matrix_dims(&nodes[a.0].shape);
                if let Some(ga) = acc!(*a) {
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] += g[j * r + i];
                        }
                    }
                }
            }
            Op::AddScaled { a, b, sign } => {
                if let Some(ga) = acc!(*a) {
                    let la = ga.len();
                    g.iter().enumerate().for_each(|(i, gi)| ga[i % la] += gi);
                }
                if let Some(gb) = acc!(*b) {
                    let lb = gb.len();
                    g.iter()
                        .enumerate()
                        .for_each(|(i, gi)| gb[i % lb] += sign * gi);
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (la, lb) = (av.len(), bv.len());
                if a == b {
                    if let Some(ga) = acc!(*a) {
                        g.iter()
                            .enumerate()
                            .for_each(|(i, gi)| ga[i % la] += 2.0 * gi * av[i % la]);
                    }
                } else {
                    if let Some(ga) = acc!(*a) {
                        g.iter()
                            .enumerate()
                            .for_each(|(i, gi)| ga[i % la] += gi * bv[i % lb]);
                    }
                    if let Some(gb) = acc!(*b) {
                        g.iter()
                            .enumerate()
                            .for_each(|(i, gi)| gb[i % lb] += gi * av[i % la]);
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(ga) = acc!(*a) {
                    ga.iter_mut().zip(g).for_each(|(x, gi)| *x += c * gi);
                }
            }
            Op::Gelu(a) => {
                let x = self.value(*a);
                if let Some(ga) = acc!(*a) {
                    for ((gx, &xi), gi) in ga.iter_mut().zip(x).zip(g) {
                        let u = GELU_K * (xi + GELU_C * xi * xi * xi);
                        let t = u.tanh();
                        let du = GELU_K * (1.0 + 3.0 * GELU_C * xi * xi);
                        let d = 0.5 * (1.0 + t) + 0.5 * xi * (1.0 - t * t) * du;
                        *gx += gi * d;
                    }
                }
            }
            Op::Softmax(a) => {
                let (r, c) = matrix_dims(&node.shape);
                let y = self.value(Var(idx));
                if let Some(ga) = acc!(*a) {
                    for i in 0..r {
                        let (yr, gr) = (&y[i * c..(i + 1) * c], &g[i * c..(i + 1) * c]);
                        let s = dot(yr, gr);
                        for j in 0..c {
                            ga[i * c + j] += yr[j] * (gr[j] - s);
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                rstd,
            } => {
                let (r, c) = matrix_dims(&node.shape);
                let gv = self.value(*gain);
                if let Some(gx) = acc!(*x) {
                    let mut dh = vec![0.0; c];
                    for i in 0..r {
                        let h = &xhat[i * c..(i + 1) * c];
                        for j in 0..c {
                            dh[j] = g[i * c + j] * gv[j];
                        }
                        let m1 = dh.iter().sum::<f64>() / c as f64;
                        let m2 = dot(&dh, h) / c as f64;
                        for j in 0..c {
                            gx[i * c + j] += rstd[i] * (dh[j] - m1 - h[j] * m2);
                        }
                    }
                }
                if let Some(gg) = acc!(*gain) {
                    for i in 0..r {
                        for j in 0..c {
                            gg[j] += g[i * c + j] * xhat[i * c + j];
                        }
                    }
                }
                if let Some(gb) = acc!(*bias) {
                    for i in 0..r {
                        for j in 0..c {
                            gb[j] += g[i * c + j];
                        }
                    }
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if let Some(gp) = acc!(p) {
                        axpy(1.0, &g[off..off + len], gp);
                    }
                    off += len;
                }
            }
            Op::SliceRows { x, start } => {
                let c = matrix_dims(&node.shape).1;
                if let Some(gx) = acc!(*x) {
                    axpy(1.0, g, &mut gx[start * c..start * c + g.len()]);
                }
            }
            Op::ConcatCols(parts) => {
                let (r, c) = matrix_dims(&node.shape);
                let mut off = 0;
                for &p in parts {
                    let w = matrix_dims(&nodes[p.0].shape).1;
                    if let Some(gp) = acc!(p) {
                        for i in 0..r {
                            axpy(
                                1.0,
                                &g[i * c + off..i * c + off + w],
                                &mut gp[i * w..(i + 1) * w],
                            );
                        }
                    }
                    off += w;
                }
            }
            Op::SliceCols { x, start } => {
                let (r, w) = matrix_dims(&node.shape);
                let c = matrix_dims(&nodes[x.0].shape).1;
                if let Some(gx) = acc!(*x) {
                    for i in 0..r {
                        axpy(
                            1.0,
                            &g[i * w..(i + 1) * w],
                            &mut gx[i * c + start..i * c + start + w],
                        );
                    }
                }
            }
            Op::GatherRows { table, ids } => {
                let c = matrix_dims(&node.shape).1;
                if let Some(gt) = acc!(*table) {
                    for (i, &id) in ids.iter().enumerate() {
                        axpy(1.0, &g[i * c..(i + 1) * c], &mut gt[id * c..(id + 1) * c]);
                    }
                }
            }
            Op::Reshape(x) => {
                if let Some(gx) = acc!(*x) {
                    axpy(1.0, g, gx);
                }
            }
            Op::Sum(x) => {
                if let Some(gx) = acc!(*x) {
                    gx.iter_mut().for_each(|v| *v += g[0]);
                }
            }
            Op::MeanSquare(x) => {
                let xv = self.value(*x);
                let k = 2.0 * g[0] / xv.len() as f64;
                if let Some(gx) = acc!(*x) {
                    gx.iter_mut().zip(xv).for_each(|(d, &v)| *d += k * v);
                }
            }
        }
    }
}

/// Accumulator for a parent node, allocated on first use; `None` when the
/// parent does not need gradient.
fn grad_slot<'g>(nodes: &[Node], grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
    if !nodes[v.0].requires_grad {
        return None;
    }
    let len = nodes[v.0].shape.iter().product();
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    param_nodes: Vec<Option<Var>>,
}

impl Gradients {
    pub fn of(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    /// Gradient of a stored parameter, `None` if it is frozen or unused.
    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.param_nodes
            .get(id.0)
            .copied()
            .flatten()
            .and_then(|v| self.of(v))
    }

    /// Add every trainable parameter's gradient into its tensor's grad buffer.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for id in store.trainable_ids() {
            if let Some(g) = self.param(id) {
                store.get_mut(id).accumulate_grad(g);
            }
        }
    }
}

/// Elementwise `f` under trailing-suffix broadcasting: each operand's
/// length divides `n`, so the shorter one repeats in whole blocks.
fn broadcast_map(xa: &[f64], xb: &[f64], n: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if xa.len() == n && xb.len() == n {
        out.extend(xa.iter().zip(xb).map(|(&x, &y)| f(x, y)));
    } else if xa.len() == n {
        for chunk in xa.chunks_exact(xb.len()) {
            out.extend(chunk.iter().zip(xb).map(|(&x, &y)| f(x, y)));
        }
    } else if xb.len() == n {
        for chunk in xb.chunks_exact(xa.len()) {
            out.extend(xa.iter().zip(chunk).map(|(&x, &y)| f(x, y)));
        }
    } else {
        let (la, lb) = (xa.len(), xb.len());
        out.extend((0..n).map(|i| f(xa[i % la], xb[i % lb])));
    }
    out
}

/// `out += a · b` for row-major `m × k` and `k × n`. Four rows of `b` are
/// folded in per pass over an output row.
fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    if n == 0 {
        return;
    }
    for (ai, oi) in a.chunks_exact(k.max(1)).take(m).zip(out.chunks_exact_mut(n)) {
        for (c, rows) in ai.chunks_exact(4).zip(b.chunks_exact(4 * n)) {
            let (b0, rest) = rows.split_at(n);
            let (b1, rest) = rest.split_at(n);
            let (b2, b3) = rest.split_at(n);
            let (b3, o) = (&b3[..n], &mut oi[..n]);
            for j in 0..n {
                o[j] += c[0] * b0[j] + c[1] * b1[j] + c[2] * b2[j] + c[3] * b3[j];
            }
        }
        let done = k - k % 4;
        for (p, &aip) in ai.iter().enumerate().skip(done) {
            axpy(aip, &b[p * n..(p + 1) * n], oi);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}
