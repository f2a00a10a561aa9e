//! Define-by-run reverse-mode differentiation over small dense vectors.
//!
//! Values live in one flat arena that is reused across samples, so a tape in
//! steady state performs no allocation. Weight matrices are referenced by
//! [`ParamId`] and their gradients are written straight into a [`Grads`]
//! buffer with the same flat layout as the parameters.

use super::params::{Grads, ParamId, ParamSet};

pub const PROB_EPS: f64 = 1e-7;

/// Handle to one tape node. Carries the output range for cheap access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    id: u32,
    off: u32,
    len: u32,
}

impl Var {
    pub fn len(self) -> usize {
        self.len as usize
    }

    pub fn is_scalar(self) -> bool {
        self.len == 1
    }
}

/// Parameter handles and dimensions for the fused GRU step op.
#[derive(Debug, Clone, Copy)]
pub struct GruStepSpec {
    pub wz: ParamId,
    pub uz: ParamId,
    pub bz: ParamId,
    pub wr: ParamId,
    pub ur: ParamId,
    pub br: ParamId,
    pub wh: ParamId,
    pub uh: ParamId,
    pub bh: ParamId,
    pub input_dim: u32,
    pub hidden_dim: u32,
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Input,
    Param(ParamId),
    EmbedRow { table: ParamId, row: u32 },
    MatVec { w: ParamId, x: Var },
    GruStep { spec: GruStepSpec, x: Var, h: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    OneMinus(Var),
    Ln(Var),
    Exp(Var),
    Concat { parts: (u32, u32) },
    Softmax(Var),
    Dot(Var, Var),
    WeightedSum { weights: Var, states: (u32, u32) },
    Mean(Var),
    Prod(Var),
    MaxReduce(Var),
    WeightedBce { p: Var, y: f64, w: f64 },
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    off: u32,
    len: u32,
}

/// Gradient tape. Create once per worker and [`Tape::reset`] between samples.
pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    vals: Vec<f64>,
    grad: Vec<f64>,
    parts: Vec<Var>,
    param_nodes: Vec<u32>,
    scratch: Vec<f64>,
}

/// Dot product with four independent accumulators so the reduction does not
/// serialize on floating-point latency. The summation order is fixed, which
/// keeps results bit-reproducible.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i + 4 <= n {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut s = (s0 + s1) + (s2 + s3);
    while i < n {
        s += a[i] * b[i];
        i += 1;
    }
    s
}

#[inline]
fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(out.len(), x.len());
    for (o, v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            vals: Vec::new(),
            grad: Vec::new(),
            parts: Vec::new(),
            param_nodes: vec![u32::MAX; params.tensor_count()],
            scratch: Vec::new(),
        }
    }

    pub fn params(&self) -> &ParamSet {
        self.params
    }

    /// Clear the tape for the next sample, keeping buffer capacity.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.vals.clear();
        self.parts.clear();
        self.param_nodes.fill(u32::MAX);
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.vals[v.off as usize..(v.off + v.len) as usize]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        assert!(v.is_scalar(), "expected scalar node");
        self.vals[v.off as usize]
    }

    fn push(&mut self, op: Op, len: usize) -> Var {
        let off = self.vals.len() as u32;
        self.vals.resize(self.vals.len() + len, 0.0);
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            op,
            off,
            len: len as u32,
        });
        Var {
            id,
            off,
            len: len as u32,
        }
    }

    fn out_mut(&mut self, v: Var) -> &mut [f64] {
        &mut self.vals[v.off as usize..(v.off + v.len) as usize]
    }

    // -- leaves ------------------------------------------------------------

    pub fn input(&mut self, values: &[f64]) -> Var {
        let v = self.push(Op::Input, values.len());
        self.out_mut(v).copy_from_slice(values);
        v
    }

    pub fn scalar_input(&mut self, value: f64) -> Var {
        self.input(&[value])
    }

    pub fn zeros(&mut self, len: usize) -> Var {
        self.push(Op::Input, len)
    }

    /// Leaf for a (vector-shaped) parameter tensor; memoized per tape.
    pub fn param(&mut self, id: ParamId) -> Var {
        let cached = self.param_nodes[id.0 as usize];
        if cached != u32::MAX {
            let node = self.nodes[cached as usize];
            return Var {
                id: cached,
                off: node.off,
                len: node.len,
            };
        }
        let len = self.params.spec(id).len;
        let v = self.push(Op::Param(id), len);
        let values = self.params.values(id);
        self.vals[v.off as usize..(v.off + v.len) as usize].copy_from_slice(values);
        self.param_nodes[id.0 as usize] = v.id;
        v
    }

    /// One row of an embedding table parameter.
    pub fn embed_row(&mut self, table: ParamId, row: usize) -> Var {
        let spec = self.params.spec(table);
        assert_eq!(spec.shape.len(), 2, "embedding table must be 2-d");
        assert!(row < spec.rows(), "embedding row out of range");
        let cols = spec.cols();
        let v = self.push(
            Op::EmbedRow {
                table,
                row: row as u32,
            },
            cols,
        );
        let values = &self.params.values(table)[row * cols..(row + 1) * cols];
        self.vals[v.off as usize..(v.off + v.len) as usize].copy_from_slice(values);
        v
    }

    // -- ops ---------------------------------------------------------------

    /// `W x` for a 2-d parameter `w` of shape `[rows, cols]`.
    pub fn matvec(&mut self, w: ParamId, x: Var) -> Var {
        let spec = self.params.spec(w);
        assert_eq!(spec.shape.len(), 2, "matvec weight must be 2-d");
        let (rows, cols) = (spec.rows(), spec.cols());
        assert_eq!(cols, x.len(), "matvec shape mismatch for `{}`", spec.name);
        let v = self.push(Op::MatVec { w, x }, rows);
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let xs = &pre[x.off as usize..(x.off + x.len) as usize];
        let weights = self.params.values(w);
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&weights[i * cols..(i + 1) * cols], xs);
        }
        v
    }

    /// Fused GRU step: `z = sigma(Wz x + Uz h + bz)`, `r = sigma(Wr x + Ur h
    /// + br)`, `hc = tanh(Wh x + Uh (r*h) + bh)`, `h' = (1-z)h + z hc`.
    ///
    /// One node stores `[h', z, r, hc]`; the returned [`Var`] views the `h'`
    /// prefix. Fusing the step keeps the per-step node count constant, which
    /// dominates training throughput.
    pub fn gru_step(&mut self, spec: GruStepSpec, x: Var, h: Var) -> Var {
        let (n_in, n_h) = (spec.input_dim as usize, spec.hidden_dim as usize);
        assert_eq!(x.len(), n_in, "gru input dimension mismatch");
        assert_eq!(h.len(), n_h, "gru hidden dimension mismatch");
        let v = self.push(Op::GruStep { spec, x, h }, 4 * n_h);

        self.scratch.clear();
        self.scratch.resize(n_h, 0.0);
        let params = self.params;
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let xs = &pre[x.off as usize..(x.off + x.len) as usize];
        let hs = &pre[h.off as usize..(h.off + h.len) as usize];
        let (h_next, rest) = out.split_at_mut(n_h);
        let (z, rest) = rest.split_at_mut(n_h);
        let (r, hc) = rest.split_at_mut(n_h);

        let gate = |w: ParamId, u: ParamId, b: ParamId, hin: &[f64], out: &mut [f64]| {
            let wv = params.values(w);
            let uv = params.values(u);
            let bv = params.values(b);
            for i in 0..n_h {
                out[i] = dot(&wv[i * n_in..(i + 1) * n_in], xs)
                    + dot(&uv[i * n_h..(i + 1) * n_h], hin)
                    + bv[i];
            }
        };

        gate(spec.wz, spec.uz, spec.bz, hs, z);
        for v in z.iter_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        gate(spec.wr, spec.ur, spec.br, hs, r);
        for v in r.iter_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
        for i in 0..n_h {
            self.scratch[i] = r[i] * hs[i];
        }
        gate(spec.wh, spec.uh, spec.bh, &self.scratch, hc);
        for v in hc.iter_mut() {
            *v = v.tanh();
        }
        for i in 0..n_h {
            h_next[i] = (1.0 - z[i]) * hs[i] + z[i] * hc[i];
        }

        Var {
            id: v.id,
            off: v.off,
            len: n_h as u32,
        }
    }

    fn binary(&mut self, op: Op, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Var {
        assert_eq!(a.len, b.len, "shape mismatch in elementwise op");
        let v = self.push(op, a.len());
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let xs = &pre[a.off as usize..(a.off + a.len) as usize];
        let ys = &pre[b.off as usize..(b.off + b.len) as usize];
        for ((o, x), y) in out.iter_mut().zip(xs).zip(ys) {
            *o = f(*x, *y);
        }
        v
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(Op::Add(a, b), a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(Op::Sub(a, b), a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(Op::Mul(a, b), a, b, |x, y| x * y)
    }

    fn unary(&mut self, op: Op, a: Var, f: impl Fn(f64) -> f64) -> Var {
        let v = self.push(op, a.len());
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let xs = &pre[a.off as usize..(a.off + a.len) as usize];
        for (o, x) in out.iter_mut().zip(xs) {
            *o = f(*x);
        }
        v
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(Op::Scale(a, c), a, |x| c * x)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Op::Sigmoid(a), a, |x| 1.0 / (1.0 + (-x).exp()))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Op::Tanh(a), a, f64::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(Op::Relu(a), a, |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.unary(Op::OneMinus(a), a, |x| 1.0 - x)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(Op::Ln(a), a, f64::ln)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(Op::Exp(a), a, f64::exp)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat of zero parts");
        let start = self.parts.len() as u32;
        self.parts.extend_from_slice(parts);
        let end = self.parts.len() as u32;
        let total: usize = parts.iter().map(|p| p.len()).sum();
        let v = self.push(Op::Concat { parts: (start, end) }, total);
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let mut pos = 0;
        for p in parts {
            out[pos..pos + p.len()]
                .copy_from_slice(&pre[p.off as usize..(p.off + p.len) as usize]);
            pos += p.len();
        }
        v
    }

    /// Numerically stable softmax over a 1-d node.
    pub fn softmax(&mut self, a: Var) -> Var {
        let v = self.push(Op::Softmax(a), a.len());
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let xs = &pre[a.off as usize..(a.off + a.len) as usize];
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (o, x) in out.iter_mut().zip(xs) {
            *o = (x - max).exp();
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
        v
    }

    pub fn dot_product(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(a.len, b.len, "dot shape mismatch");
        let v = self.push(Op::Dot(a, b), 1);
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        out[0] = dot(
            &pre[a.off as usize..(a.off + a.len) as usize],
            &pre[b.off as usize..(b.off + b.len) as usize],
        );
        v
    }

    /// `sum_t weights[t] * states[t]`, the pooling step of attention.
    pub fn weighted_sum(&mut self, weights: Var, states: &[Var]) -> Var {
        assert_eq!(weights.len(), states.len(), "one weight per state");
        assert!(!states.is_empty(), "weighted_sum of zero states");
        let dim = states[0].len();
        assert!(states.iter().all(|s| s.len() == dim));
        let start = self.parts.len() as u32;
        self.parts.extend_from_slice(states);
        let end = self.parts.len() as u32;
        let v = self.push(
            Op::WeightedSum {
                weights,
                states: (start, end),
            },
            dim,
        );
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let ws = &pre[weights.off as usize..(weights.off + weights.len) as usize];
        for (t, s) in states.iter().enumerate() {
            axpy(out, ws[t], &pre[s.off as usize..(s.off + s.len) as usize]);
        }
        v
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.push(Op::Mean(a), 1);
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let xs = &pre[a.off as usize..(a.off + a.len) as usize];
        out[0] = xs.iter().sum::<f64>() / xs.len() as f64;
        v
    }

    pub fn prod(&mut self, a: Var) -> Var {
        let v = self.push(Op::Prod(a), 1);
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let xs = &pre[a.off as usize..(a.off + a.len) as usize];
        out[0] = xs.iter().product();
        v
    }

    /// Maximum element; gradient flows to the first argmax.
    pub fn max_reduce(&mut self, a: Var) -> Var {
        let v = self.push(Op::MaxReduce(a), 1);
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let xs = &pre[a.off as usize..(a.off + a.len) as usize];
        out[0] = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        v
    }

    /// Class-weighted binary cross-entropy on a probability node:
    /// `-w*y*ln(p) - (1-y)*ln(1-p)` with `p` clamped to `[eps, 1-eps]`.
    pub fn weighted_bce(&mut self, p: Var, y: bool, w: f64) -> Var {
        assert!(p.is_scalar(), "loss expects a scalar probability");
        let v = self.push(
            Op::WeightedBce {
                p,
                y: if y { 1.0 } else { 0.0 },
                w,
            },
            1,
        );
        let (pre, out) = self.vals.split_at_mut(v.off as usize);
        let prob = pre[p.off as usize].clamp(PROB_EPS, 1.0 - PROB_EPS);
        out[0] = if y {
            -w * prob.ln()
        } else {
            -(1.0 - prob).ln()
        };
        v
    }

    // -- backward ----------------------------------------------------------

    /// Reverse pass from a scalar `loss`, accumulating parameter gradients
    /// into `grads` (`+=`, so batches can share one buffer).
    pub fn backward(&mut self, loss: Var, grads: &mut Grads) {
        assert!(loss.is_scalar(), "backward expects a scalar loss");
        self.grad.clear();
        self.grad.resize(self.vals.len(), 0.0);
        self.grad[loss.off as usize] = 1.0;

        for i in (0..=loss.id as usize).rev() {
            let node = self.nodes[i];
            let out_off = node.off as usize;
            let out_len = node.len as usize;
            let (gpre, grest) = self.grad.split_at_mut(out_off);
            let gout = &grest[..out_len];
            if gout.iter().all(|g| *g == 0.0) {
                continue;
            }
            let vals = &self.vals;
            let val_of = |v: Var| &vals[v.off as usize..(v.off + v.len) as usize];
            let out_vals = &vals[out_off..out_off + out_len];
            match node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let slot = grads.slice_mut(self.params, id);
                    for (g, o) in slot.iter_mut().zip(gout) {
                        *g += o;
                    }
                }
                Op::EmbedRow { table, row } => {
                    let cols = out_len;
                    let slot = grads.slice_mut(self.params, table);
                    let row_slot = &mut slot[row as usize * cols..(row as usize + 1) * cols];
                    for (g, o) in row_slot.iter_mut().zip(gout) {
                        *g += o;
                    }
                }
                Op::MatVec { w, x } => {
                    let cols = x.len();
                    let xs = val_of(x);
                    let weights = self.params.values(w);
                    let gw = grads.slice_mut(self.params, w);
                    let gx = &mut gpre[x.off as usize..(x.off + x.len) as usize];
                    for (i, &g) in gout.iter().enumerate() {
                        if g != 0.0 {
                            axpy(gx, g, &weights[i * cols..(i + 1) * cols]);
                            axpy(&mut gw[i * cols..(i + 1) * cols], g, xs);
                        }
                    }
                }
                Op::GruStep { spec, x, h } => {
                    let (n_in, n_h) = (spec.input_dim as usize, spec.hidden_dim as usize);
                    let xs = val_of(x);
                    let hs = val_of(h);
                    let z = &out_vals[n_h..2 * n_h];
                    let r = &out_vals[2 * n_h..3 * n_h];
                    let hc = &out_vals[3 * n_h..4 * n_h];

                    // Unused grad slots for z/r/hc double as scratch for the
                    // pre-activation gradients.
                    let (gh_next, gscratch) = grest[..4 * n_h].split_at_mut(n_h);
                    let (da_z, gscratch) = gscratch.split_at_mut(n_h);
                    let (da_r, da_h) = gscratch.split_at_mut(n_h);
                    for i in 0..n_h {
                        let g = gh_next[i];
                        // dz, dhc, then pre-activation chain rules
                        da_z[i] = g * (hc[i] - hs[i]) * z[i] * (1.0 - z[i]);
                        da_h[i] = g * z[i] * (1.0 - hc[i] * hc[i]);
                    }
                    // candidate path: d(r*h) = Uh^T da_h
                    {
                        let uh = self.params.values(spec.uh);
                        for i in 0..n_h {
                            da_r[i] = 0.0;
                        }
                        for i in 0..n_h {
                            if da_h[i] != 0.0 {
                                axpy(da_r, da_h[i], &uh[i * n_h..(i + 1) * n_h]);
                            }
                        }
                        // da_r currently holds d(r*h)
                        let gh = &mut gpre[h.off as usize..(h.off + h.len) as usize];
                        for i in 0..n_h {
                            let g = gh_next[i];
                            gh[i] += g * (1.0 - z[i]) + da_r[i] * r[i];
                            da_r[i] = da_r[i] * hs[i] * r[i] * (1.0 - r[i]);
                        }
                    }
                    // accumulate parameter and input gradients per gate
                    let mut gate_back = |da: &[f64],
                                         w: ParamId,
                                         u: ParamId,
                                         b: ParamId,
                                         hin: Option<&[f64]>| {
                        {
                            let gw = grads.slice_mut(self.params, w);
                            let wv = self.params.values(w);
                            let gx = &mut gpre[x.off as usize..(x.off + x.len) as usize];
                            for (i, &g) in da.iter().enumerate() {
                                if g != 0.0 {
                                    axpy(&mut gw[i * n_in..(i + 1) * n_in], g, xs);
                                    axpy(gx, g, &wv[i * n_in..(i + 1) * n_in]);
                                }
                            }
                        }
                        {
                            let gu = grads.slice_mut(self.params, u);
                            let hin_vals = hin.unwrap_or(hs);
                            for (i, &g) in da.iter().enumerate() {
                                if g != 0.0 {
                                    axpy(&mut gu[i * n_h..(i + 1) * n_h], g, hin_vals);
                                }
                            }
                        }
                        if hin.is_none() {
                            // gate reads h directly: dh += U^T da
                            let uv = self.params.values(u);
                            let gh = &mut gpre[h.off as usize..(h.off + h.len) as usize];
                            for (i, &g) in da.iter().enumerate() {
                                if g != 0.0 {
                                    axpy(gh, g, &uv[i * n_h..(i + 1) * n_h]);
                                }
                            }
                        }
                        let gb = grads.slice_mut(self.params, b);
                        for (gbi, d) in gb.iter_mut().zip(da) {
                            *gbi += d;
                        }
                    };

                    // r*h recomputed for the Uh weight gradient
                    let rh: Vec<f64> = r.iter().zip(hs).map(|(rv, hv)| rv * hv).collect();
                    gate_back(da_h, spec.wh, spec.uh, spec.bh, Some(&rh));
                    gate_back(da_r, spec.wr, spec.ur, spec.br, None);
                    gate_back(da_z, spec.wz, spec.uz, spec.bz, None);
                }
                Op::Add(a, b) => {
                    for (g, o) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                    {
                        *g += o;
                    }
                    for (g, o) in gpre[b.off as usize..(b.off + b.len) as usize]
                        .iter_mut()
                        .zip(gout)
                    {
                        *g += o;
                    }
                }
                Op::Sub(a, b) => {
                    for (g, o) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                    {
                        *g += o;
                    }
                    for (g, o) in gpre[b.off as usize..(b.off + b.len) as usize]
                        .iter_mut()
                        .zip(gout)
                    {
                        *g -= o;
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val_of(a), val_of(b));
                    for ((g, o), y) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                        .zip(bv)
                    {
                        *g += o * y;
                    }
                    for ((g, o), x) in gpre[b.off as usize..(b.off + b.len) as usize]
                        .iter_mut()
                        .zip(gout)
                        .zip(av)
                    {
                        *g += o * x;
                    }
                }
                Op::Scale(a, c) => {
                    for (g, o) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                    {
                        *g += c * o;
                    }
                }
                Op::Sigmoid(a) => {
                    for ((g, o), y) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                        .zip(out_vals)
                    {
                        *g += o * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    for ((g, o), y) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                        .zip(out_vals)
                    {
                        *g += o * (1.0 - y * y);
                    }
                }
                Op::Relu(a) => {
                    let xs = val_of(a);
                    for ((g, o), x) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                        .zip(xs)
                    {
                        if *x > 0.0 {
                            *g += o;
                        }
                    }
                }
                Op::OneMinus(a) => {
                    for (g, o) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                    {
                        *g -= o;
                    }
                }
                Op::Ln(a) => {
                    let xs = val_of(a);
                    for ((g, o), x) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                        .zip(xs)
                    {
                        *g += o / x;
                    }
                }
                Op::Exp(a) => {
                    for ((g, o), y) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                        .zip(out_vals)
                    {
                        *g += o * y;
                    }
                }
                Op::Concat { parts } => {
                    let mut pos = 0;
                    for pi in parts.0..parts.1 {
                        let p = self.parts[pi as usize];
                        for (g, o) in gpre[p.off as usize..(p.off + p.len) as usize]
                            .iter_mut()
                            .zip(&gout[pos..pos + p.len()])
                        {
                            *g += o;
                        }
                        pos += p.len();
                    }
                }
                Op::Softmax(a) => {
                    let inner = dot(gout, out_vals);
                    for ((g, o), y) in gpre[a.off as usize..(a.off + a.len) as usize]
                        .iter_mut()
                        .zip(gout)
                        .zip(out_vals)
                    {
                        *g += y * (o - inner);
                    }
                }
                Op::Dot(a, b) => {
                    let g = gout[0];
                    let (av, bv) = (val_of(a), val_of(b));
                    axpy(&mut gpre[a.off as usize..(a.off + a.len) as usize], g, bv);
                    axpy(&mut gpre[b.off as usize..(b.off + b.len) as usize], g, av);
                }
                Op::WeightedSum { weights, states } => {
                    let ws = val_of(weights);
                    for (t, pi) in (states.0..states.1).enumerate() {
                        let s = self.parts[pi as usize];
                        let sv = val_of(s);
                        gpre[weights.off as usize + t] += dot(gout, sv);
                        axpy(
                            &mut gpre[s.off as usize..(s.off + s.len) as usize],
                            ws[t],
                            gout,
                        );
                    }
                }
                Op::Mean(a) => {
                    let g = gout[0] / a.len() as f64;
                    for gx in &mut gpre[a.off as usize..(a.off + a.len) as usize] {
                        *gx += g;
                    }
                }
                Op::Prod(a) => {
                    let xs = val_of(a);
                    let n = xs.len();
                    let g = gout[0];
                    // prefix[i] * suffix[i] = product of all elements but i
                    let mut suffix = vec![1.0; n];
                    for i in (0..n - 1).rev() {
                        suffix[i] = suffix[i + 1] * xs[i + 1];
                    }
                    let mut prefix = 1.0;
                    let ga = &mut gpre[a.off as usize..(a.off + a.len) as usize];
                    for i in 0..n {
                        ga[i] += g * prefix * suffix[i];
                        prefix *= xs[i];
                    }
                }
                Op::MaxReduce(a) => {
                    let xs = val_of(a);
                    let mut arg = 0;
                    for (i, x) in xs.iter().enumerate() {
                        if *x > xs[arg] {
                            arg = i;
                        }
                    }
                    gpre[a.off as usize + arg] += gout[0];
                }
                Op::WeightedBce { p, y, w } => {
                    let prob = val_of(p)[0];
                    if prob > PROB_EPS && prob < 1.0 - PROB_EPS {
                        let d = -w * y / prob + (1.0 - y) / (1.0 - prob);
                        gpre[p.off as usize] += gout[0] * d;
                    }
                }
            }
        }
    }
}
