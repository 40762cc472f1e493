//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Every primitive evaluates eagerly, appends a node to the tape, and bumps
//! two counters: floating-point operations and activation values produced.
//! Leaves (constants and parameters) are not counted as activations. The
//! FLOP convention is:
//!
//! | primitive            | FLOPs                              |
//! |----------------------|------------------------------------|
//! | matmul `n×k · k×m`   | `2·n·k·m` (one multiply-add = 2)   |
//! | add, scale, mul_const, leaky_relu, sum_all, row_mean | 1 per input element |
//! | tanh                 | 4 per element                      |
//! | softmax (row / edge) | 10 per unmasked entry: subtract max 1, exp 4, sum 1, divide 4 |
//! | attention_scores     | 5 per edge: group max 1, add 1, subtract 1, shifted leaky ReLU 2 |
//! | scale_rows, scatter_add_rows | 1 per element of the `E×c` input |
//! | weighted_sum of k mats | `2·k` per output element         |
//! | neg_log_pick         | 4 per picked entry                 |
//! | gather_rows, concat  | 0                                  |
//!
//! The cost model in [`crate::cost`] uses the same table, and tests check
//! the two agree exactly.

use std::collections::{BTreeMap, HashMap};

use super::{Mat, ParamStore};
use crate::error::{Error, Result};

/// Negative slope of the leaky ReLU used in attention scores.
pub const LEAKY_SLOPE: f64 = 0.2;
/// Probabilities are clamped here before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

pub const FLOPS_TANH: u64 = 4;
pub const FLOPS_SOFTMAX: u64 = 10;
pub const FLOPS_LOG: u64 = 4;
pub const FLOPS_ATTENTION_SCORE: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Scale(NodeId, f64),
    MulConst(NodeId, Mat),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    RowMean(NodeId),
    SumAll(NodeId),
    LeakyRelu(NodeId),
    Tanh(NodeId),
    RowSoftmax(NodeId, Option<Vec<bool>>),
    GatherRows(NodeId, Vec<usize>),
    ScatterAddRows(NodeId, Vec<usize>),
    EdgeSoftmax(NodeId, Vec<usize>, usize),
    AttentionScores {
        query: NodeId,
        key: NodeId,
        src: Vec<usize>,
        dst: Vec<usize>,
        refs: Vec<usize>,
    },
    ScaleRows(NodeId, NodeId),
    WeightedSum(Vec<NodeId>, NodeId),
    NegLogPick(NodeId, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    value: Mat,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, NodeId>,
    flops: u64,
    activations: u64,
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

    /// Floating-point operations executed so far.
    pub fn flops(&self) -> u64 {
        self.flops
    }

    /// Number of activation values (op outputs) recorded so far.
    pub fn activation_values(&self) -> u64 {
        self.activations
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id.0].value
    }

    pub fn constant(&mut self, value: Mat) -> NodeId {
        self.nodes.push(Node { value, op: Op::Leaf });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf for a named parameter. Repeated calls with the same name return
    /// the same node, so tied parameters accumulate one gradient.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<NodeId> {
        if let Some(&id) = self.params.get(name) {
            return Ok(id);
        }
        let value = store.get(name)?.clone();
        let id = self.constant(value);
        self.params.insert(name.to_string(), id);
        Ok(id)
    }

    /// Node id of a parameter already placed on the tape.
    pub fn param_node(&self, name: &str) -> Option<NodeId> {
        self.params.get(name).copied()
    }

    fn push(&mut self, value: Mat, op: Op, flops: u64) -> NodeId {
        self.flops += flops;
        self.activations += value.len() as u64;
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        let flops = 2 * (va.rows() * va.cols() * vb.cols()) as u64;
        let out = va.matmul(vb);
        self.push(out, Op::MatMul(a, b), flops)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let flops = out.len() as u64;
        self.push(out, Op::Add(a, b), flops)
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let out = self.value(a).map(|x| x * s);
        let flops = out.len() as u64;
        self.push(out, Op::Scale(a, s), flops)
    }

    /// Elementwise product with a constant matrix (dropout masks).
    pub fn mul_const(&mut self, a: NodeId, m: Mat) -> NodeId {
        let out = self.value(a).zip_map(&m, |x, y| x * y);
        let flops = out.len() as u64;
        self.push(out, Op::MulConst(a, m), flops)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Mat::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let v = self.value(p);
                assert_eq!(v.rows(), rows, "concat_cols row mismatch");
                out.row_mut(r)[off..off + v.cols()].copy_from_slice(v.row(r));
                off += v.cols();
            }
        }
        self.push(out, Op::ConcatCols(parts.to_vec()), 0)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.cols(), cols, "concat_rows col mismatch");
            data.extend_from_slice(v.data());
            rows += v.rows();
        }
        self.push(Mat::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()), 0)
    }

    /// Mean over rows, giving a `1 × cols` matrix.
    pub fn row_mean(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let mut out = Mat::zeros(1, v.cols());
        if v.rows() > 0 {
            for r in 0..v.rows() {
                for (o, x) in out.data_mut().iter_mut().zip(v.row(r)) {
                    *o += x;
                }
            }
            out.scale_assign(1.0 / v.rows() as f64);
        }
        let flops = v.len() as u64;
        self.push(out, Op::RowMean(a), flops)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let flops = v.len() as u64;
        let out = Mat::scalar(v.sum());
        self.push(out, Op::SumAll(a), flops)
    }

    pub fn leaky_relu(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(leaky);
        let flops = out.len() as u64;
        self.push(out, Op::LeakyRelu(a), flops)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(f64::tanh);
        let flops = FLOPS_TANH * out.len() as u64;
        self.push(out, Op::Tanh(a), flops)
    }

    /// Row-wise softmax. With a mask, only entries flagged `true` take part;
    /// masked entries are zero and a fully masked row is all zeros.
    pub fn row_softmax(&mut self, a: NodeId, mask: Option<Vec<bool>>) -> NodeId {
        let v = self.value(a);
        if let Some(m) = &mask {
            assert_eq!(m.len(), v.len(), "row_softmax mask size");
        }
        let mut out = Mat::zeros(v.rows(), v.cols());
        let mut active = 0u64;
        for r in 0..v.rows() {
            let keep = |c: usize| mask.as_ref().is_none_or(|m| m[r * v.cols() + c]);
            let cols: Vec<usize> = (0..v.cols()).filter(|&c| keep(c)).collect();
            active += cols.len() as u64;
            let vals: Vec<f64> = cols.iter().map(|&c| v.get(r, c)).collect();
            for (c, p) in cols.iter().zip(softmax(&vals)) {
                out.set(r, *c, p);
            }
        }
        self.push(out, Op::RowSoftmax(a, mask), FLOPS_SOFTMAX * active)
    }

    pub fn gather_rows(&mut self, a: NodeId, idx: &[usize]) -> NodeId {
        let out = self.value(a).gather_rows(idx);
        self.push(out, Op::GatherRows(a, idx.to_vec()), 0)
    }

    /// Sums input row `e` into output row `idx[e]`.
    pub fn scatter_add_rows(&mut self, a: NodeId, idx: &[usize], rows: usize) -> NodeId {
        let v = self.value(a);
        assert_eq!(v.rows(), idx.len(), "scatter_add_rows index length");
        let flops = v.len() as u64;
        let out = v.scatter_add_rows(idx, rows);
        self.push(out, Op::ScatterAddRows(a, idx.to_vec()), flops)
    }

    /// Softmax of an `E × 1` score column within groups: entries `e` with
    /// the same `segment[e]` are normalized together. This is a masked row
    /// softmax stored sparsely, one entry per edge.
    pub fn edge_softmax(&mut self, scores: NodeId, segment: &[usize], segments: usize) -> NodeId {
        let v = self.value(scores);
        assert_eq!(v.cols(), 1, "edge_softmax expects a column");
        assert_eq!(v.rows(), segment.len(), "edge_softmax segment length");
        let mut max = vec![f64::NEG_INFINITY; segments];
        for (e, &s) in segment.iter().enumerate() {
            max[s] = max[s].max(v.data()[e]);
        }
        let ex: Vec<f64> = segment
            .iter()
            .enumerate()
            .map(|(e, &s)| (v.data()[e] - max[s]).exp())
            .collect();
        let mut sum = vec![0.0; segments];
        for (e, &s) in segment.iter().enumerate() {
            sum[s] += ex[e];
        }
        let out: Vec<f64> = segment.iter().enumerate().map(|(e, &s)| ex[e] / sum[s]).collect();
        let flops = FLOPS_SOFTMAX * segment.len() as u64;
        self.push(
            Mat::from_vec(segment.len(), 1, out),
            Op::EdgeSoftmax(scores, segment.to_vec(), segments),
            flops,
        )
    }

    /// Per-edge attention logits `LeakyReLU(query[src[e]] + key[dst[e]])`,
    /// shifted within each source group by the logit of the group's
    /// highest-scoring key. The shift leaves a following [`Self::edge_softmax`]
    /// unchanged, and when a whole group lies on one side of the LeakyReLU
    /// kink the result does not depend on `query` at all, bit for bit.
    ///
    /// With `u = query[i] + key[ref]` and `t = key[j] − key[ref] ≤ 0`, the
    /// output is `leaky(u + t) − leaky(u)`. `query` is `A × 1`, `key` is
    /// `B × 1`, and the output is `E × 1`.
    pub fn attention_scores(&mut self, query: NodeId, key: NodeId, src: &[usize], dst: &[usize]) -> NodeId {
        let (vq, vk) = (self.value(query), self.value(key));
        assert_eq!(vq.cols(), 1, "attention_scores query column");
        assert_eq!(vk.cols(), 1, "attention_scores key column");
        assert_eq!(src.len(), dst.len(), "attention_scores edge lists");
        let mut best: Vec<Option<usize>> = vec![None; vq.rows()];
        for (&i, &j) in src.iter().zip(dst) {
            let slot = &mut best[i];
            if slot.is_none_or(|b| vk.data()[j] > vk.data()[b]) {
                *slot = Some(j);
            }
        }
        let refs: Vec<usize> = src.iter().map(|&i| best[i].expect("group has an edge")).collect();
        let out: Vec<f64> = (0..src.len())
            .map(|e| {
                let (u, t) = score_parts(vq.data(), vk.data(), src[e], dst[e], refs[e]);
                shifted_leaky(u, t)
            })
            .collect();
        let flops = FLOPS_ATTENTION_SCORE * src.len() as u64;
        self.push(
            Mat::from_vec(src.len(), 1, out),
            Op::AttentionScores {
                query,
                key,
                src: src.to_vec(),
                dst: dst.to_vec(),
                refs,
            },
            flops,
        )
    }

    /// Multiplies row `e` of `x` by the scalar `w[e]` (`w` is `E × 1`).
    pub fn scale_rows(&mut self, x: NodeId, w: NodeId) -> NodeId {
        let (vx, vw) = (self.value(x), self.value(w));
        assert_eq!(vw.shape(), (vx.rows(), 1), "scale_rows weight shape");
        let mut out = vx.clone();
        for r in 0..vx.rows() {
            let s = vw.data()[r];
            out.row_mut(r).iter_mut().for_each(|v| *v *= s);
        }
        let flops = out.len() as u64;
        self.push(out, Op::ScaleRows(x, w), flops)
    }

    /// `Σ_j w[j] · mats[j]` with `w` a `1 × k` row.
    pub fn weighted_sum(&mut self, mats: &[NodeId], w: NodeId) -> NodeId {
        let vw = self.value(w);
        assert_eq!(vw.shape(), (1, mats.len()), "weighted_sum weight shape");
        let (rows, cols) = self.value(mats[0]).shape();
        let mut out = Mat::zeros(rows, cols);
        for (j, &m) in mats.iter().enumerate() {
            let s = vw.data()[j];
            let vm = self.value(m);
            assert_eq!(vm.shape(), (rows, cols), "weighted_sum operand shape");
            for (o, x) in out.data_mut().iter_mut().zip(vm.data()) {
                *o += s * x;
            }
        }
        let flops = 2 * (mats.len() * rows * cols) as u64;
        self.push(out, Op::WeightedSum(mats.to_vec(), w), flops)
    }

    /// `Σ_t −ln max(p[t, labels[t]], PROB_CLAMP)` as a `1 × 1` node.
    pub fn neg_log_pick(&mut self, p: NodeId, labels: &[usize]) -> NodeId {
        let v = self.value(p);
        assert_eq!(v.rows(), labels.len(), "neg_log_pick label count");
        let loss: f64 = labels
            .iter()
            .enumerate()
            .map(|(t, &l)| -v.get(t, l).max(PROB_CLAMP).ln())
            .sum();
        let flops = FLOPS_LOG * labels.len() as u64;
        self.push(Mat::scalar(loss), Op::NegLogPick(p, labels.to_vec()), flops)
    }

    /// Reverse pass from a `1 × 1` node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != (1, 1) {
            return Err(Error::NonScalarLoss {
                rows: lv.rows(),
                cols: lv.cols(),
            });
        }
        let mut adj: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Mat::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let val = &node.value;
            match &node.op {
                Op::Leaf => {
                    adj[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    acc(&mut adj, *a, ga);
                    acc(&mut adj, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, g.clone());
                    acc(&mut adj, *b, g);
                }
                Op::Scale(a, s) => acc(&mut adj, *a, g.map(|x| x * s)),
                Op::MulConst(a, m) => acc(&mut adj, *a, g.zip_map(m, |x, y| x * y)),
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let pc = self.value(p).cols();
                        let mut gp = Mat::zeros(g.rows(), pc);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[off..off + pc]);
                        }
                        off += pc;
                        acc(&mut adj, p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let (pr, pc) = self.value(p).shape();
                        let gp = Mat::from_vec(pr, pc, g.data()[off * pc..(off + pr) * pc].to_vec());
                        off += pr;
                        acc(&mut adj, p, gp);
                    }
                }
                Op::RowMean(a) => {
                    let rows = self.value(*a).rows();
                    let mut ga = Mat::zeros(rows, g.cols());
                    let inv = 1.0 / rows.max(1) as f64;
                    for r in 0..rows {
                        for (o, x) in ga.row_mut(r).iter_mut().zip(g.data()) {
                            *o = x * inv;
                        }
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::SumAll(a) => {
                    let (r, c) = self.value(*a).shape();
                    acc(&mut adj, *a, Mat::filled(r, c, g.data()[0]));
                }
                Op::LeakyRelu(a) => {
                    let ga = self
                        .value(*a)
                        .zip_map(&g, |x, gy| if x > 0.0 { gy } else { LEAKY_SLOPE * gy });
                    acc(&mut adj, *a, ga);
                }
                Op::Tanh(a) => acc(&mut adj, *a, val.zip_map(&g, |y, gy| gy * (1.0 - y * y))),
                Op::RowSoftmax(a, mask) => {
                    let mut ga = Mat::zeros(val.rows(), val.cols());
                    for r in 0..val.rows() {
                        let keep = |c: usize| mask.as_ref().is_none_or(|m| m[r * val.cols() + c]);
                        let s: f64 = (0..val.cols())
                            .filter(|&c| keep(c))
                            .map(|c| val.get(r, c) * g.get(r, c))
                            .sum();
                        for c in (0..val.cols()).filter(|&c| keep(c)) {
                            ga.set(r, c, val.get(r, c) * (g.get(r, c) - s));
                        }
                    }
                    acc(&mut adj, *a, ga);
                }
                Op::GatherRows(a, idx) => {
                    let rows = self.value(*a).rows();
                    acc(&mut adj, *a, g.scatter_add_rows(idx, rows));
                }
                Op::ScatterAddRows(a, idx) => acc(&mut adj, *a, g.gather_rows(idx)),
                Op::EdgeSoftmax(a, seg, n) => {
                    let y = val.data();
                    let mut s = vec![0.0; *n];
                    for (e, &k) in seg.iter().enumerate() {
                        s[k] += y[e] * g.data()[e];
                    }
                    let ga: Vec<f64> = seg
                        .iter()
                        .enumerate()
                        .map(|(e, &k)| y[e] * (g.data()[e] - s[k]))
                        .collect();
                    acc(&mut adj, *a, Mat::from_vec(seg.len(), 1, ga));
                }
                Op::AttentionScores {
                    query,
                    key,
                    src,
                    dst,
                    refs,
                } => {
                    let (vq, vk) = (self.value(*query), self.value(*key));
                    let mut gq = Mat::zeros(vq.rows(), 1);
                    let mut gk = Mat::zeros(vk.rows(), 1);
                    for e in 0..src.len() {
                        let (u, t) = score_parts(vq.data(), vk.data(), src[e], dst[e], refs[e]);
                        let dt = leaky_slope_at(u + t);
                        let du = dt - leaky_slope_at(u);
                        let ge = g.data()[e];
                        gq.data_mut()[src[e]] += ge * du;
                        gk.data_mut()[refs[e]] += ge * (du - dt);
                        gk.data_mut()[dst[e]] += ge * dt;
                    }
                    acc(&mut adj, *query, gq);
                    acc(&mut adj, *key, gk);
                }
                Op::ScaleRows(x, w) => {
                    let (vx, vw) = (self.value(*x), self.value(*w));
                    let mut gx = g.clone();
                    let mut gw = Mat::zeros(vx.rows(), 1);
                    for r in 0..vx.rows() {
                        let s = vw.data()[r];
                        gx.row_mut(r).iter_mut().for_each(|v| *v *= s);
                        gw.data_mut()[r] = super::mat::dot(g.row(r), vx.row(r));
                    }
                    acc(&mut adj, *x, gx);
                    acc(&mut adj, *w, gw);
                }
                Op::WeightedSum(mats, w) => {
                    let vw = self.value(*w);
                    let mut gw = Mat::zeros(1, mats.len());
                    for (j, &m) in mats.iter().enumerate() {
                        let s = vw.data()[j];
                        gw.data_mut()[j] = super::mat::dot(g.data(), self.value(m).data());
                        acc(&mut adj, m, g.map(|x| x * s));
                    }
                    acc(&mut adj, *w, gw);
                }
                Op::NegLogPick(p, labels) => {
                    let vp = self.value(*p);
                    let mut gp = Mat::zeros(vp.rows(), vp.cols());
                    for (t, &l) in labels.iter().enumerate() {
                        let x = vp.get(t, l);
                        if x > PROB_CLAMP {
                            gp.set(t, l, -g.data()[0] / x);
                        }
                    }
                    acc(&mut adj, *p, gp);
                }
            }
        }
        Ok(Gradients { adj })
    }
}

fn acc(adj: &mut [Option<Mat>], id: NodeId, g: Mat) {
    match &mut adj[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn leaky_slope_at(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

fn score_parts(q: &[f64], k: &[f64], i: usize, j: usize, r: usize) -> (f64, f64) {
    (q[i] + k[r], k[j] - k[r])
}

/// `leaky(u + t) − leaky(u)`, exact in the two one-sided cases.
fn shifted_leaky(u: f64, t: f64) -> f64 {
    let s = u + t;
    match (u > 0.0, s > 0.0) {
        (true, true) => t,
        (false, false) => LEAKY_SLOPE * t,
        _ => leaky(s) - leaky(u),
    }
}

/// Numerically stable softmax; empty input gives empty output.
pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = ex.iter().sum();
    ex.into_iter().map(|e| e / sum).collect()
}

/// Adjoints of a reverse pass. Only leaves keep their adjoint.
#[derive(Debug)]
pub struct Gradients {
    adj: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Mat> {
        self.adj.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient for every parameter in `store`; parameters that never reached
    /// the loss get zeros of matching shape.
    pub fn for_params(&self, tape: &Tape, store: &ParamStore) -> BTreeMap<String, Mat> {
        store
            .iter()
            .map(|(name, value)| {
                let g = tape
                    .param_node(name)
                    .and_then(|id| self.get(id))
                    .cloned()
                    .unwrap_or_else(|| Mat::zeros(value.rows(), value.cols()));
                (name.to_string(), g)
            })
            .collect()
    }
}
