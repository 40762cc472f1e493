//! Closed-form FLOP and activation-memory counts for flow GAT and a stacked
//! vanilla GAT.
//!
//! Counts follow the tape's convention (see [`crate::nn::Tape`]): one
//! multiply-add is 2 FLOPs, tanh 4, softmax 10 per entry. For one message
//! pass with `A` query rows, `B` context rows, `E` edges, width `d`, `K`
//! heads and `c = d/K`:
//!
//! ```text
//! flops(A,B,E) = K·[2·d·c·(A + 2B) + 2·c·(A + B) + E·(15 + 2c) + 4·A·c] + A·d
//! acts(A,B,E)  = d·(5A + 2B) + 2·E·d + K·(A + B + 2E)
//! ```
//!
//! Activation memory is every forward value retained for the backward pass,
//! at 8 bytes per value. Training memory adds an equally sized adjoint buffer
//! plus four copies of the parameters (value, gradient, two Adam moments).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow_gat::{Flows, MpParams};
use crate::graph::TripartiteGraph;
use crate::nn::{FLOPS_ATTENTION_SCORE, FLOPS_SOFTMAX, FLOPS_TANH};

pub const BYTES_PER_VALUE: u64 = 8;

/// Per-edge FLOPs outside the value aggregation: shifted score, softmax.
pub const EDGE_SCORE_FLOPS: u64 = FLOPS_ATTENTION_SCORE + FLOPS_SOFTMAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GraphShape {
    pub r: u64,
    pub m: u64,
    pub n: u64,
    pub e_wp: u64,
    pub e_wc: u64,
    pub d: u64,
    pub heads: u64,
}

impl GraphShape {
    pub fn of(g: &TripartiteGraph, d: usize, heads: usize) -> Self {
        Self {
            r: g.r() as u64,
            m: g.m() as u64,
            n: g.n() as u64,
            e_wp: g.wp_edges.len() as u64,
            e_wc: g.wc_edges.len() as u64,
            d: d as u64,
            heads: heads as u64,
        }
    }

    /// Shape with `m = max_nodes − r − n` words, `round(r · words_per_post)`
    /// word–post edges and `round(m · cats_per_word)` word–category edges.
    pub fn from_totals(
        r: u64,
        n: u64,
        max_nodes: u64,
        words_per_post: f64,
        cats_per_word: f64,
        d: u64,
        heads: u64,
    ) -> Result<Self> {
        let m = max_nodes
            .checked_sub(r + n)
            .ok_or_else(|| Error::Config(format!("max_nodes {max_nodes} < r + n = {}", r + n)))?;
        if !(words_per_post >= 0.0 && cats_per_word >= 0.0) {
            return Err(Error::Config("edge densities must be non-negative".into()));
        }
        let shape = Self {
            r,
            m,
            n,
            e_wp: (r as f64 * words_per_post).round() as u64,
            e_wc: (m as f64 * cats_per_word).round() as u64,
            d,
            heads,
        };
        shape.validate()?;
        Ok(shape)
    }

    /// 50 posts, 15 categories, 500 nodes, 20.45 dictionary words per post,
    /// one category per word, width 768, 12 heads.
    pub fn full_scale() -> Self {
        Self::from_totals(50, 15, 500, 20.45, 1.0, 768, 12).expect("valid constants")
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || !self.d.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "heads ({}) must divide width ({})",
                self.heads, self.d
            )));
        }
        if self.e_wp > self.r * self.m || self.e_wc > self.m * self.n {
            return Err(Error::Config(format!(
                "edge counts ({}, {}) exceed the complete bipartite bounds ({}, {})",
                self.e_wp,
                self.e_wc,
                self.r * self.m,
                self.m * self.n
            )));
        }
        Ok(())
    }

    pub fn nodes(&self) -> u64 {
        self.r + self.m + self.n
    }
}

/// Cost of one message pass: `a` query rows, `b` context rows, `e` edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MpCost {
    pub flops: u64,
    pub activations: u64,
}

impl std::ops::Add for MpCost {
    type Output = MpCost;
    fn add(self, o: MpCost) -> MpCost {
        MpCost {
            flops: self.flops + o.flops,
            activations: self.activations + o.activations,
        }
    }
}

pub fn count_mp(d: u64, heads: u64, a: u64, b: u64, e: u64) -> MpCost {
    let c = d / heads;
    let per_head = 2 * d * c * (a + 2 * b) + 2 * c * (a + b) + e * (EDGE_SCORE_FLOPS + 2 * c) + FLOPS_TANH * a * c;
    MpCost {
        flops: heads * per_head + a * d,
        activations: d * (5 * a + 2 * b) + 2 * e * d + heads * (a + b + 2 * e),
    }
}

/// Elementwise mean of two `rows × d` matrices: one add, one scale.
fn mean_cost(rows: u64, d: u64) -> MpCost {
    MpCost {
        flops: 2 * rows * d,
        activations: 2 * rows * d,
    }
}

/// Cost of one flow GAT layer under the given flow toggles.
pub fn flow_layer_cost(s: &GraphShape, flows: Flows) -> MpCost {
    let mp = |a, b, e| count_mp(s.d, s.heads, a, b, e);
    if !flows.shared_word && !flows.shared_category {
        return MpCost::default();
    }
    let mut total = mp(s.m, s.r, s.e_wp);
    if flows.shared_word {
        total = total + mp(s.r, s.m, s.e_wp);
    }
    if flows.shared_category {
        total = total + mp(s.n, s.m, s.e_wc) + mp(s.m, s.n, s.e_wc) + mp(s.r, s.m, s.e_wp);
        if flows.shared_word {
            total = total + mean_cost(s.r, s.d);
        }
        total = total + mean_cost(s.m, s.d);
    }
    total
}

/// Cost of one vanilla GAT layer over all nodes and both directions of
/// every edge.
pub fn vanilla_layer_cost(s: &GraphShape) -> MpCost {
    let nodes = s.nodes();
    count_mp(s.d, s.heads, nodes, nodes, 2 * (s.e_wp + s.e_wc))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub variant: String,
    pub layers: u64,
    pub flops: u64,
    /// Bytes of forward activations retained for backward.
    pub peak_mem: u64,
    /// `peak_mem` plus adjoints and parameter/gradient/Adam-moment storage.
    pub train_mem: u64,
    pub params: u64,
}

impl CostReport {
    fn new(variant: &str, layers: u64, per_layer: MpCost, params: u64) -> Self {
        let peak_mem = layers * per_layer.activations * BYTES_PER_VALUE;
        Self {
            variant: variant.to_string(),
            layers,
            flops: layers * per_layer.flops,
            peak_mem,
            train_mem: 2 * peak_mem + 4 * params * BYTES_PER_VALUE,
            params,
        }
    }
}

pub fn flow_report(s: &GraphShape, layers: u64, flows: Flows, tied: bool) -> CostReport {
    let sites = if tied { 1 } else { 5 };
    let per_site = MpParams::num_values(s.d as usize, s.heads as usize) as u64;
    CostReport::new("flow_gat", layers, flow_layer_cost(s, flows), layers * sites * per_site)
}

pub fn vanilla_report(s: &GraphShape, layers: u64) -> CostReport {
    let per_layer = MpParams::num_values(s.d as usize, s.heads as usize) as u64;
    CostReport::new("vanilla_gat", layers, vanilla_layer_cost(s), layers * per_layer)
}

/// Percentage saved by `new` relative to `base`; 0 when `base` is 0.
pub fn reduction_pct(new: u64, base: u64) -> f64 {
    if base == 0 {
        0.0
    } else {
        100.0 * (1.0 - new as f64 / base as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub shape: GraphShape,
    pub flow: CostReport,
    pub vanilla: CostReport,
    pub flops_reduction_pct: f64,
    pub mem_reduction_pct: f64,
    pub train_mem_reduction_pct: f64,
}

pub fn compare(s: &GraphShape, l_flow: u64, l_vanilla: u64) -> Comparison {
    compare_with(s, l_flow, l_vanilla, Flows::BOTH, false)
}

pub fn compare_with(s: &GraphShape, l_flow: u64, l_vanilla: u64, flows: Flows, tied: bool) -> Comparison {
    let flow = flow_report(s, l_flow, flows, tied);
    let vanilla = vanilla_report(s, l_vanilla);
    Comparison {
        shape: *s,
        flops_reduction_pct: reduction_pct(flow.flops, vanilla.flops),
        mem_reduction_pct: reduction_pct(flow.peak_mem, vanilla.peak_mem),
        train_mem_reduction_pct: reduction_pct(flow.train_mem, vanilla.train_mem),
        flow,
        vanilla,
    }
}

impl Comparison {
    /// Fixed-width text table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>6} {:>12} {:>16} {:>14} {:>14}\n",
            "variant", "layers", "params", "flops", "peak_mem_B", "train_mem_B"
        );
        for c in [&self.flow, &self.vanilla] {
            out.push_str(&format!(
                "{:<12} {:>6} {:>12} {:>16} {:>14} {:>14}\n",
                c.variant, c.layers, c.params, c.flops, c.peak_mem, c.train_mem
            ));
        }
        out.push_str(&format!(
            "reduction    flops {:.2}%  peak_mem {:.2}%  train_mem {:.2}%\n",
            self.flops_reduction_pct, self.mem_reduction_pct, self.train_mem_reduction_pct
        ));
        out
    }
}
