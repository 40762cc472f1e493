//! Attention message passing over the tripartite graph.
//!
//! [`message_pass`] is one attention-weighted aggregation from context rows
//! into query rows. For head `k`, with `h_i` a query row and `h_j` one of its
//! context neighbours:
//!
//! ```text
//! z_ij  = LeakyReLU(W_z [W_q h_i ‖ W_k h_j])
//! β_ij  = softmax over j ∈ N(i) of z_ij
//! out_i = h_i + ‖_k tanh(Σ_j β_ij W_v h_j)
//! ```
//!
//! `W_z` is stored as its two halves (`z_query`, `z_key`) so the score is
//! computed per node and then combined per edge instead of concatenating per
//! edge. Scores are shifted per query before the softmax (see
//! [`Tape::attention_scores`]). A query row without neighbours gets a zero
//! message and passes through unchanged.
//!
//! [`fgat_layer`] runs five message passes that follow the two post
//! interaction flows, post↔word↔post and post↔word↔category↔word↔post.
//! [`vanilla_gat_layer`] is the homogeneous baseline over all nodes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::TripartiteGraph;
use crate::nn::{Mat, NodeId, ParamStore, Tape};

/// The five message-passing call sites of a flow GAT layer.
pub const FGAT_SITES: [&str; 5] = ["w_from_p", "p_from_w", "c_from_w", "w_from_c", "p_from_wc"];

/// Which post-interaction flows a flow GAT layer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flows {
    /// post ↔ word ↔ post
    pub shared_word: bool,
    /// post ↔ word ↔ category ↔ word ↔ post
    pub shared_category: bool,
}

impl Flows {
    pub const BOTH: Flows = Flows {
        shared_word: true,
        shared_category: true,
    };
    pub const NONE: Flows = Flows {
        shared_word: false,
        shared_category: false,
    };
    pub const WORD_ONLY: Flows = Flows {
        shared_word: true,
        shared_category: false,
    };
    pub const CATEGORY_ONLY: Flows = Flows {
        shared_word: false,
        shared_category: true,
    };
}

impl Default for Flows {
    fn default() -> Self {
        Flows::BOTH
    }
}

impl std::str::FromStr for Flows {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Flows::BOTH),
            "f1" => Ok(Flows::WORD_ONLY),
            "f2" => Ok(Flows::CATEGORY_ONLY),
            "none" => Ok(Flows::NONE),
            other => Err(Error::Config(format!("flows must be both|f1|f2|none, got `{other}`"))),
        }
    }
}

/// Parameter names of one message-passing site (one `MP` instance).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MpParams {
    prefix: String,
    heads: usize,
}

impl MpParams {
    pub fn new(prefix: impl Into<String>, heads: usize) -> Self {
        Self {
            prefix: prefix.into(),
            heads,
        }
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    /// `(query, key, value, z_query, z_key)` parameter names for head `k`.
    pub fn head_names(&self, k: usize) -> [String; 5] {
        let p = &self.prefix;
        ["w_query", "w_key", "w_value", "z_query", "z_key"].map(|n| format!("{p}.h{k}.{n}"))
    }

    /// Glorot init: projections are `d × d/K`; the score vector is drawn as
    /// one `2·(d/K) × 1` matrix and split into its query and key halves.
    pub fn init<R: Rng>(&self, store: &mut ParamStore, d: usize, rng: &mut R) -> Result<()> {
        check_heads(d, self.heads)?;
        let dk = d / self.heads;
        for k in 0..self.heads {
            let [q, key, v, zq, zk] = self.head_names(k);
            store.insert(q, Mat::glorot(d, dk, rng));
            store.insert(key, Mat::glorot(d, dk, rng));
            store.insert(v, Mat::glorot(d, dk, rng));
            let z = Mat::glorot(2 * dk, 1, rng).into_vec();
            store.insert(zq, Mat::from_vec(dk, 1, z[..dk].to_vec()));
            store.insert(zk, Mat::from_vec(dk, 1, z[dk..].to_vec()));
        }
        Ok(())
    }

    /// Learnable scalars in one site: `K · (3·d·(d/K) + 2·(d/K))`.
    pub fn num_values(d: usize, heads: usize) -> usize {
        let dk = d / heads;
        heads * (3 * d * dk + 2 * dk)
    }
}

fn check_heads(d: usize, heads: usize) -> Result<()> {
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(Error::Config(format!("heads ({heads}) must divide width ({d})")));
    }
    Ok(())
}

/// Output of one message pass, plus the per-head attention columns
/// (`E × 1`, aligned with the edge list) for inspection.
#[derive(Debug, Clone)]
pub struct MpOutput {
    pub out: NodeId,
    pub attention: Vec<NodeId>,
}

/// One multi-head attention aggregation from `ctx` rows into `query` rows
/// along `edges`, given as `(query_row, ctx_row)` pairs.
pub fn message_pass(
    tape: &mut Tape,
    query: NodeId,
    ctx: NodeId,
    edges: &[(usize, usize)],
    store: &ParamStore,
    params: &MpParams,
) -> Result<MpOutput> {
    let (a_rows, d) = tape.value(query).shape();
    let (b_rows, d_ctx) = tape.value(ctx).shape();
    if d != d_ctx {
        return Err(Error::Shape {
            context: format!("message_pass {}", params.prefix),
            detail: format!("query width {d} != context width {d_ctx}"),
        });
    }
    check_heads(d, params.heads)?;
    for &(a, b) in edges {
        if a >= a_rows || b >= b_rows {
            return Err(Error::EdgeOutOfRange {
                a,
                b,
                rows_a: a_rows,
                rows_b: b_rows,
            });
        }
    }
    let src: Vec<usize> = edges.iter().map(|e| e.0).collect();
    let dst: Vec<usize> = edges.iter().map(|e| e.1).collect();

    let mut head_out = Vec::with_capacity(params.heads);
    let mut attention = Vec::with_capacity(params.heads);
    for k in 0..params.heads {
        let [wq, wk, wv, zq, zk] = params.head_names(k);
        let (wq, wk, wv) = (
            tape.param(store, &wq)?,
            tape.param(store, &wk)?,
            tape.param(store, &wv)?,
        );
        let (zq, zk) = (tape.param(store, &zq)?, tape.param(store, &zk)?);

        let q = tape.matmul(query, wq);
        let key = tape.matmul(ctx, wk);
        let val = tape.matmul(ctx, wv);
        let score_q = tape.matmul(q, zq);
        let score_k = tape.matmul(key, zk);
        let z = tape.attention_scores(score_q, score_k, &src, &dst);
        let beta = tape.edge_softmax(z, &src, a_rows);
        let neighbours = tape.gather_rows(val, &dst);
        let weighted = tape.scale_rows(neighbours, beta);
        let summed = tape.scatter_add_rows(weighted, &src, a_rows);
        head_out.push(tape.tanh(summed));
        attention.push(beta);
    }
    let message = tape.concat_cols(&head_out);
    let out = tape.add(query, message);
    Ok(MpOutput { out, attention })
}

/// Hidden states of the three parties as tape nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateNodes {
    pub posts: NodeId,
    pub words: NodeId,
    pub cats: NodeId,
}

/// Hidden states of the three parties as plain matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStates {
    pub posts: Mat,
    pub words: Mat,
    pub cats: Mat,
}

impl NodeStates {
    pub fn to_tape(&self, tape: &mut Tape) -> StateNodes {
        StateNodes {
            posts: tape.constant(self.posts.clone()),
            words: tape.constant(self.words.clone()),
            cats: tape.constant(self.cats.clone()),
        }
    }

    pub fn from_tape(tape: &Tape, s: StateNodes) -> Self {
        Self {
            posts: tape.value(s.posts).clone(),
            words: tape.value(s.words).clone(),
            cats: tape.value(s.cats).clone(),
        }
    }

    /// Rows stacked as `[posts; words; cats]`.
    pub fn flatten(&self) -> Mat {
        let d = self.posts.cols();
        let mut data = Vec::new();
        for m in [&self.posts, &self.words, &self.cats] {
            data.extend_from_slice(m.data());
        }
        Mat::from_vec(self.posts.rows() + self.words.rows() + self.cats.rows(), d, data)
    }
}

/// Parameter layout of one flow GAT layer: one [`MpParams`] per call site,
/// or a single shared one when `tied`.
#[derive(Debug, Clone)]
pub struct FgatParams {
    sites: [MpParams; 5],
}

impl FgatParams {
    pub fn new(layer_prefix: &str, heads: usize, tied: bool) -> Self {
        let sites = FGAT_SITES.map(|site| {
            let prefix = if tied {
                format!("{layer_prefix}.shared")
            } else {
                format!("{layer_prefix}.{site}")
            };
            MpParams::new(prefix, heads)
        });
        Self { sites }
    }

    pub fn site(&self, i: usize) -> &MpParams {
        &self.sites[i]
    }

    pub fn init<R: Rng>(&self, store: &mut ParamStore, d: usize, rng: &mut R) -> Result<()> {
        for (i, site) in self.sites.iter().enumerate() {
            if self.sites[..i].contains(site) {
                continue;
            }
            site.init(store, d, rng)?;
        }
        Ok(())
    }
}

/// One flow GAT layer.
///
/// ```text
/// Ĥw      = MP(Hw, Hp)        over word–post edges
/// Hp_wp   = MP(Hp, Ĥw)
/// Hc_wp   = MP(Hc, Ĥw)        over word–category edges
/// Hw_cwp  = MP(Ĥw, Hc_wp)
/// Hp_wcwp = MP(Hp, Hw_cwp)
/// Hp' = mean(Hp_wp, Hp_wcwp)   Hw' = mean(Ĥw, Hw_cwp)   Hc' = Hc_wp
/// ```
///
/// Without the category flow the layer returns `(Hp_wp, Ĥw, Hc)`. Without the
/// shared-word flow `Hp_wp` is not computed and `Hp' = Hp_wcwp`.
pub fn fgat_layer(
    tape: &mut Tape,
    states: StateNodes,
    g: &TripartiteGraph,
    store: &ParamStore,
    params: &FgatParams,
    flows: Flows,
) -> Result<StateNodes> {
    let d = tape.value(states.posts).cols();
    for (name, node, rows) in [
        ("posts", states.posts, g.r()),
        ("words", states.words, g.m()),
        ("categories", states.cats, g.n()),
    ] {
        let shape = tape.value(node).shape();
        if shape != (rows, d) {
            return Err(Error::Shape {
                context: "fgat_layer".into(),
                detail: format!("{name} state is {shape:?}, graph needs ({rows}, {d})"),
            });
        }
    }
    if !flows.shared_word && !flows.shared_category {
        return Ok(states);
    }

    let pw = g.pw_edges();
    let words_hat = message_pass(tape, states.words, states.posts, &g.wp_edges, store, params.site(0))?.out;
    let posts_wp = if flows.shared_word {
        Some(message_pass(tape, states.posts, words_hat, &pw, store, params.site(1))?.out)
    } else {
        None
    };
    if !flows.shared_category {
        return Ok(StateNodes {
            posts: posts_wp.expect("shared-word flow is on"),
            words: words_hat,
            cats: states.cats,
        });
    }

    let cw = g.cw_edges();
    let cats_wp = message_pass(tape, states.cats, words_hat, &cw, store, params.site(2))?.out;
    let words_cwp = message_pass(tape, words_hat, cats_wp, &g.wc_edges, store, params.site(3))?.out;
    let posts_wcwp = message_pass(tape, states.posts, words_cwp, &pw, store, params.site(4))?.out;

    let posts = match posts_wp {
        Some(p) => mean2(tape, p, posts_wcwp),
        None => posts_wcwp,
    };
    let words = mean2(tape, words_hat, words_cwp);
    Ok(StateNodes {
        posts,
        words,
        cats: cats_wp,
    })
}

fn mean2(tape: &mut Tape, a: NodeId, b: NodeId) -> NodeId {
    let s = tape.add(a, b);
    tape.scale(s, 0.5)
}

/// Runs one flow GAT layer on plain matrices.
pub fn fgat_forward(
    states: &NodeStates,
    g: &TripartiteGraph,
    store: &ParamStore,
    params: &FgatParams,
    flows: Flows,
) -> Result<NodeStates> {
    let mut tape = Tape::new();
    let s = states.to_tape(&mut tape);
    let out = fgat_layer(&mut tape, s, g, store, params, flows)?;
    Ok(NodeStates::from_tape(&tape, out))
}

/// Parameter layouts for `layers` stacked vanilla GAT layers.
pub fn vanilla_params(layers: usize, heads: usize) -> Vec<MpParams> {
    (0..layers)
        .map(|l| MpParams::new(format!("vanilla{l}"), heads))
        .collect()
}

/// One homogeneous GAT layer over the flattened node set. `edges` must hold
/// both directions of every undirected edge.
pub fn vanilla_gat_layer(
    tape: &mut Tape,
    flat: NodeId,
    edges: &[(usize, usize)],
    store: &ParamStore,
    params: &MpParams,
) -> Result<NodeId> {
    Ok(message_pass(tape, flat, flat, edges, store, params)?.out)
}

/// Stacks vanilla GAT layers over the flattened `[posts; words; cats]` rows.
pub fn vanilla_gat(
    tape: &mut Tape,
    flat: NodeId,
    g: &TripartiteGraph,
    store: &ParamStore,
    layers: &[MpParams],
) -> Result<NodeId> {
    let edges = g.symmetric_edges();
    layers
        .iter()
        .try_fold(flat, |h, p| vanilla_gat_layer(tape, h, &edges, store, p))
}
