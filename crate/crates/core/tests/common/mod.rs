//! Shared helpers for the integration tests: an explicit-loop attention
//! oracle, random graph generation and parameter setup.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trignet::flow_gat::{FgatParams, Flows, MpParams, NodeStates};
use trignet::graph::TripartiteGraph;
use trignet::nn::{Mat, ParamStore, LEAKY_SLOPE};

fn leaky(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

/// One message pass written directly from the attention equations: score
/// every (query, neighbour) pair, normalize over the neighbourhood, average
/// the value projections, squash, concatenate heads and add the residual.
pub fn oracle_message_pass(
    query: &Mat,
    ctx: &Mat,
    edges: &[(usize, usize)],
    store: &ParamStore,
    params: &MpParams,
) -> Mat {
    let d = query.cols();
    let heads = params.heads();
    let c = d / heads;
    let mut out = query.clone();
    for i in 0..query.rows() {
        let neigh: Vec<usize> = edges.iter().filter(|e| e.0 == i).map(|e| e.1).collect();
        if neigh.is_empty() {
            continue;
        }
        for k in 0..heads {
            let [wq, wk, wv, zq, zk] = params.head_names(k).map(|n| store.get(&n).unwrap().clone());
            let project = |h: &[f64], w: &Mat| -> Vec<f64> {
                (0..c).map(|col| (0..d).map(|t| h[t] * w.get(t, col)).sum()).collect()
            };
            let q = project(query.row(i), &wq);
            let q_score: f64 = (0..c).map(|col| zq.get(col, 0) * q[col]).sum();
            let scores: Vec<f64> = neigh
                .iter()
                .map(|&j| {
                    let key = project(ctx.row(j), &wk);
                    let k_score: f64 = (0..c).map(|col| zk.get(col, 0) * key[col]).sum();
                    leaky(q_score + k_score)
                })
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            let mut acc = vec![0.0; c];
            for (n, &j) in neigh.iter().enumerate() {
                let v = project(ctx.row(j), &wv);
                for col in 0..c {
                    acc[col] += exps[n] / total * v[col];
                }
            }
            for col in 0..c {
                let idx = k * c + col;
                out.set(i, idx, query.get(i, idx) + acc[col].tanh());
            }
        }
    }
    out
}

fn flip(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    edges.iter().map(|&(a, b)| (b, a)).collect()
}

fn mean(a: &Mat, b: &Mat) -> Mat {
    a.zip_map(b, |x, y| 0.5 * (x + y))
}

/// One flow GAT layer, following the two flows literally.
pub fn oracle_fgat(
    s: &NodeStates,
    g: &TripartiteGraph,
    store: &ParamStore,
    params: &FgatParams,
    flows: Flows,
) -> NodeStates {
    if !flows.shared_word && !flows.shared_category {
        return s.clone();
    }
    let mp =
        |site: usize, q: &Mat, c: &Mat, e: &[(usize, usize)]| oracle_message_pass(q, c, e, store, params.site(site));
    let words_hat = mp(0, &s.words, &s.posts, &g.wp_edges);
    let posts_wp = mp(1, &s.posts, &words_hat, &flip(&g.wp_edges));
    if !flows.shared_category {
        return NodeStates {
            posts: posts_wp,
            words: words_hat,
            cats: s.cats.clone(),
        };
    }
    let cats_wp = mp(2, &s.cats, &words_hat, &flip(&g.wc_edges));
    let words_cwp = mp(3, &words_hat, &cats_wp, &g.wc_edges);
    let posts_wcwp = mp(4, &s.posts, &words_cwp, &flip(&g.wp_edges));
    NodeStates {
        posts: if flows.shared_word {
            mean(&posts_wp, &posts_wcwp)
        } else {
            posts_wcwp
        },
        words: mean(&words_hat, &words_cwp),
        cats: cats_wp,
    }
}

/// A tripartite graph with `r ∈ 1..=max`, `m, n ∈ 0..=max` and each
/// admissible edge present with probability `density`.
pub fn random_graph<R: Rng>(rng: &mut R, max: usize, density: f64) -> TripartiteGraph {
    let r = rng.gen_range(1..=max);
    let m = rng.gen_range(0..=max);
    let n = rng.gen_range(0..=max);
    let mut wp_edges = Vec::new();
    let mut wc_edges = Vec::new();
    for w in 0..m {
        for p in 0..r {
            if rng.gen_bool(density) {
                wp_edges.push((w, p));
            }
        }
        for c in 0..n {
            if rng.gen_bool(density) {
                wc_edges.push((w, c));
            }
        }
    }
    TripartiteGraph {
        posts: (0..r).map(|i| format!("u:p{i}")).collect(),
        words: (0..m).map(|i| format!("w{i}")).collect(),
        cats: (1..=n as u32).collect(),
        wp_edges,
        wc_edges,
    }
}

pub fn random_states<R: Rng>(g: &TripartiteGraph, d: usize, rng: &mut R) -> NodeStates {
    NodeStates {
        posts: Mat::uniform(g.r(), d, 1.0, rng),
        words: Mat::uniform(g.m(), d, 1.0, rng),
        cats: Mat::uniform(g.n(), d, 1.0, rng),
    }
}

pub fn fgat_setup(d: usize, heads: usize, seed: u64) -> (ParamStore, FgatParams) {
    let mut store = ParamStore::new();
    let params = FgatParams::new("fgat0", heads, false);
    params
        .init(&mut store, d, &mut ChaCha8Rng::seed_from_u64(seed))
        .unwrap();
    (store, params)
}

/// `d ∈ {2, 4, 6, 8}` and `K ∈ {1, 2}`.
pub fn random_width<R: Rng>(rng: &mut R) -> (usize, usize) {
    (2 * rng.gen_range(1..=4), rng.gen_range(1..=2))
}

pub fn max_abs_diff(a: &NodeStates, b: &NodeStates) -> f64 {
    a.posts
        .max_abs_diff(&b.posts)
        .max(a.words.max_abs_diff(&b.words))
        .max(a.cats.max_abs_diff(&b.cats))
}

/// Post pairs `(i, j)`, `i != j`, that share a word.
pub fn share_word(g: &TripartiteGraph, i: usize, j: usize) -> bool {
    (0..g.m()).any(|w| g.wp_edges.contains(&(w, i)) && g.wp_edges.contains(&(w, j)))
}

/// Whether a path post j → word → category → word → post i exists.
pub fn share_category(g: &TripartiteGraph, i: usize, j: usize) -> bool {
    let words_of = |p: usize| -> Vec<usize> { g.wp_edges.iter().filter(|e| e.1 == p).map(|e| e.0).collect() };
    let cats_of = |w: usize| -> Vec<usize> { g.wc_edges.iter().filter(|e| e.0 == w).map(|e| e.1).collect() };
    let reach: Vec<usize> = words_of(j).into_iter().flat_map(cats_of).collect();
    words_of(i).into_iter().flat_map(cats_of).any(|c| reach.contains(&c))
}
