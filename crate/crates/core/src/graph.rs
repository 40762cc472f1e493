//! Per-user tripartite graph: post, word and category nodes, with edges only
//! between words and posts and between words and categories.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::liwc::{CategoryId, CategorySelection, LiwcDictionary};
use crate::text::TokenizedPost;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TripartiteGraph {
    pub posts: Vec<String>,
    /// Unique dictionary words, sorted lexicographically.
    pub words: Vec<String>,
    pub cats: Vec<CategoryId>,
    /// `(word_idx, post_idx)`, sorted.
    pub wp_edges: Vec<(usize, usize)>,
    /// `(word_idx, cat_idx)`, sorted.
    pub wc_edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    pub r: usize,
    pub m: usize,
    pub n: usize,
    pub disconnected_posts: usize,
    pub liwc_words_per_post: f64,
}

/// Limits that shape a graph.
#[derive(Debug, Clone, Copy)]
pub struct GraphLimits {
    pub max_posts: usize,
    pub max_nodes: usize,
}

impl TripartiteGraph {
    pub fn r(&self) -> usize {
        self.posts.len()
    }

    pub fn m(&self) -> usize {
        self.words.len()
    }

    pub fn n(&self) -> usize {
        self.cats.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.r() + self.m() + self.n()
    }

    pub fn stats(&self) -> GraphStats {
        let r = self.r();
        let connected: BTreeSet<usize> = self.wp_edges.iter().map(|&(_, p)| p).collect();
        GraphStats {
            r,
            m: self.m(),
            n: self.n(),
            disconnected_posts: r - connected.len(),
            liwc_words_per_post: if r == 0 {
                0.0
            } else {
                self.wp_edges.len() as f64 / r as f64
            },
        }
    }

    /// Undirected edges of the flattened graph with node order
    /// `[posts, words, categories]`, listed in both directions.
    pub fn symmetric_edges(&self) -> Vec<(usize, usize)> {
        let (r, m) = (self.r(), self.m());
        let mut out = Vec::with_capacity(2 * (self.wp_edges.len() + self.wc_edges.len()));
        for &(w, p) in &self.wp_edges {
            out.push((r + w, p));
            out.push((p, r + w));
        }
        for &(w, c) in &self.wc_edges {
            out.push((r + w, r + m + c));
            out.push((r + m + c, r + w));
        }
        out.sort_unstable();
        out
    }

    /// `wp_edges` flipped to `(post_idx, word_idx)`, sorted.
    pub fn pw_edges(&self) -> Vec<(usize, usize)> {
        flip(&self.wp_edges)
    }

    /// `wc_edges` flipped to `(cat_idx, word_idx)`, sorted.
    pub fn cw_edges(&self) -> Vec<(usize, usize)> {
        flip(&self.wc_edges)
    }
}

fn flip(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out: Vec<_> = edges.iter().map(|&(a, b)| (b, a)).collect();
    out.sort_unstable();
    out
}

/// Builds the tripartite graph for one user's (already scrubbed) posts.
///
/// When `r + m + n` would exceed `limits.max_nodes`, words are dropped in
/// ascending order of their occurrence count across the user's posts, ties
/// broken lexicographically, until the cap holds.
pub fn build_graph(
    post_ids: &[String],
    posts: &[TokenizedPost],
    dict: &LiwcDictionary,
    sel: &CategorySelection,
    limits: GraphLimits,
) -> Result<TripartiteGraph> {
    if posts.is_empty() {
        return Err(Error::EmptyUser);
    }
    if post_ids.len() != posts.len() {
        return Err(Error::Shape {
            context: "build_graph".into(),
            detail: format!("{} ids for {} posts", post_ids.len(), posts.len()),
        });
    }
    if posts.len() > limits.max_posts {
        return Err(Error::TooManyPosts {
            got: posts.len(),
            limit: limits.max_posts,
        });
    }
    let (r, n) = (posts.len(), sel.len());
    if r + n > limits.max_nodes {
        return Err(Error::NodeCapTooSmall {
            cap: limits.max_nodes,
            posts: r,
            cats: n,
        });
    }

    // Token -> (frequency, selected category node indices, posts).
    let mut candidates: BTreeMap<&str, (usize, BTreeSet<usize>, BTreeSet<usize>)> = BTreeMap::new();
    let mut cat_cache: HashMap<&str, BTreeSet<usize>> = HashMap::new();
    for (p, post) in posts.iter().enumerate() {
        for tok in &post.tokens {
            let cats = cat_cache.entry(tok.as_str()).or_insert_with(|| {
                dict.categories_of(tok, sel)
                    .into_iter()
                    .filter_map(|id| sel.index_of(id))
                    .collect()
            });
            if cats.is_empty() {
                continue;
            }
            let entry = candidates
                .entry(tok.as_str())
                .or_insert_with(|| (0, cats.clone(), BTreeSet::new()));
            entry.0 += 1;
            entry.2.insert(p);
        }
    }

    let budget = limits.max_nodes - r - n;
    if candidates.len() > budget {
        let mut order: Vec<(usize, &str)> = candidates.iter().map(|(t, e)| (e.0, *t)).collect();
        order.sort_unstable();
        let excess = candidates.len() - budget;
        for (_, tok) in order.into_iter().take(excess) {
            candidates.remove(tok);
        }
    }

    let mut words = Vec::with_capacity(candidates.len());
    let mut wp_edges = Vec::new();
    let mut wc_edges = Vec::new();
    for (w, (tok, (_, cats, in_posts))) in candidates.into_iter().enumerate() {
        words.push(tok.to_string());
        wp_edges.extend(in_posts.into_iter().map(|p| (w, p)));
        wc_edges.extend(cats.into_iter().map(|c| (w, c)));
    }

    Ok(TripartiteGraph {
        posts: post_ids.to_vec(),
        words,
        cats: sel.resolved.clone(),
        wp_edges,
        wc_edges,
    })
}

/// JSON-friendly view of a graph with category names resolved.
#[derive(Debug, Serialize)]
pub struct GraphExport<'a> {
    pub user: &'a str,
    pub posts: &'a [String],
    pub words: &'a [String],
    pub categories: Vec<ExportCategory>,
    pub wp_edges: &'a [(usize, usize)],
    pub wc_edges: &'a [(usize, usize)],
    pub stats: GraphStats,
}

#[derive(Debug, Serialize)]
pub struct ExportCategory {
    pub id: CategoryId,
    pub name: String,
}

impl<'a> GraphExport<'a> {
    pub fn new(user: &'a str, g: &'a TripartiteGraph, dict: &LiwcDictionary) -> Self {
        Self {
            user,
            posts: &g.posts,
            words: &g.words,
            categories: g
                .cats
                .iter()
                .map(|&id| ExportCategory {
                    id,
                    name: dict.category(id).map(|c| c.name.clone()).unwrap_or_default(),
                })
                .collect(),
            wp_edges: &g.wp_edges,
            wc_edges: &g.wc_edges,
            stats: g.stats(),
        }
    }
}
