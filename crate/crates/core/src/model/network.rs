use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{ModelConfig, UserExample, UserPost};
use crate::error::{Error, Result};
use crate::flow_gat::{fgat_layer, FgatParams, StateNodes};
use crate::graph::{build_graph, TripartiteGraph};
use crate::liwc::{CategorySelection, LiwcDictionary};
use crate::nn::{softmax, Mat, NodeId, ParamStore, Tape};
use crate::text::{scrub_label_words, tokenize, EmbeddingProvider, PostLayerVectors, POST_LAYERS};

pub const LAYER_ATTENTION: &str = "layer_attention";

pub fn trait_weight(t: usize) -> String {
    format!("trait{t}.weight")
}

pub fn trait_bias(t: usize) -> String {
    format!("trait{t}.bias")
}

pub fn fgat_prefix(layer: usize) -> String {
    format!("fgat{layer}")
}

/// Softmax weights over the last three encoder layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerAttention {
    pub logits: [f64; 3],
}

impl LayerAttention {
    pub fn uniform() -> Self {
        Self { logits: [0.0; 3] }
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        let m = store.get(LAYER_ATTENTION)?;
        let d = m.data();
        if d.len() != 3 {
            return Err(Error::Shape {
                context: LAYER_ATTENTION.into(),
                detail: format!("expected 3 logits, got {}", d.len()),
            });
        }
        Ok(Self {
            logits: [d[0], d[1], d[2]],
        })
    }

    pub fn weights(&self) -> [f64; 3] {
        let w = softmax(&self.logits);
        [w[0], w[1], w[2]]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerWeights {
    pub layers: [u8; 3],
    pub logits: [f64; 3],
    pub weights: [f64; 3],
}

pub fn report_layer_weights(attn: &LayerAttention) -> LayerWeights {
    LayerWeights {
        layers: POST_LAYERS,
        logits: attn.logits,
        weights: attn.weights(),
    }
}

/// Stacks per-post layer vectors into three `r × d` matrices, one per layer.
pub fn layer_matrices(vectors: &[PostLayerVectors], d: usize) -> Result<[Mat; 3]> {
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for (i, v) in vectors.iter().enumerate() {
        for (j, layer) in v.layers.iter().enumerate() {
            if layer.len() != d {
                return Err(Error::Shape {
                    context: "init_post_nodes".into(),
                    detail: format!(
                        "post {i} layer {} has width {}, expected {d}",
                        POST_LAYERS[j],
                        layer.len()
                    ),
                });
            }
            out[j].extend_from_slice(layer);
        }
    }
    let r = vectors.len();
    Ok(out.map(|data| Mat::from_vec(r, d, data)))
}

/// Layer-attention combination on the tape; `logits` is a `1 × 3` node.
pub fn post_nodes_on_tape(tape: &mut Tape, layers: &[Mat; 3], logits: NodeId) -> NodeId {
    let weights = tape.row_softmax(logits, None);
    let mats: Vec<NodeId> = layers.iter().map(|m| tape.constant(m.clone())).collect();
    tape.weighted_sum(&mats, weights)
}

/// `x_p = Σ_j α_j x_p^j` for every post, with `α = softmax(logits)`.
pub fn init_post_nodes(vectors: &[PostLayerVectors], attn: &LayerAttention) -> Result<Mat> {
    let d = vectors.first().map_or(0, |v| v.layers[0].len());
    let layers = layer_matrices(vectors, d)?;
    let mut tape = Tape::new();
    let logits = tape.constant(Mat::from_vec(1, 3, attn.logits.to_vec()));
    let out = post_nodes_on_tape(&mut tape, &layers, logits);
    Ok(tape.value(out).clone())
}

/// Everything the forward pass needs for one user, computed once.
#[derive(Debug, Clone)]
pub struct PreparedUser {
    pub id: String,
    pub graph: TripartiteGraph,
    pub post_layers: [Mat; 3],
    pub words: Mat,
    pub cats: Mat,
    pub labels: Vec<usize>,
}

/// Tape nodes produced by one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub initial: StateNodes,
    pub final_states: StateNodes,
    pub user: NodeId,
    /// `T × 2` trait probabilities.
    pub probs: NodeId,
}

/// The end-to-end pipeline: text to graph to trait probabilities.
#[derive(Debug, Clone)]
pub struct TrigNet {
    cfg: ModelConfig,
    dict: LiwcDictionary,
    sel: CategorySelection,
    provider: EmbeddingProvider,
    scrub: HashSet<String>,
}

impl TrigNet {
    pub fn new(cfg: ModelConfig, dict: LiwcDictionary, provider: EmbeddingProvider) -> Result<Self> {
        cfg.validate()?;
        if provider.dim() != cfg.d {
            return Err(Error::Config(format!(
                "embedding width {} does not match d = {}",
                provider.dim(),
                cfg.d
            )));
        }
        let sel = dict.select(&cfg.categories)?;
        let scrub = cfg.scrub_lexicon.iter().map(|s| s.to_lowercase()).collect();
        Ok(Self {
            cfg,
            dict,
            sel,
            provider,
            scrub,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn dictionary(&self) -> &LiwcDictionary {
        &self.dict
    }

    pub fn selection(&self) -> &CategorySelection {
        &self.sel
    }

    pub fn provider(&self) -> &EmbeddingProvider {
        &self.provider
    }

    fn fgat_params(&self, layer: usize) -> FgatParams {
        FgatParams::new(&fgat_prefix(layer), self.cfg.heads, self.cfg.tie_mp_params)
    }

    /// Fresh parameters: zero layer-attention logits, Glorot weights, zero
    /// biases, drawn from a generator seeded with `cfg.seed`.
    pub fn init_params(&self) -> Result<ParamStore> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut store = ParamStore::new();
        store.insert(LAYER_ATTENTION, Mat::zeros(1, 3));
        for l in 0..self.cfg.layers {
            self.fgat_params(l).init(&mut store, self.cfg.d, &mut rng)?;
        }
        for t in 0..self.cfg.traits {
            store.insert(trait_weight(t), Mat::glorot(self.cfg.d, 2, &mut rng));
            store.insert(trait_bias(t), Mat::zeros(1, 2));
        }
        Ok(store)
    }

    /// Posts in canonical (id) order, tokenized and scrubbed.
    fn canonical_posts(&self, user: &UserExample) -> Vec<(UserPost, Vec<String>)> {
        let mut posts: Vec<&UserPost> = user.posts.iter().collect();
        posts.sort_by(|a, b| a.id.cmp(&b.id));
        posts
            .into_iter()
            .map(|p| {
                let toks = scrub_label_words(&tokenize(&p.text, self.cfg.max_post_len), &self.scrub);
                (p.clone(), toks.tokens)
            })
            .collect()
    }

    pub fn build_user_graph(&self, user: &UserExample) -> Result<TripartiteGraph> {
        let posts = self.canonical_posts(user);
        let ids: Vec<String> = posts.iter().map(|(p, _)| p.id.clone()).collect();
        let toks: Vec<_> = posts
            .into_iter()
            .map(|(_, tokens)| crate::text::TokenizedPost { tokens })
            .collect();
        build_graph(&ids, &toks, &self.dict, &self.sel, self.cfg.limits())
    }

    pub fn prepare(&self, user: &UserExample) -> Result<PreparedUser> {
        if user.labels.len() < self.cfg.traits {
            return Err(Error::Config(format!(
                "user {} has {} labels, model needs {}",
                user.id,
                user.labels.len(),
                self.cfg.traits
            )));
        }
        let graph = self.build_user_graph(user)?;
        let vectors = graph
            .posts
            .iter()
            .map(|id| self.provider.post_layer_vectors(id))
            .collect::<Result<Vec<_>>>()?;
        let post_layers = layer_matrices(&vectors, self.cfg.d)?;
        let words = self.provider.embed_matrix(&graph.words);
        let names: Vec<String> = graph
            .cats
            .iter()
            .map(|&id| self.dict.category(id).map(|c| c.name.clone()).unwrap_or_default())
            .collect();
        let cats = self.provider.embed_matrix(&names);
        Ok(PreparedUser {
            id: user.id.clone(),
            graph,
            post_layers,
            words,
            cats,
            labels: user.labels[..self.cfg.traits].to_vec(),
        })
    }

    pub fn prepare_all(&self, users: &[UserExample]) -> Result<Vec<PreparedUser>> {
        users.iter().map(|u| self.prepare(u)).collect()
    }

    /// Builds the forward pass on `tape`. Dropout is applied to the initial
    /// node embeddings only when `dropout_rng` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        user: &PreparedUser,
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward> {
        let logits = tape.param(store, LAYER_ATTENTION)?;
        let posts = post_nodes_on_tape(tape, &user.post_layers, logits);
        let words = tape.constant(user.words.clone());
        let cats = tape.constant(user.cats.clone());
        let mut states = StateNodes { posts, words, cats };
        if let Some(rng) = dropout_rng {
            if self.cfg.dropout > 0.0 {
                states = StateNodes {
                    posts: dropout(tape, states.posts, self.cfg.dropout, rng),
                    words: dropout(tape, states.words, self.cfg.dropout, rng),
                    cats: dropout(tape, states.cats, self.cfg.dropout, rng),
                };
            }
        }
        let initial = states;
        for l in 0..self.cfg.layers {
            states = fgat_layer(tape, states, &user.graph, store, &self.fgat_params(l), self.cfg.flows)?;
        }
        let u = tape.row_mean(states.posts);
        let mut rows = Vec::with_capacity(self.cfg.traits);
        for t in 0..self.cfg.traits {
            let w = tape.param(store, &trait_weight(t))?;
            let b = tape.param(store, &trait_bias(t))?;
            let z = tape.matmul(u, w);
            rows.push(tape.add(z, b));
        }
        let logits = tape.concat_rows(&rows);
        let probs = tape.row_softmax(logits, None);
        Ok(Forward {
            initial,
            final_states: states,
            user: u,
            probs,
        })
    }

    /// Sum over traits of `−ln p(true label)`.
    pub fn loss(&self, tape: &mut Tape, fwd: &Forward, labels: &[usize]) -> NodeId {
        tape.neg_log_pick(fwd.probs, labels)
    }

    /// Inference probabilities, `T × 2`.
    pub fn predict_proba(&self, store: &ParamStore, user: &PreparedUser) -> Result<Mat> {
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, store, user, None)?;
        Ok(tape.value(fwd.probs).clone())
    }

    /// Predicted class per trait; ties go to class 0.
    pub fn predict(&self, store: &ParamStore, user: &PreparedUser) -> Result<Vec<usize>> {
        let p = self.predict_proba(store, user)?;
        Ok((0..p.rows()).map(|t| usize::from(p.get(t, 1) > p.get(t, 0))).collect())
    }
}

fn dropout(tape: &mut Tape, x: NodeId, rate: f64, rng: &mut ChaCha8Rng) -> NodeId {
    let (rows, cols) = tape.value(x).shape();
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    tape.mul_const(x, Mat::from_vec(rows, cols, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_weights_examples() {
        let w = LayerAttention::uniform().weights();
        assert!(w.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
        let w = LayerAttention {
            logits: [1.0, 0.0, -1.0],
        }
        .weights();
        for (got, want) in w.iter().zip([0.6652, 0.2447, 0.0900]) {
            assert!((got - want).abs() < 5e-5);
        }
    }

    #[test]
    fn post_nodes_ln2() {
        let e = |i: usize| {
            let mut v = vec![0.0; 3];
            v[i] = 1.0;
            v
        };
        let vectors = [PostLayerVectors {
            layers: [e(0), e(1), e(2)],
        }];
        let attn = LayerAttention {
            logits: [2f64.ln(), 0.0, 0.0],
        };
        let x = init_post_nodes(&vectors, &attn).unwrap();
        for (got, want) in x.data().iter().zip([0.5, 0.25, 0.25]) {
            assert!((got - want).abs() < 1e-15);
        }
    }
}
