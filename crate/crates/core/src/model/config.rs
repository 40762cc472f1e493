use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow_gat::Flows;
use crate::graph::GraphLimits;
use crate::liwc::DEFAULT_CATEGORY_NAMES;
use crate::text::default_scrub_lexicon;

/// Trait keys in label order; trait `t` is `TRAITS[t]`.
pub const TRAITS: [&str; 4] = ["IE", "SN", "TF", "PJ"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    pub traits: usize,
    pub max_posts: usize,
    pub max_post_len: usize,
    pub max_nodes: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a better validation score.
    pub patience: Option<usize>,
    pub seed: u64,
    pub flows: Flows,
    pub categories: Vec<String>,
    pub tie_mp_params: bool,
    pub scrub_lexicon: Vec<String>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

impl ModelConfig {
    /// Width 768, 12 heads, one layer, 50 posts of up to 70 tokens, 500 nodes.
    pub fn full_scale() -> Self {
        Self {
            d: 768,
            heads: 12,
            layers: 1,
            traits: TRAITS.len(),
            max_posts: 50,
            max_post_len: 70,
            max_nodes: 500,
            dropout: 0.2,
            lr: 1e-3,
            batch_size: 32,
            epochs: 200,
            patience: None,
            seed: 0,
            flows: Flows::BOTH,
            categories: DEFAULT_CATEGORY_NAMES.iter().map(|s| s.to_string()).collect(),
            tie_mp_params: false,
            scrub_lexicon: default_scrub_lexicon(),
        }
    }

    /// Full-scale settings at width 16 with 2 heads.
    pub fn desk() -> Self {
        Self {
            d: 16,
            heads: 2,
            ..Self::full_scale()
        }
    }

    /// Removes `name` from the category selection.
    pub fn drop_category(&mut self, name: &str) -> Result<()> {
        let name = name.to_lowercase();
        let before = self.categories.len();
        self.categories.retain(|c| c.to_lowercase() != name);
        if self.categories.len() == before {
            return Err(Error::CategoryNotFound(name));
        }
        Ok(())
    }

    pub fn limits(&self) -> GraphLimits {
        GraphLimits {
            max_posts: self.max_posts,
            max_nodes: self.max_nodes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.d == 0 {
            return fail("d must be positive".into());
        }
        if self.heads == 0 || !self.d.is_multiple_of(self.heads) {
            return fail(format!("K ({}) must divide d ({})", self.heads, self.d));
        }
        if self.layers == 0 {
            return fail("L must be at least 1".into());
        }
        if self.traits == 0 || self.traits > TRAITS.len() {
            return fail(format!("T must be in 1..={}", TRAITS.len()));
        }
        if self.max_posts == 0 || self.max_post_len == 0 {
            return fail("max_posts and max_post_len must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be finite and non-negative, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive".into());
        }
        if self.max_nodes < self.max_posts + self.categories.len() {
            return fail(format!(
                "max_nodes ({}) must hold max_posts ({}) plus {} categories",
                self.max_nodes,
                self.max_posts,
                self.categories.len()
            ));
        }
        Ok(())
    }
}
