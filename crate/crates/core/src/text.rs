//! Tokenization, label scrubbing, and the embedding provider that stands in
//! for a pre-trained encoder.
//!
//! The provider is either backed by a text table or is a deterministic hash
//! stub. The table format is
//!
//! ```text
//! WORD <count> <dim>
//! <token> v1 ... vd
//! POST <count> <dim>
//! <post_id> <layer> v1 ... vd
//! ```
//!
//! where `<layer>` is one of 10, 11, 12. Either section may be absent.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Mat;

/// Encoder layers whose per-post vectors are combined by layer attention.
pub const POST_LAYERS: [u8; 3] = [10, 11, 12];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenizedPost {
    pub tokens: Vec<String>,
}

/// Lowercases, splits on anything that is not alphanumeric, and keeps at most
/// `max_len` tokens.
pub fn tokenize(text: &str, max_len: usize) -> TokenizedPost {
    let tokens = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .take(max_len)
        .collect();
    TokenizedPost { tokens }
}

/// Drops every token that appears in `lexicon`, keeping survivor order.
pub fn scrub_label_words(post: &TokenizedPost, lexicon: &HashSet<String>) -> TokenizedPost {
    TokenizedPost {
        tokens: post
            .tokens
            .iter()
            .filter(|t| !lexicon.contains(t.as_str()))
            .cloned()
            .collect(),
    }
}

/// The sixteen MBTI type strings plus the trait-pole words.
pub fn default_scrub_lexicon() -> Vec<String> {
    let mut out = Vec::new();
    for a in ['i', 'e'] {
        for b in ['n', 's'] {
            for c in ['t', 'f'] {
                for d in ['j', 'p'] {
                    out.push([a, b, c, d].iter().collect());
                }
            }
        }
    }
    out.extend(
        [
            "introvert",
            "introverted",
            "extrovert",
            "extroverted",
            "extravert",
            "intuitive",
            "sensor",
            "thinker",
            "feeler",
            "judger",
            "perceiver",
            "mbti",
        ]
        .map(String::from),
    );
    out
}

/// The three per-layer vectors of one post, in layer order 10, 11, 12.
#[derive(Debug, Clone, PartialEq)]
pub struct PostLayerVectors {
    pub layers: [Vec<f64>; 3],
}

#[derive(Debug, Clone)]
enum Source {
    Table {
        words: HashMap<String, Vec<f64>>,
        posts: HashMap<(String, u8), Vec<f64>>,
    },
    HashStub,
}

#[derive(Debug, Clone)]
pub struct EmbeddingProvider {
    dim: usize,
    seed: u64,
    source: Source,
}

impl EmbeddingProvider {
    pub fn hash_stub(dim: usize, seed: u64) -> Self {
        Self {
            dim,
            seed,
            source: Source::HashStub,
        }
    }

    /// Builds a table-backed provider directly from in-memory maps.
    pub fn from_tables(
        dim: usize,
        seed: u64,
        words: HashMap<String, Vec<f64>>,
        posts: HashMap<(String, u8), Vec<f64>>,
    ) -> Result<Self> {
        for (k, v) in &words {
            check_vec(v, dim, k, 0)?;
        }
        for ((k, _), v) in &posts {
            check_vec(v, dim, k, 0)?;
        }
        Ok(Self {
            dim,
            seed,
            source: Source::Table { words, posts },
        })
    }

    pub fn from_path(path: impl AsRef<std::path::Path>, seed: u64) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(file), seed)
    }

    pub fn parse<R: BufRead>(source: R, seed: u64) -> Result<Self> {
        enum Section {
            None,
            Words,
            Posts,
        }
        let mut dim: Option<usize> = None;
        let mut section = Section::None;
        let mut words = HashMap::new();
        let mut posts = HashMap::new();
        let mut expected = (None, None);

        for (i, line) in source.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let mut fields = line.split_whitespace();
            let Some(head) = fields.next() else { continue };
            if head == "WORD" || head == "POST" {
                let count = parse_usize(fields.next(), lineno, "count")?;
                let d = parse_usize(fields.next(), lineno, "dim")?;
                if d == 0 {
                    return Err(emb_err(lineno, "dim must be positive"));
                }
                if let Some(prev) = dim.replace(d) {
                    if prev != d {
                        return Err(emb_err(lineno, format!("dim {d} differs from earlier {prev}")));
                    }
                }
                if head == "WORD" {
                    section = Section::Words;
                    expected.0 = Some(count);
                } else {
                    section = Section::Posts;
                    expected.1 = Some(count);
                }
                continue;
            }
            let d = dim.ok_or_else(|| emb_err(lineno, "record before WORD/POST header"))?;
            match section {
                Section::None => return Err(emb_err(lineno, "record before WORD/POST header")),
                Section::Words => {
                    let v = parse_vec(fields, d, lineno)?;
                    words.insert(head.to_lowercase(), v);
                }
                Section::Posts => {
                    let layer: u8 = fields
                        .next()
                        .and_then(|s| s.parse().ok())
                        .filter(|l| POST_LAYERS.contains(l))
                        .ok_or_else(|| emb_err(lineno, "layer must be 10, 11 or 12"))?;
                    let v = parse_vec(fields, d, lineno)?;
                    posts.insert((head.to_string(), layer), v);
                }
            }
        }
        if let Some(n) = expected.0 {
            if n != words.len() {
                return Err(emb_err(0, format!("WORD header says {n}, found {}", words.len())));
            }
        }
        if let Some(n) = expected.1 {
            if n != posts.len() {
                return Err(emb_err(0, format!("POST header says {n}, found {}", posts.len())));
            }
        }
        let dim = dim.ok_or_else(|| emb_err(0, "no WORD or POST header"))?;
        Ok(Self {
            dim,
            seed,
            source: Source::Table { words, posts },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_stub(&self) -> bool {
        matches!(self.source, Source::HashStub)
    }

    /// Vector for a token. Table misses fall back to the mean of greedy
    /// left-to-right maximal known substrings; if none is known, the hash
    /// stub vector is used.
    pub fn embed_token(&self, token: &str) -> Vec<f64> {
        let Source::Table { words, .. } = &self.source else {
            return self.stub_vector(&["tok", token]);
        };
        if let Some(v) = words.get(token) {
            return v.clone();
        }
        let pieces = greedy_pieces(token, |s| words.contains_key(s));
        if pieces.is_empty() {
            return self.stub_vector(&["tok", token]);
        }
        let mut mean = vec![0.0; self.dim];
        for p in &pieces {
            for (m, x) in mean.iter_mut().zip(&words[*p]) {
                *m += x;
            }
        }
        let n = pieces.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    pub fn post_layer_vectors(&self, post_id: &str) -> Result<PostLayerVectors> {
        let get = |layer: u8| -> Result<Vec<f64>> {
            match &self.source {
                Source::HashStub => Ok(self.stub_vector(&["post", post_id, &layer.to_string()])),
                Source::Table { posts, .. } => {
                    posts
                        .get(&(post_id.to_string(), layer))
                        .cloned()
                        .ok_or_else(|| Error::MissingLayer {
                            post: post_id.to_string(),
                            layer,
                        })
                }
            }
        };
        Ok(PostLayerVectors {
            layers: [get(10)?, get(11)?, get(12)?],
        })
    }

    /// Stacks token vectors into a `tokens.len() x dim` matrix.
    pub fn embed_matrix<S: AsRef<str>>(&self, tokens: &[S]) -> Mat {
        let mut data = Vec::with_capacity(tokens.len() * self.dim);
        for t in tokens {
            data.extend(self.embed_token(t.as_ref()));
        }
        Mat::from_vec(tokens.len(), self.dim, data)
    }

    fn stub_vector(&self, parts: &[&str]) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(self.seed, parts));
        let half = 0.5 / self.dim as f64;
        (0..self.dim).map(|_| rng.gen_range(-half..=half)).collect()
    }
}

/// Splits `token` into maximal known substrings, scanning left to right.
/// Characters not covered by any known piece are skipped.
fn greedy_pieces(token: &str, known: impl Fn(&str) -> bool) -> Vec<&str> {
    let bounds: Vec<usize> = token
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(token.len()))
        .collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    while start + 1 < bounds.len() {
        let hit = (start + 1..bounds.len())
            .rev()
            .find(|&end| known(&token[bounds[start]..bounds[end]]));
        match hit {
            Some(end) => {
                pieces.push(&token[bounds[start]..bounds[end]]);
                start = end;
            }
            None => start += 1,
        }
    }
    pieces
}

/// 64-bit FNV-1a over the seed and the parts, with a separator between parts.
/// Stable across platforms and toolchain versions.
pub fn stable_hash(seed: u64, parts: &[&str]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    let mut eat = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    };
    seed.to_le_bytes().into_iter().for_each(&mut eat);
    for p in parts {
        eat(0xff);
        p.bytes().for_each(&mut eat);
    }
    h
}

fn check_vec(v: &[f64], dim: usize, key: &str, line: usize) -> Result<()> {
    if v.len() != dim {
        return Err(emb_err(line, format!("`{key}` has {} values, expected {dim}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(emb_err(line, format!("`{key}` has non-finite values")));
    }
    Ok(())
}

fn parse_usize(s: Option<&str>, line: usize, what: &str) -> Result<usize> {
    s.and_then(|s| s.parse().ok())
        .ok_or_else(|| emb_err(line, format!("bad {what} in header")))
}

fn parse_vec<'a>(fields: impl Iterator<Item = &'a str>, dim: usize, line: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = fields
        .map(|f| f.parse::<f64>().map_err(|_| emb_err(line, format!("bad value `{f}`"))))
        .collect::<Result<_>>()?;
    check_vec(&v, dim, "record", line)?;
    Ok(v)
}

fn emb_err(line: usize, msg: impl Into<String>) -> Error {
    Error::EmbeddingFile { line, msg: msg.into() }
}
