//! Self-contained data: a small LIWC-format dictionary, the two-post example
//! user, a planted dataset whose labels depend only on category membership,
//! and matching embedding tables.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::liwc::LiwcDictionary;
use crate::model::{write_dataset, ModelConfig, PreparedUser, TrigNet, UserExample};
use crate::nn::ParamStore;
use crate::text::{tokenize, EmbeddingProvider, POST_LAYERS};

/// Categories 1..=15 are the default selection; 16.. are extra subcategories.
pub const TOY_DICTIONARY: &str = "\
%
1\tfunction\tmain
2\taffect\tmain
3\tsocial\tmain
4\tcognitive processes\tmain
5\tperceptual processes\tmain
6\tbiological processes\tmain
7\tdrives\tmain
8\trelativity\tmain
9\tinformal language\tmain
10\twork\tsub
11\tleisure\tsub
12\thome\tsub
13\tmoney\tsub
14\treligion\tsub
15\tdeath\tsub
16\tposemo\tsub
17\tnegemo\tsub
18\tfriend\tsub
19\tfamily\tsub
%
for\t1
me\t1
the\t1
and\t1
you\t1
we\t1
good\t2 16
love\t2 16
nice\t2 16
happ*\t2 16
hate*\t2 17
sad\t2 17
thanks\t3
friend*\t3 18
talk*\t3
mom\t3 19
think*\t4
know*\t4
because\t4
see\t5
hear*\t5
feel*\t5
eat*\t6
sleep*\t6
body\t6
win*\t7
power*\t7
achiev*\t7
time\t8
here\t8
lol\t9
omg\t9
haha*\t9
work*\t10
job*\t10
office\t10
boss\t10
game*\t11
movie*\t11
party*\t11
music\t11
house*\t12
kitchen\t12
garden\t12
money\t13
cash\t13
pay*\t13
church\t14
pray*\t14
god\t14
dead\t15
funeral*\t15
grave\t15
";

pub fn toy_dictionary() -> LiwcDictionary {
    LiwcDictionary::parse_str(TOY_DICTIONARY).expect("toy dictionary parses")
}

/// The two posts of the worked example user.
pub const SAMPLE_POSTS: [&str; 2] = ["A lot of good advise for me", "Love it! Thanks for sharing!"];
pub const SAMPLE_CATEGORIES: [&str; 3] = ["function", "affect", "social"];

/// Planted category per trait: trait `t` is 1 iff the user writes a word of
/// `PLANTED[t]`.
pub const PLANTED: [&str; 4] = ["affect", "social", "work", "leisure"];

const PLANTED_WORDS: [&[&str]; 4] = [
    &["good", "love", "nice", "happy", "hate", "sad"],
    &["thanks", "friends", "talking", "mom"],
    &["work", "job", "office", "boss", "working"],
    &["games", "movie", "party", "music"],
];

/// Dictionary words outside the planted categories.
const DICT_FILLER: &[&str] = &[
    "for", "me", "the", "and", "you", "we", "think", "know", "because", "see", "hear", "feeling", "eat", "sleep",
    "body", "win", "power", "time", "here", "lol", "omg", "house", "kitchen", "garden", "money", "cash", "pay",
    "church", "pray", "god", "dead", "grave",
];

/// Words in no dictionary category.
const PLAIN_FILLER: &[&str] = &[
    "a", "lot", "of", "it", "sharing", "advise", "today", "weather", "car", "road", "blue", "tree", "lamp", "paper",
    "river", "stone", "cloud", "bridge", "train", "city",
];

#[derive(Debug, Clone, Copy)]
pub struct PlantedSpec {
    pub train_users: usize,
    pub val_users: usize,
    pub posts_per_user: usize,
    pub tokens_per_post: usize,
    /// Chance that a post of a positive user carries a planted word.
    pub plant_rate: f64,
    /// Length of the planted-word embedding axis.
    pub signal: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            train_users: 32,
            val_users: 16,
            posts_per_user: 6,
            tokens_per_post: 10,
            plant_rate: 0.8,
            signal: 4.0,
            seed: 7,
        }
    }
}

/// Users with independent, balanced labels per trait. A positive user gets
/// planted words in some posts (at least one); a negative user never does.
pub fn planted_users(spec: &PlantedSpec) -> (Vec<UserExample>, Vec<UserExample>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.train_users + spec.val_users;
    let labels = balanced_labels(spec.train_users, &mut rng)
        .into_iter()
        .chain(balanced_labels(spec.val_users, &mut rng))
        .collect::<Vec<_>>();
    let mut users = Vec::with_capacity(total);
    for (i, labels) in labels.into_iter().enumerate() {
        let mut posts: Vec<Vec<&str>> = (0..spec.posts_per_user)
            .map(|_| {
                (0..spec.tokens_per_post)
                    .map(|_| {
                        if rng.gen_bool(0.5) {
                            *DICT_FILLER.choose(&mut rng).unwrap()
                        } else {
                            *PLAIN_FILLER.choose(&mut rng).unwrap()
                        }
                    })
                    .collect()
            })
            .collect();
        for (t, &label) in labels.iter().enumerate() {
            if label == 0 {
                continue;
            }
            let forced = rng.gen_range(0..spec.posts_per_user);
            for (p, post) in posts.iter_mut().enumerate() {
                if p == forced || rng.gen_bool(spec.plant_rate) {
                    let slot = rng.gen_range(0..post.len());
                    post[slot] = PLANTED_WORDS[t].choose(&mut rng).unwrap();
                }
            }
        }
        let texts: Vec<String> = posts.iter().map(|p| p.join(" ")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        users.push(UserExample::new(format!("u{:03}", i + 1), &refs, labels));
    }
    let val = users.split_off(spec.train_users);
    (users, val)
}

fn balanced_labels(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut columns: Vec<Vec<usize>> = (0..PLANTED.len())
        .map(|_| {
            let mut col: Vec<usize> = (0..n).map(|i| usize::from(i < n / 2)).collect();
            col.shuffle(rng);
            col
        })
        .collect();
    (0..n).map(|i| columns.iter_mut().map(|c| c[i]).collect()).collect()
}

/// Word vectors: each planted category owns one coordinate axis, and its
/// words point along it with length `signal` plus small noise. Every other
/// word, and every category-name piece, is small noise. Post-layer vectors
/// are small noise too, so labels are only recoverable through word and
/// category nodes.
pub fn planted_embeddings(users: &[UserExample], d: usize, spec: &PlantedSpec) -> Result<EmbeddingProvider> {
    let seed = spec.seed;
    assert!(d >= PLANTED.len(), "width must hold one axis per planted category");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise =
        |rng: &mut ChaCha8Rng, scale: f64| -> Vec<f64> { (0..d).map(|_| rng.gen_range(-scale..=scale)).collect() };
    let mut words: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (t, pool) in PLANTED_WORDS.iter().enumerate() {
        for w in *pool {
            let mut v = noise(&mut rng, 0.05);
            v[t] += spec.signal;
            words.insert(w.to_string(), v);
        }
    }
    let dict = toy_dictionary();
    let mut others: Vec<String> = DICT_FILLER.iter().chain(PLAIN_FILLER).map(|s| s.to_string()).collect();
    for c in dict.categories() {
        others.extend(c.name.split_whitespace().map(str::to_string));
    }
    others.sort();
    others.dedup();
    for w in others {
        words.entry(w).or_insert_with(|| noise(&mut rng, 0.1));
    }
    let mut posts = HashMap::new();
    for u in users {
        for p in &u.posts {
            for layer in POST_LAYERS {
                posts.insert((p.id.clone(), layer), noise(&mut rng, 0.1));
            }
        }
    }
    EmbeddingProvider::from_tables(d, seed, words.into_iter().collect(), posts)
}

/// Writes the text embedding format: a `WORD count dim` block then a
/// `POST count dim` block, rows sorted.
pub fn write_embeddings<W: Write>(
    mut w: W,
    d: usize,
    words: &BTreeMap<String, Vec<f64>>,
    posts: &BTreeMap<(String, u8), Vec<f64>>,
) -> Result<()> {
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
    writeln!(w, "WORD {} {d}", words.len())?;
    for (k, v) in words {
        writeln!(w, "{k} {}", fmt(v))?;
    }
    writeln!(w, "POST {} {d}", posts.len())?;
    for ((id, layer), v) in posts {
        writeln!(w, "{id} {layer} {}", fmt(v))?;
    }
    Ok(())
}

/// Paths written by [`write_fixtures`].
#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub dictionary: PathBuf,
    pub train: PathBuf,
    pub val: PathBuf,
    pub embeddings: PathBuf,
}

/// Writes `dict.txt`, `train.jsonl`, `val.jsonl` and `embeddings.txt`.
pub fn write_fixtures(dir: &Path, spec: &PlantedSpec, d: usize) -> Result<FixturePaths> {
    std::fs::create_dir_all(dir)?;
    let paths = FixturePaths {
        dictionary: dir.join("dict.txt"),
        train: dir.join("train.jsonl"),
        val: dir.join("val.jsonl"),
        embeddings: dir.join("embeddings.txt"),
    };
    std::fs::write(&paths.dictionary, TOY_DICTIONARY)?;
    let (train, val) = planted_users(spec);
    write_dataset(std::fs::File::create(&paths.train)?, &train)?;
    write_dataset(std::fs::File::create(&paths.val)?, &val)?;

    let all: Vec<UserExample> = train.iter().chain(&val).cloned().collect();
    let provider = planted_embeddings(&all, d, spec)?;
    let (words, posts) = provider_tables(&provider, &all)?;
    let file = std::io::BufWriter::new(std::fs::File::create(&paths.embeddings)?);
    write_embeddings(file, d, &words, &posts)?;
    Ok(paths)
}

type Tables = (BTreeMap<String, Vec<f64>>, BTreeMap<(String, u8), Vec<f64>>);

fn provider_tables(provider: &EmbeddingProvider, users: &[UserExample]) -> Result<Tables> {
    let mut vocab: Vec<String> = PLANTED_WORDS
        .iter()
        .flat_map(|p| p.iter())
        .chain(DICT_FILLER)
        .chain(PLAIN_FILLER)
        .map(|s| s.to_string())
        .collect();
    for c in toy_dictionary().categories() {
        vocab.extend(c.name.split_whitespace().map(str::to_string));
    }
    let words = vocab.into_iter().map(|w| {
        let v = provider.embed_token(&w);
        (w, v)
    });
    let mut posts = BTreeMap::new();
    for u in users {
        for p in &u.posts {
            let v = provider.post_layer_vectors(&p.id)?;
            for (layer, vec) in POST_LAYERS.iter().zip(v.layers) {
                posts.insert((p.id.clone(), *layer), vec);
            }
        }
    }
    Ok((words.collect(), posts))
}

/// The desk configuration trained on the planted fixtures.
pub fn planted_config() -> ModelConfig {
    ModelConfig::desk()
}

/// Three posts, six words, three categories.
pub const TINY_DICTIONARY: &str = "%\n1\tfunction\tmain\n2\taffect\tmain\n3\tsocial\tmain\n%\nfor\t1\nme\t1\ngood\t2\nlove\t2 3\nthanks\t3\nfriend*\t3\n";
pub const TINY_POSTS: [&str; 3] = ["good for me", "love for friends", "thanks love"];

/// Width 8, 2 heads, one layer, dropout off.
pub fn tiny_config() -> ModelConfig {
    ModelConfig {
        d: 8,
        heads: 2,
        dropout: 0.0,
        categories: vec!["function".into(), "affect".into(), "social".into()],
        ..ModelConfig::desk()
    }
}

/// The tiny graph setup for gradient checks, with unit-scale embeddings so
/// typical gradient entries sit far above finite-difference noise.
pub fn tiny_setup(seed: u64) -> Result<(TrigNet, PreparedUser, ParamStore)> {
    let cfg = ModelConfig { seed, ..tiny_config() };
    let user = UserExample::new("tiny", &TINY_POSTS, vec![1, 0, 1, 0]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = || -> Vec<f64> { (0..cfg.d).map(|_| rng.gen_range(-1.0..=1.0)).collect() };
    let mut words = HashMap::new();
    for t in TINY_POSTS.iter().flat_map(|p| tokenize(p, 70).tokens) {
        words.entry(t).or_insert_with(&mut unit);
    }
    for name in ["function", "affect", "social"] {
        words.insert(name.to_string(), unit());
    }
    let mut posts = HashMap::new();
    for p in &user.posts {
        for layer in POST_LAYERS {
            posts.insert((p.id.clone(), layer), unit());
        }
    }
    let provider = EmbeddingProvider::from_tables(cfg.d, seed, words, posts)?;
    let net = TrigNet::new(cfg, LiwcDictionary::parse_str(TINY_DICTIONARY)?, provider)?;
    let prepared = net.prepare(&user)?;
    let store = net.init_params()?;
    Ok((net, prepared, store))
}
