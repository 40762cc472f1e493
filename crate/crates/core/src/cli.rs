//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 on runtime failure or a failed gradient check, 2 on usage
//! errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::cost::{compare_with, GraphShape};
use crate::error::{Error, Result};
use crate::fixtures::{tiny_setup, write_fixtures, PlantedSpec};
use crate::flow_gat::Flows;
use crate::graph::GraphExport;
use crate::liwc::LiwcDictionary;
use crate::model::{
    evaluate, load_dataset, report_layer_weights, train, LayerAttention, ModelConfig, TrigNet, UserExample,
};
use crate::nn::{grad_check, ParamStore};
use crate::text::EmbeddingProvider;

// Writes to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Debug, Parser)]
#[command(
    name = "trignet",
    version,
    about = "Tripartite graph attention for personality detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build per-user graphs and write them with their statistics.
    BuildGraph(DataArgs),
    /// Train and write a checkpoint, the history and the layer weights.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Compare flow GAT and vanilla GAT cost on a graph shape.
    Profile(ProfileArgs),
    /// Finite-difference check of the full model on the tiny graph.
    Gradcheck(GradcheckArgs),
    /// Write the toy dictionary, planted dataset and embedding file.
    GenFixtures(FixtureArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Start from the full-scale preset (width 768, 12 heads) instead of
    /// the desk preset (width 16, 2 heads).
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "K")]
    heads: Option<usize>,
    #[arg(long = "L")]
    layers: Option<usize>,
    #[arg(long)]
    max_posts: Option<usize>,
    #[arg(long)]
    max_post_len: Option<usize>,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, value_parser = parse_flows)]
    flows: Option<Flows>,
    /// Remove a category node (repeatable).
    #[arg(long = "drop-category", value_name = "NAME")]
    drop_category: Vec<String>,
    #[arg(long)]
    tie_mp_params: bool,
}

fn parse_flows(s: &str) -> std::result::Result<Flows, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ModelArgs {
    fn resolve(&self) -> Result<ModelConfig> {
        let mut cfg = if self.full_scale {
            ModelConfig::full_scale()
        } else {
            ModelConfig::desk()
        };
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        set!(seed => seed, d => d, heads => heads, layers => layers, max_posts => max_posts,
             max_post_len => max_post_len, max_nodes => max_nodes, dropout => dropout, lr => lr,
             epochs => epochs, batch_size => batch_size, flows => flows);
        if self.patience.is_some() {
            cfg.patience = self.patience;
        }
        cfg.tie_mp_params |= self.tie_mp_params;
        for name in &self.drop_category {
            cfg.drop_category(name)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Embedding file; the deterministic hash stub is used when absent.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Validation split for per-epoch scores and early stopping.
    #[arg(long)]
    val: Option<PathBuf>,
    /// Also write every user's graph under `<out>/graphs/`.
    #[arg(long)]
    export_graph: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    export_graph: bool,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[arg(long, default_value_t = 50)]
    r: u64,
    #[arg(long, default_value_t = 15)]
    n: u64,
    #[arg(long, default_value_t = 500)]
    max_nodes: u64,
    #[arg(long, default_value_t = 768)]
    d: u64,
    #[arg(long = "K", default_value_t = 12)]
    heads: u64,
    #[arg(long = "L", default_value_t = 1)]
    layers: u64,
    #[arg(long, default_value_t = 4)]
    l_vanilla: u64,
    #[arg(long, default_value_t = 20.45)]
    words_per_post: f64,
    #[arg(long, default_value_t = 1.0)]
    cats_per_word: f64,
    #[arg(long, value_parser = parse_flows, default_value = "both")]
    flows: Flows,
    #[arg(long)]
    tie_mp_params: bool,
    /// Write the JSON report here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// The tiny graph: 3 posts, 6 words, 3 categories, width 8, 2 heads.
    #[arg(long)]
    tiny: bool,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FixtureArgs {
    #[arg(long, default_value = "fixtures")]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    d: usize,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::BuildGraph(a) => build_graph_cmd(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::Profile(a) => profile_cmd(&a),
        Command::Gradcheck(a) => gradcheck_cmd(&a),
        Command::GenFixtures(a) => fixtures_cmd(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

fn provider(path: Option<&Path>, cfg: &ModelConfig) -> Result<EmbeddingProvider> {
    match path {
        Some(p) => EmbeddingProvider::from_path(p, cfg.seed),
        None => Ok(EmbeddingProvider::hash_stub(cfg.d, cfg.seed)),
    }
}

fn load(
    dataset: &Path,
    dict: &Path,
    embeddings: Option<&Path>,
    cfg: ModelConfig,
) -> Result<(TrigNet, Vec<UserExample>)> {
    let users = load_dataset(dataset)?;
    if users.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dict = LiwcDictionary::from_path(dict)?;
    let provider = provider(embeddings, &cfg)?;
    Ok((TrigNet::new(cfg, dict, provider)?, users))
}

fn export_graphs(net: &TrigNet, users: &[UserExample], out: &Path) -> Result<()> {
    for u in users {
        let g = net.build_user_graph(u)?;
        write_json(
            &out.join("graphs").join(format!("{}.json", u.id)),
            &GraphExport::new(&u.id, &g, net.dictionary()),
        )?;
    }
    Ok(())
}

fn build_graph_cmd(a: &DataArgs) -> Result<i32> {
    let cfg = a.model.resolve()?;
    let (net, users) = load(&a.dataset, &a.dict, a.embeddings.as_deref(), cfg)?;
    export_graphs(&net, &users, &a.out)?;
    let mut stats = Vec::with_capacity(users.len());
    for u in &users {
        stats.push(json!({ "user": u.id, "stats": net.build_user_graph(u)?.stats() }));
    }
    write_json(
        &a.out.join("graph_stats.json"),
        &json!({ "config": net.config(), "seed": net.config().seed, "users": stats }),
    )?;
    say!("built {} graphs into {}", users.len(), a.out.display());
    Ok(0)
}

fn train_cmd(a: &TrainArgs) -> Result<i32> {
    let cfg = a.data.model.resolve()?;
    let (net, users) = load(&a.data.dataset, &a.data.dict, a.data.embeddings.as_deref(), cfg)?;
    let val_users = match &a.val {
        Some(p) => load_dataset(p)?,
        None => Vec::new(),
    };
    if a.export_graph {
        export_graphs(&net, &users, &a.data.out)?;
    }
    let train_set = net.prepare_all(&users)?;
    let val_set = net.prepare_all(&val_users)?;
    let outcome = train(&net, &train_set, &val_set)?;
    let cfg = net.config();
    let out = &a.data.out;

    std::fs::create_dir_all(out)?;
    let meta = json!({ "config": cfg, "seed": cfg.seed });
    let file = std::io::BufWriter::new(std::fs::File::create(out.join("checkpoint.txt"))?);
    outcome.store.write_checkpoint(file, &meta)?;

    let weights = report_layer_weights(&LayerAttention::from_store(&outcome.store)?);
    write_json(
        &out.join("history.json"),
        &json!({
            "config": cfg,
            "seed": cfg.seed,
            "best_epoch": outcome.best_epoch,
            "stopped_early": outcome.stopped_early,
            "history": outcome.history,
        }),
    )?;
    write_json(
        &out.join("layer_weights.json"),
        &json!({ "config": cfg, "seed": cfg.seed, "layer_weights": weights }),
    )?;

    say!("{:>6} {:>10} {:>9} {:>9}", "epoch", "loss", "train_f1", "val_f1");
    let every = (outcome.history.len() / 10).max(1);
    for h in outcome.history.iter().filter(|h| h.epoch % every == 0 || h.epoch == 1) {
        let val = h.val_f1.map_or("-".to_string(), |v| format!("{v:.4}"));
        say!("{:>6} {:>10.5} {:>9.4} {:>9}", h.epoch, h.loss, h.train_f1, val);
    }
    say!("layer weights (10, 11, 12): {:.4?}", weights.weights);
    say!("wrote {}", out.display());
    Ok(0)
}

fn eval_cmd(a: &EvalArgs) -> Result<i32> {
    let Some(ckpt) = &a.checkpoint else {
        eprintln!("missing --checkpoint");
        return Ok(2);
    };
    let file = std::fs::File::open(ckpt)?;
    let (store, meta) = ParamStore::read_checkpoint(std::io::BufReader::new(file))?;
    let cfg: ModelConfig = serde_json::from_value(meta["config"].clone()).map_err(|e| Error::Checkpoint {
        line: 2,
        msg: format!("config: {e}"),
    })?;
    let (net, users) = load(&a.dataset, &a.dict, a.embeddings.as_deref(), cfg)?;
    if a.export_graph {
        export_graphs(&net, &users, &a.out)?;
    }
    let prepared = net.prepare_all(&users)?;
    let report = evaluate(&net, &store, &prepared)?;
    let cfg = net.config();
    write_json(
        &a.out.join("eval.json"),
        &json!({ "config": cfg, "seed": cfg.seed, "report": report }),
    )?;
    for (t, f) in crate::model::TRAITS.iter().zip(&report.per_trait_f1) {
        say!("{t} Macro-F1 {f:.4}");
    }
    say!("average Macro-F1 {:.4}", report.average_f1);
    Ok(0)
}

fn profile_cmd(a: &ProfileArgs) -> Result<i32> {
    let shape = GraphShape::from_totals(a.r, a.n, a.max_nodes, a.words_per_post, a.cats_per_word, a.d, a.heads)?;
    let cmp = compare_with(&shape, a.layers, a.l_vanilla, a.flows, a.tie_mp_params);
    let report = json!({
        "config": {
            "r": a.r, "n": a.n, "max_nodes": a.max_nodes, "d": a.d, "K": a.heads,
            "L": a.layers, "l_vanilla": a.l_vanilla, "words_per_post": a.words_per_post,
            "cats_per_word": a.cats_per_word, "flows": a.flows, "tie_mp_params": a.tie_mp_params,
        },
        "seed": null,
        "shape": cmp.shape,
        "flow": cmp.flow,
        "vanilla": cmp.vanilla,
        "flops_flow": cmp.flow.flops,
        "flops_vanilla": cmp.vanilla.flops,
        "flops_reduction_pct": cmp.flops_reduction_pct,
        "mem_reduction_pct": cmp.mem_reduction_pct,
        "train_mem_reduction_pct": cmp.train_mem_reduction_pct,
    });
    let _ = write!(std::io::stdout(), "{}", cmp.table());
    say!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(p) = &a.out {
        write_json(p, &report)?;
    }
    Ok(0)
}

fn gradcheck_cmd(a: &GradcheckArgs) -> Result<i32> {
    let (net, user, store) = tiny_setup(a.seed)?;
    let check = grad_check(
        |tape, s| {
            let fwd = net.forward(tape, s, &user, None)?;
            Ok(net.loss(tape, &fwd, &user.labels))
        },
        &store,
        a.eps,
    )?;
    say!(
        "max relative error {:.3e} over {} entries (worst {:?})",
        check.max_rel_error,
        check.entries,
        check.worst
    );
    if check.max_rel_error < a.threshold {
        Ok(0)
    } else {
        eprintln!(
            "gradient check failed: {:.3e} >= {:.1e}",
            check.max_rel_error, a.threshold
        );
        Ok(1)
    }
}

fn fixtures_cmd(a: &FixtureArgs) -> Result<i32> {
    let spec = PlantedSpec {
        seed: a.seed,
        ..PlantedSpec::default()
    };
    let paths = write_fixtures(&a.out, &spec, a.d)?;
    for p in [&paths.dictionary, &paths.train, &paths.val, &paths.embeddings] {
        say!("wrote {}", p.display());
    }
    Ok(0)
}
