//! Runs one flow GAT layer on the sample graph under each flow setting and
//! reports how far each post moves, plus the attention a post pays to its
//! words.
//!
//! ```text
//! cargo run --example message_passing
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trignet::fixtures::{toy_dictionary, SAMPLE_CATEGORIES, SAMPLE_POSTS};
use trignet::flow_gat::{fgat_forward, message_pass, FgatParams, Flows, NodeStates};
use trignet::graph::{build_graph, GraphLimits};
use trignet::nn::{Mat, ParamStore, Tape};
use trignet::text::tokenize;

fn main() -> trignet::Result<()> {
    let dict = toy_dictionary();
    let sel = dict.select(SAMPLE_CATEGORIES)?;
    let posts: Vec<_> = SAMPLE_POSTS.iter().map(|p| tokenize(p, 70)).collect();
    let ids = vec!["s:p1".to_string(), "s:p2".to_string()];
    let limits = GraphLimits {
        max_posts: 50,
        max_nodes: 500,
    };
    let g = build_graph(&ids, &posts, &dict, &sel, limits)?;

    let (d, heads) = (8, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    let params = FgatParams::new("fgat0", heads, false);
    params.init(&mut store, d, &mut rng)?;
    let states = NodeStates {
        posts: Mat::uniform(g.r(), d, 1.0, &mut rng),
        words: Mat::uniform(g.m(), d, 1.0, &mut rng),
        cats: Mat::uniform(g.n(), d, 1.0, &mut rng),
    };

    for (name, flows) in [
        ("both", Flows::BOTH),
        ("word only", Flows::WORD_ONLY),
        ("category only", Flows::CATEGORY_ONLY),
        ("none", Flows::NONE),
    ] {
        let out = fgat_forward(&states, &g, &store, &params, flows)?;
        let moved: Vec<String> = (0..g.r())
            .map(|i| {
                let delta = out.posts.row(i).iter().zip(states.posts.row(i));
                format!("{:.4}", delta.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            })
            .collect();
        println!("{name:<14} post shift {}", moved.join(" "));
    }

    let mut tape = Tape::new();
    let q = tape.constant(states.posts.clone());
    let c = tape.constant(states.words.clone());
    let mp = message_pass(&mut tape, q, c, &g.pw_edges(), &store, params.site(1))?;
    let att = tape.value(mp.attention[0]);
    println!("head 0 attention from posts to words:");
    for (e, &(p, w)) in g.pw_edges().iter().enumerate() {
        println!("  {} <- {:<7} {:.4}", g.posts[p], g.words[w], att.data()[e]);
    }
    Ok(())
}
