//! Builds the word/post/category graph of the two-post sample user and
//! prints it as JSON.
//!
//! ```text
//! cargo run --example sample_graph
//! ```

use trignet::fixtures::{toy_dictionary, SAMPLE_CATEGORIES, SAMPLE_POSTS};
use trignet::graph::{build_graph, GraphExport, GraphLimits};
use trignet::text::tokenize;

fn main() -> trignet::Result<()> {
    let dict = toy_dictionary();
    let sel = dict.select(SAMPLE_CATEGORIES)?;
    let posts: Vec<_> = SAMPLE_POSTS.iter().map(|p| tokenize(p, 70)).collect();
    let ids = vec!["sample:p1".to_string(), "sample:p2".to_string()];
    let limits = GraphLimits {
        max_posts: 50,
        max_nodes: 500,
    };
    let g = build_graph(&ids, &posts, &dict, &sel, limits)?;
    let export = GraphExport::new("sample", &g, &dict);
    println!("{}", serde_json::to_string_pretty(&export).expect("serializable"));
    Ok(())
}
