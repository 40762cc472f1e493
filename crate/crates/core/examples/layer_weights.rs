//! Shows how the three encoder-layer vectors of a post are combined, before
//! and after a short training run on the planted fixtures.
//!
//! ```text
//! cargo run --example layer_weights
//! ```

use trignet::fixtures::{planted_config, planted_embeddings, planted_users, toy_dictionary, PlantedSpec};
use trignet::model::{init_post_nodes, report_layer_weights, train, LayerAttention, ModelConfig, TrigNet};
use trignet::text::PostLayerVectors;

fn main() -> trignet::Result<()> {
    let uniform = LayerAttention::uniform();
    let post = PostLayerVectors {
        layers: [vec![3.0, 0.0], vec![0.0, 6.0], vec![9.0, 3.0]],
    };
    let h = init_post_nodes(std::slice::from_ref(&post), &uniform)?;
    println!("initial weights {:?}, post node {:?}", uniform.weights(), h.row(0));

    let spec = PlantedSpec::default();
    let (train_users, val_users) = planted_users(&spec);
    let all: Vec<_> = train_users.iter().chain(&val_users).cloned().collect();
    let cfg = ModelConfig {
        epochs: 40,
        ..planted_config()
    };
    let provider = planted_embeddings(&all, cfg.d, &spec)?;
    let net = TrigNet::new(cfg, toy_dictionary(), provider)?;
    let out = train(&net, &net.prepare_all(&train_users)?, &net.prepare_all(&val_users)?)?;
    let report = report_layer_weights(&LayerAttention::from_store(&out.store)?);
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(())
}
