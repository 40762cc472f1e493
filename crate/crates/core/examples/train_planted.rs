//! Trains the desk-scale model on the planted fixtures and reports Macro-F1,
//! the learned layer weights, and the effect of removing each planted
//! category.
//!
//! ```text
//! cargo run --release --example train_planted
//! ```

use trignet::fixtures::{planted_config, planted_embeddings, planted_users, toy_dictionary, PlantedSpec, PLANTED};
use trignet::model::{evaluate, report_layer_weights, train, LayerAttention, ModelConfig, TrigNet, TRAITS};

fn run(cfg: ModelConfig) -> trignet::Result<(Vec<f64>, f64, f64, LayerAttention)> {
    let spec = PlantedSpec::default();
    let (train_users, val_users) = planted_users(&spec);
    let all: Vec<_> = train_users.iter().chain(&val_users).cloned().collect();
    let provider = planted_embeddings(&all, cfg.d, &spec)?;
    let net = TrigNet::new(cfg, toy_dictionary(), provider)?;
    let train_set = net.prepare_all(&train_users)?;
    let val_set = net.prepare_all(&val_users)?;
    let outcome = train(&net, &train_set, &val_set)?;
    let train_f1 = evaluate(&net, &outcome.store, &train_set)?.average_f1;
    let val = evaluate(&net, &outcome.store, &val_set)?;
    Ok((
        val.per_trait_f1,
        train_f1,
        val.average_f1,
        LayerAttention::from_store(&outcome.store)?,
    ))
}

fn main() -> trignet::Result<()> {
    let (per_trait, train_f1, val_f1, attn) = run(planted_config())?;
    println!("train average Macro-F1 {train_f1:.4}  validation {val_f1:.4}");
    for (t, f) in TRAITS.iter().zip(&per_trait) {
        println!("  {t} {f:.4}");
    }
    println!("layer weights {:?}", report_layer_weights(&attn).weights);

    for (t, cat) in PLANTED.iter().enumerate() {
        let mut cfg = planted_config();
        cfg.drop_category(cat)?;
        let (ablated, ..) = run(cfg)?;
        println!(
            "without {cat:<8} {} validation F1 {:.4} -> {:.4}",
            TRAITS[t], per_trait[t], ablated[t]
        );
    }
    Ok(())
}
