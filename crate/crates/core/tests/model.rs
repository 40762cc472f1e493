use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trignet::fixtures::{tiny_config, tiny_setup, toy_dictionary};
use trignet::flow_gat::Flows;
use trignet::model::{
    evaluate, init_post_nodes, parse_dataset, train, LayerAttention, ModelConfig, TrigNet, UserExample,
};
use trignet::nn::{Mat, Tape};
use trignet::text::{EmbeddingProvider, PostLayerVectors};
use trignet::Error;

fn stub_net(cfg: ModelConfig) -> TrigNet {
    let provider = EmbeddingProvider::hash_stub(cfg.d, cfg.seed);
    TrigNet::new(cfg, toy_dictionary(), provider).unwrap()
}

fn small_config() -> ModelConfig {
    ModelConfig {
        d: 8,
        heads: 2,
        epochs: 3,
        batch_size: 2,
        ..ModelConfig::desk()
    }
}

fn users() -> Vec<UserExample> {
    vec![
        UserExample::new("a", &["I love my friends", "work is hard today"], vec![1, 0, 1, 0]),
        UserExample::new("b", &["thanks for the music", "we went to the party"], vec![0, 1, 0, 1]),
        UserExample::new("c", &["good work on the money", "happy home"], vec![1, 1, 0, 0]),
    ]
}

#[test]
fn probabilities_are_normalized() {
    let (net, user, store) = tiny_setup(0).unwrap();
    let p = net.predict_proba(&store, &user).unwrap();
    for t in 0..p.rows() {
        assert!((p.get(t, 0) + p.get(t, 1) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn wordless_single_post_is_a_fixed_point() {
    let net = stub_net(small_config());
    let user = net
        .prepare(&UserExample::new("solo", &["zzz qqq xyzzy"], vec![0, 1, 0, 1]))
        .unwrap();
    assert_eq!(user.graph.m(), 0);
    let store = net.init_params().unwrap();
    let mut tape = Tape::new();
    let fwd = net.forward(&mut tape, &store, &user, None).unwrap();
    assert_eq!(tape.value(fwd.user), tape.value(fwd.initial.posts));
}

#[test]
fn post_order_does_not_matter() {
    let net = stub_net(small_config());
    let store = net.init_params().unwrap();
    let a = UserExample::new(
        "u",
        &["I love work", "thanks friends", "money at home"],
        vec![1, 0, 1, 0],
    );
    let mut b = a.clone();
    b.posts.reverse();
    let pa = net.predict_proba(&store, &net.prepare(&a).unwrap()).unwrap();
    let pb = net.predict_proba(&store, &net.prepare(&b).unwrap()).unwrap();
    assert_eq!(pa, pb);
}

#[test]
fn loss_closed_forms() {
    let (net, user, store) = tiny_setup(0).unwrap();
    let mut tape = Tape::new();
    let fwd = net.forward(&mut tape, &store, &user, None).unwrap();
    let loss = net.loss(&mut tape, &fwd, &user.labels);
    assert!(tape.value(loss).data()[0] > 0.0);

    let mut t = Tape::new();
    let uniform = t.constant(Mat::filled(4, 2, 0.5));
    let l = t.neg_log_pick(uniform, &[0, 1, 0, 1]);
    assert!((t.value(l).data()[0] - 4.0 * 2f64.ln()).abs() < 1e-12);

    let exact = t.constant(Mat::from_rows(&[[1.0, 0.0], [0.0, 1.0]]));
    let l = t.neg_log_pick(exact, &[0, 1]);
    assert_eq!(t.value(l).data()[0], 0.0);
    let l = t.neg_log_pick(exact, &[1, 1]);
    assert!((t.value(l).data()[0] - 1e12f64.ln()).abs() < 1e-9);
}

#[test]
fn disabled_flows_ignore_edges() {
    let cfg = ModelConfig {
        flows: Flows::NONE,
        ..small_config()
    };
    let net = stub_net(cfg);
    let store = net.init_params().unwrap();
    let user = net.prepare(&users()[0]).unwrap();
    let mut rewired = user.clone();
    rewired.graph.wp_edges.clear();
    rewired.graph.wc_edges = vec![(0, 0)];
    assert_eq!(
        net.predict_proba(&store, &user).unwrap(),
        net.predict_proba(&store, &rewired).unwrap()
    );
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let net = stub_net(ModelConfig {
        lr: 0.0,
        ..small_config()
    });
    let set = net.prepare_all(&users()).unwrap();
    let before = net.init_params().unwrap();
    let after = train(&net, &set, &[]).unwrap().store;
    for (name, m) in before.iter() {
        assert_eq!(m, after.get(name).unwrap(), "{name}");
    }
    assert!(ModelConfig {
        lr: -1.0,
        ..small_config()
    }
    .validate()
    .is_err());
}

#[test]
fn training_is_deterministic() {
    let net = stub_net(small_config());
    let set = net.prepare_all(&users()).unwrap();
    let a = train(&net, &set, &set).unwrap();
    let b = train(&net, &set, &set).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.store, b.store);
    assert_eq!(a.history.len(), 3);
}

#[test]
fn early_stopping_restores_best_epoch() {
    let net = stub_net(ModelConfig {
        epochs: 30,
        patience: Some(2),
        ..small_config()
    });
    let set = net.prepare_all(&users()).unwrap();
    let out = train(&net, &set, &set).unwrap();
    let best = out.history[out.best_epoch - 1].val_f1.unwrap();
    assert!(out.history.iter().all(|h| h.val_f1.unwrap() <= best));
    assert_eq!(evaluate(&net, &out.store, &set).unwrap().average_f1, best);
}

#[test]
fn dropout_only_during_training() {
    let net = stub_net(ModelConfig {
        dropout: 0.5,
        ..small_config()
    });
    let store = net.init_params().unwrap();
    let user = net.prepare(&users()[1]).unwrap();
    assert_eq!(
        net.predict_proba(&store, &user).unwrap(),
        net.predict_proba(&store, &user).unwrap()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut tape = Tape::new();
    let fwd = net.forward(&mut tape, &store, &user, Some(&mut rng)).unwrap();
    assert_ne!(tape.value(fwd.probs), &net.predict_proba(&store, &user).unwrap());
}

#[test]
fn empty_sets_are_errors() {
    let net = stub_net(small_config());
    let store = net.init_params().unwrap();
    assert!(matches!(train(&net, &[], &[]), Err(Error::EmptyDataset)));
    assert!(matches!(evaluate(&net, &store, &[]), Err(Error::EmptyDataset)));
}

#[test]
fn layer_attention_combinations() {
    let v = vec![0.5, -1.0, 2.0];
    let same = PostLayerVectors {
        layers: [v.clone(), v.clone(), v.clone()],
    };
    let out = init_post_nodes(
        std::slice::from_ref(&same),
        &LayerAttention {
            logits: [3.0, -1.0, 0.2],
        },
    )
    .unwrap();
    for (a, b) in out.row(0).iter().zip(&v) {
        assert!((a - b).abs() < 1e-12);
    }
    let basis = PostLayerVectors {
        layers: [vec![3.0, 0.0], vec![0.0, 6.0], vec![9.0, 3.0]],
    };
    let mean = init_post_nodes(&[basis], &LayerAttention::uniform()).unwrap();
    assert!((mean.get(0, 0) - 4.0).abs() < 1e-12 && (mean.get(0, 1) - 3.0).abs() < 1e-12);
}

#[test]
fn dataset_schema() {
    let text = r#"{"id": "u1", "posts": ["hello there", "bye"], "labels": {"IE": 1, "SN": 0, "TF": 1, "PJ": 0}}"#;
    let users = parse_dataset(text.as_bytes()).unwrap();
    assert_eq!(users[0].labels, vec![1, 0, 1, 0]);
    assert_eq!(users[0].posts[1].id, "u1:p2");
    assert!(parse_dataset(r#"{"id": "u1", "posts": [], "labels": {}}"#.as_bytes()).is_err());
}

#[test]
fn tiny_config_shape() {
    let cfg = tiny_config();
    assert_eq!((cfg.d, cfg.heads, cfg.layers, cfg.dropout), (8, 2, 1, 0.0));
    let (_, user, _) = tiny_setup(0).unwrap();
    assert_eq!((user.graph.r(), user.graph.m(), user.graph.n()), (3, 6, 3));
}
