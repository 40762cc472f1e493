mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trignet::cost::{compare, count_mp, flow_report, vanilla_report, GraphShape, BYTES_PER_VALUE, EDGE_SCORE_FLOPS};
use trignet::flow_gat::{fgat_layer, vanilla_gat, vanilla_params, FgatParams, Flows, MpParams};
use trignet::nn::{ParamStore, Tape};

const ALL_FLOWS: [Flows; 4] = [Flows::BOTH, Flows::WORD_ONLY, Flows::CATEGORY_ONLY, Flows::NONE];

/// Tape counters for `layers` flow GAT layers: (flops, activation values, params).
fn measure_flow(seed: u64, layers: usize, flows: Flows, tied: bool) -> (GraphShape, u64, u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_graph(&mut rng, 16, 0.3);
    let (d, heads) = random_width(&mut rng);
    let mut store = ParamStore::new();
    let params: Vec<_> = (0..layers)
        .map(|l| FgatParams::new(&format!("fgat{l}"), heads, tied))
        .collect();
    for p in &params {
        p.init(&mut store, d, &mut rng).unwrap();
    }
    let states = random_states(&g, d, &mut rng);
    let mut tape = Tape::new();
    let mut s = states.to_tape(&mut tape);
    for p in &params {
        s = fgat_layer(&mut tape, s, &g, &store, p, flows).unwrap();
    }
    (
        GraphShape::of(&g, d, heads),
        tape.flops(),
        tape.activation_values(),
        store.num_values() as u64,
    )
}

#[test]
fn flow_counts_match_tape_on_small_graphs() {
    for seed in 0..40 {
        for flows in ALL_FLOWS {
            let layers = 1 + (seed % 2) as usize;
            let tied = seed % 3 == 0;
            let (shape, flops, acts, params) = measure_flow(seed, layers, flows, tied);
            assert!(shape.nodes() <= 50);
            let report = flow_report(&shape, layers as u64, flows, tied);
            assert_eq!(report.flops, flops, "seed {seed} {flows:?}");
            assert_eq!(report.peak_mem, acts * BYTES_PER_VALUE, "seed {seed} {flows:?}");
            assert_eq!(report.params, params, "seed {seed}");
        }
    }
}

#[test]
fn vanilla_counts_match_tape_on_small_graphs() {
    for seed in 0..40 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, 16, 0.3);
        let (d, heads) = random_width(&mut rng);
        let layers = rng.gen_range(1..=4);
        let params = vanilla_params(layers, heads);
        let mut store = ParamStore::new();
        for p in &params {
            p.init(&mut store, d, &mut rng).unwrap();
        }
        let flat = random_states(&g, d, &mut rng).flatten();
        let mut tape = Tape::new();
        let h = tape.constant(flat);
        vanilla_gat(&mut tape, h, &g, &store, &params).unwrap();
        let report = vanilla_report(&GraphShape::of(&g, d, heads), layers as u64);
        assert_eq!(report.flops, tape.flops(), "seed {seed}");
        assert_eq!(
            report.peak_mem,
            tape.activation_values() * BYTES_PER_VALUE,
            "seed {seed}"
        );
        assert_eq!(report.params, store.num_values() as u64);
    }
}

#[test]
fn empty_edge_set_has_no_message_terms() {
    let (d, k, a, b) = (8, 2, 3, 5);
    let per_edge = k * (EDGE_SCORE_FLOPS + 2 * d / k);
    assert_eq!(count_mp(d, k, a, b, 1).flops - count_mp(d, k, a, b, 0).flops, per_edge);
}

#[test]
fn wordless_graph_costs_no_edges() {
    let s = GraphShape {
        r: 4,
        m: 0,
        n: 3,
        e_wp: 0,
        e_wc: 0,
        d: 8,
        heads: 2,
    };
    let c = compare(&s, 1, 4);
    let projection_only = |a, b| count_mp(8, 2, a, b, 0).flops;
    assert_eq!(c.vanilla.flops, 4 * projection_only(7, 7));
    assert!(c.flow.flops < c.vanilla.flops);
}

#[test]
fn per_site_parameter_count() {
    assert_eq!(MpParams::num_values(768, 12), 12 * (3 * 768 * 64 + 2 * 64));
}

fn shape_strategy() -> impl Strategy<Value = GraphShape> {
    (
        1u64..60,
        0u64..60,
        0u64..20,
        0u64..=1000,
        0u64..=1000,
        1u64..=8,
        1u64..=4,
    )
        .prop_map(|(r, m, n, wp, wc, c, heads)| GraphShape {
            r,
            m,
            n,
            e_wp: wp.min(r * m),
            e_wc: wc.min(m * n),
            d: c * heads,
            heads,
        })
}

proptest! {
    #[test]
    fn flops_monotone_in_every_dimension(s in shape_strategy(), layers in 1u64..4) {
        let f = |s: &GraphShape, l: u64| flow_report(s, l, Flows::BOTH, false).flops;
        let v = |s: &GraphShape, l: u64| vanilla_report(s, l).flops;
        let base = (f(&s, layers), v(&s, layers));
        let grown = [
            GraphShape { r: s.r + 1, ..s },
            GraphShape { m: s.m + 1, ..s },
            GraphShape { n: s.n + 1, ..s },
            GraphShape { e_wp: s.e_wp + 1, r: s.r + 1, m: s.m + 1, ..s },
            GraphShape { e_wc: s.e_wc + 1, m: s.m + 1, n: s.n + 1, ..s },
            GraphShape { d: s.d + s.heads, ..s },
        ];
        for g in &grown {
            prop_assert!(f(g, layers) >= base.0);
            prop_assert!(v(g, layers) >= base.1);
        }
        prop_assert!(f(&s, layers + 1) >= base.0);
        prop_assert!(v(&s, layers + 1) >= base.1);
    }

    #[test]
    fn flow_is_cheaper_than_four_vanilla_layers(s in shape_strategy()) {
        prop_assume!(s.e_wp + s.e_wc >= 1);
        let c = compare(&s, 1, 4);
        prop_assert!(c.flow.flops < c.vanilla.flops);
    }

    #[test]
    fn count_is_linear_in_edges(s in shape_strategy(), e in 0u64..500) {
        let one = count_mp(s.d, s.heads, s.r, s.m, e + 1).flops - count_mp(s.d, s.heads, s.r, s.m, e).flops;
        prop_assert_eq!(one, s.heads * (EDGE_SCORE_FLOPS + 2 * (s.d / s.heads)));
    }
}
