//! Compares analytic FLOPs and activation memory of one flow GAT layer with
//! four vanilla GAT layers on the full-scale graph shape, then confirms the
//! counts against the tape counters on a small graph.
//!
//! ```text
//! cargo run --example profile_cost
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trignet::cost::{compare, flow_report, GraphShape, BYTES_PER_VALUE};
use trignet::fixtures::tiny_setup;
use trignet::flow_gat::{fgat_layer, FgatParams, Flows, NodeStates};
use trignet::nn::{Mat, ParamStore, Tape};

fn main() -> trignet::Result<()> {
    let c = compare(&GraphShape::full_scale(), 1, 4);
    print!("{}", c.table());

    let (_, user, _) = tiny_setup(0)?;
    let g = &user.graph;
    let (d, heads) = (8, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    let params = FgatParams::new("fgat0", heads, false);
    params.init(&mut store, d, &mut rng)?;
    let states = NodeStates {
        posts: Mat::uniform(g.r(), d, 1.0, &mut rng),
        words: Mat::uniform(g.m(), d, 1.0, &mut rng),
        cats: Mat::uniform(g.n(), d, 1.0, &mut rng),
    };
    let mut tape = Tape::new();
    let s = states.to_tape(&mut tape);
    fgat_layer(&mut tape, s, g, &store, &params, Flows::BOTH)?;
    let report = flow_report(&GraphShape::of(g, d, heads), 1, Flows::BOTH, false);
    println!(
        "tiny graph: analytic {} FLOPs / {} B, tape {} FLOPs / {} B",
        report.flops,
        report.peak_mem,
        tape.flops(),
        tape.activation_values() * BYTES_PER_VALUE
    );
    Ok(())
}
