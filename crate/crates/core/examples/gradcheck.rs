//! Compares reverse-mode gradients of the full model loss with central
//! differences on the tiny configuration.
//!
//! ```text
//! cargo run --example gradcheck
//! ```

use trignet::fixtures::tiny_setup;
use trignet::nn::grad_check;

fn main() -> trignet::Result<()> {
    let (net, user, store) = tiny_setup(0)?;
    for eps in [1e-3, 1e-4, 1e-5] {
        let check = grad_check(
            |tape, s| {
                let fwd = net.forward(tape, s, &user, None)?;
                Ok(net.loss(tape, &fwd, &user.labels))
            },
            &store,
            eps,
        )?;
        println!(
            "eps {eps:.0e}: max relative error {:.3e} over {} entries (worst {:?})",
            check.max_rel_error, check.entries, check.worst
        );
    }
    Ok(())
}
