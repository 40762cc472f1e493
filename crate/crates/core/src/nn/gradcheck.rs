use super::{Mat, NodeId, ParamStore, Tape};
use crate::error::{Error, Result};

/// Result of comparing analytic gradients with central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter and flat index where the maximum occurred.
    pub worst: Option<(String, usize)>,
    pub entries: usize,
}

/// Checks every parameter entry of `store` against
/// `(f(θ+eps) − f(θ−eps)) / (2·eps)`, where `f` is the scalar node produced
/// by `build`. Relative error is `|a − n| / max(1e-8, |a| + |n|)`.
pub fn grad_check<F>(build: F, store: &ParamStore, eps: f64) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<NodeId>,
{
    if eps == 0.0 || !eps.is_finite() {
        return Err(Error::DegenerateStep);
    }
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let out = build(&mut t, s)?;
        let v = t.value(out);
        if v.shape() != (1, 1) {
            return Err(Error::NonScalarLoss {
                rows: v.rows(),
                cols: v.cols(),
            });
        }
        let x = v.data()[0];
        if !x.is_finite() {
            return Err(Error::NonFiniteLoss(x));
        }
        Ok(x)
    };

    let mut tape = Tape::new();
    let loss = build(&mut tape, store)?;
    let base = tape.value(loss).data().first().copied().unwrap_or(f64::NAN);
    if !base.is_finite() {
        return Err(Error::NonFiniteLoss(base));
    }
    let analytic = tape.backward(loss)?.for_params(&tape, store);

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        entries: 0,
    };
    let mut probe = store.clone();
    for (name, a) in &analytic {
        for i in 0..a.len() {
            let orig = store.get(name)?.data()[i];
            set(&mut probe, name, i, orig + eps)?;
            let up = eval(&probe)?;
            set(&mut probe, name, i, orig - eps)?;
            let down = eval(&probe)?;
            set(&mut probe, name, i, orig)?;

            let numeric = (up - down) / (2.0 * eps);
            let an = a.data()[i];
            let rel = (an - numeric).abs() / (an.abs() + numeric.abs()).max(1e-8);
            report.entries += 1;
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(rel);
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}

fn set(store: &mut ParamStore, name: &str, i: usize, v: f64) -> Result<()> {
    let m: &mut Mat = store.get_mut(name)?;
    m.data_mut()[i] = v;
    Ok(())
}
