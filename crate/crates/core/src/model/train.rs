use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{EvalReport, PreparedUser, TrigNet};
use crate::error::{Error, Result};
use crate::nn::{AdamHyper, Mat, ParamStore, Tape};
use crate::text::stable_hash;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-user training loss, with dropout active.
    pub loss: f64,
    pub train_f1: f64,
    pub val_f1: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub store: ParamStore,
    pub history: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Per-user forward/backward over mini-batches with gradient accumulation
/// and one Adam step per batch. The batch loss is the mean user loss.
pub fn train(net: &TrigNet, train_set: &[PreparedUser], val_set: &[PreparedUser]) -> Result<TrainOutcome> {
    let store = net.init_params()?;
    train_from(net, store, train_set, val_set)
}

pub fn train_from(
    net: &TrigNet,
    mut store: ParamStore,
    train_set: &[PreparedUser],
    val_set: &[PreparedUser],
) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let cfg = net.config();
    let hyper = AdamHyper::with_lr(cfg.lr);
    hyper.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(cfg.seed, &["train"]));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut acc: BTreeMap<String, Mat> = BTreeMap::new();
            for &i in batch {
                let user = &train_set[i];
                let mut tape = Tape::new();
                let fwd = net.forward(&mut tape, &store, user, Some(&mut rng))?;
                let loss = net.loss(&mut tape, &fwd, &user.labels);
                let value = tape.value(loss).data()[0];
                if !value.is_finite() {
                    return Err(Error::NonFiniteLoss(value));
                }
                total_loss += value;
                let scaled = tape.scale(loss, scale);
                let grads = tape.backward(scaled)?.for_params(&tape, &store);
                for (name, g) in grads {
                    match acc.get_mut(&name) {
                        Some(a) => a.add_assign(&g),
                        None => {
                            acc.insert(name, g);
                        }
                    }
                }
            }
            store.adam_step(&acc, &hyper)?;
        }

        let train_f1 = evaluate(net, &store, train_set)?.average_f1;
        let val_f1 = if val_set.is_empty() {
            None
        } else {
            Some(evaluate(net, &store, val_set)?.average_f1)
        };
        history.push(EpochRecord {
            epoch,
            loss: total_loss / train_set.len() as f64,
            train_f1,
            val_f1,
        });

        if let (Some(patience), Some(score)) = (cfg.patience, val_f1) {
            let improved = best.as_ref().is_none_or(|(b, _, _)| score > *b);
            if improved {
                best = Some((score, epoch, store.clone()));
            } else if epoch - best.as_ref().map_or(0, |b| b.1) >= patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (store, best_epoch) = match best {
        Some((_, epoch, kept)) => (kept, epoch),
        None => (store, history.len()),
    };
    Ok(TrainOutcome {
        store,
        history,
        best_epoch,
        stopped_early,
    })
}

/// Macro-F1 per trait and averaged, with users evaluated in parallel.
pub fn evaluate(net: &TrigNet, store: &ParamStore, users: &[PreparedUser]) -> Result<EvalReport> {
    if users.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predictions = users
        .par_iter()
        .map(|u| net.predict(store, u))
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<Vec<usize>> = users.iter().map(|u| u.labels.clone()).collect();
    Ok(EvalReport::from_predictions(&predictions, &labels, net.config().traits))
}
