use serde::Serialize;

/// Counts for one binary trait, with class 1 as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, predicted: usize, actual: usize) {
        match (predicted, actual) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    /// `2TP / (2TP + FP + FN)`; 0 when the denominator is 0.
    pub fn f1_positive(&self) -> f64 {
        f1(self.tp, self.fp, self.fn_)
    }

    /// F1 of class 0, treating it as the positive class.
    pub fn f1_negative(&self) -> f64 {
        f1(self.tn, self.fn_, self.fp)
    }

    pub fn macro_f1(&self) -> f64 {
        0.5 * (self.f1_positive() + self.f1_negative())
    }
}

fn f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_trait_f1: Vec<f64>,
    pub average_f1: f64,
    pub confusion: Vec<Confusion>,
}

impl EvalReport {
    pub fn from_confusion(confusion: Vec<Confusion>) -> Self {
        let per_trait_f1: Vec<f64> = confusion.iter().map(Confusion::macro_f1).collect();
        let average_f1 = if per_trait_f1.is_empty() {
            0.0
        } else {
            per_trait_f1.iter().sum::<f64>() / per_trait_f1.len() as f64
        };
        Self {
            per_trait_f1,
            average_f1,
            confusion,
        }
    }

    /// `predictions[u][t]` against `labels[u][t]`.
    pub fn from_predictions(predictions: &[Vec<usize>], labels: &[Vec<usize>], traits: usize) -> Self {
        let mut confusion = vec![Confusion::default(); traits];
        for (p, l) in predictions.iter().zip(labels) {
            for t in 0..traits {
                confusion[t].add(p[t], l[t]);
            }
        }
        Self::from_confusion(confusion)
    }
}
