//! Named parameters, Adam state, and the text checkpoint format.
//!
//! Checkpoint layout (UTF-8, one record per line, values row-major and
//! printed with round-trip precision):
//!
//! ```text
//! trignet-checkpoint 1
//! meta <single-line JSON>
//! step <adam steps taken>
//! param <name> <rows> <cols>
//! value <rows*cols floats>
//! m <rows*cols floats>
//! v <rows*cols floats>
//! ...
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::Mat;
use crate::error::{Error, Result};

const CHECKPOINT_MAGIC: &str = "trignet-checkpoint 1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    /// `lr = 0` is accepted so a run can be checked for a no-op update.
    pub fn validate(&self) -> Result<()> {
        let ok = |b: f64| b > 0.0 && b < 1.0;
        if !(ok(self.beta1) && ok(self.beta2)) {
            return Err(Error::Config(format!(
                "Adam betas must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "Adam needs lr >= 0 and eps > 0, got lr={} eps={}",
                self.lr, self.eps
            )));
        }
        Ok(())
    }
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: Mat,
    m: Mat,
    v: Mat,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, Entry>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces a parameter, resetting its Adam moments.
    pub fn insert(&mut self, name: impl Into<String>, value: Mat) {
        let (r, c) = value.shape();
        self.entries.insert(
            name.into(),
            Entry {
                value,
                m: Mat::zeros(r, c),
                v: Mat::zeros(r, c),
            },
        );
    }

    pub fn get(&self, name: &str) -> Result<&Mat> {
        self.entries
            .get(name)
            .map(|e| &e.value)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Mat> {
        self.entries
            .get_mut(name)
            .map(|e| &mut e.value)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Mat)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), &e.value))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of learnable scalars.
    pub fn num_values(&self) -> usize {
        self.entries.values().map(|e| e.value.len()).sum()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update over every parameter. A parameter
    /// missing from `grads` is treated as having zero gradient.
    pub fn adam_step(&mut self, grads: &BTreeMap<String, Mat>, hyper: &AdamHyper) -> Result<()> {
        hyper.validate()?;
        for (name, g) in grads {
            let e = self
                .entries
                .get(name)
                .ok_or_else(|| Error::UnknownParam(name.clone()))?;
            if e.value.shape() != g.shape() {
                return Err(Error::GradShape {
                    name: name.clone(),
                    expected: e.value.shape(),
                    got: g.shape(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - hyper.beta1.powi(t);
        let bc2 = 1.0 - hyper.beta2.powi(t);
        for (name, e) in self.entries.iter_mut() {
            let Some(g) = grads.get(name) else {
                // Zero gradient still decays the moments.
                e.m.scale_assign(hyper.beta1);
                e.v.scale_assign(hyper.beta2);
                apply(e, hyper, bc1, bc2);
                continue;
            };
            for ((m, v), &gi) in e.m.data_mut().iter_mut().zip(e.v.data_mut().iter_mut()).zip(g.data()) {
                *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * gi;
                *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * gi * gi;
            }
            apply(e, hyper, bc1, bc2);
        }
        Ok(())
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W, meta: &serde_json::Value) -> Result<()> {
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "meta {}", serde_json::to_string(meta)?)?;
        writeln!(w, "step {}", self.step)?;
        for (name, e) in &self.entries {
            let (r, c) = e.value.shape();
            writeln!(w, "param {name} {r} {c}")?;
            for (tag, mat) in [("value", &e.value), ("m", &e.m), ("v", &e.v)] {
                write!(w, "{tag}")?;
                for x in mat.data() {
                    write!(w, " {x:?}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<(Self, serde_json::Value)> {
        let lines: Vec<String> = r.lines().collect::<std::io::Result<_>>()?;
        let err = |line: usize, msg: &str| Error::Checkpoint {
            line,
            msg: msg.to_string(),
        };
        let mut it = lines.iter().enumerate().map(|(i, l)| (i + 1, l.as_str()));
        match it.next() {
            Some((_, l)) if l == CHECKPOINT_MAGIC => {}
            _ => return Err(err(1, "missing checkpoint header")),
        }
        let (ln, meta_line) = it.next().ok_or_else(|| err(2, "missing meta line"))?;
        let meta = meta_line
            .strip_prefix("meta ")
            .ok_or_else(|| err(ln, "expected `meta`"))?;
        let meta: serde_json::Value = serde_json::from_str(meta)?;
        let (ln, step_line) = it.next().ok_or_else(|| err(3, "missing step line"))?;
        let step = step_line
            .strip_prefix("step ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(ln, "expected `step <n>`"))?;

        let mut store = ParamStore {
            entries: BTreeMap::new(),
            step,
        };
        while let Some((ln, line)) = it.next() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 || f[0] != "param" {
                return Err(err(ln, "expected `param <name> <rows> <cols>`"));
            }
            let rows: usize = f[2].parse().map_err(|_| err(ln, "bad rows"))?;
            let cols: usize = f[3].parse().map_err(|_| err(ln, "bad cols"))?;
            let mut read = |tag: &str| -> Result<Mat> {
                let (ln, line) = it.next().ok_or_else(|| err(ln + 1, "truncated parameter"))?;
                let rest = line
                    .strip_prefix(tag)
                    .ok_or_else(|| err(ln, &format!("expected `{tag}` row")))?;
                let vals: Vec<f64> = rest
                    .split_whitespace()
                    .map(|s| s.parse::<f64>().map_err(|_| err(ln, "bad float")))
                    .collect::<Result<_>>()?;
                if vals.len() != rows * cols {
                    return Err(err(ln, "wrong value count"));
                }
                Ok(Mat::from_vec(rows, cols, vals))
            };
            let value = read("value")?;
            let m = read("m")?;
            let v = read("v")?;
            store.entries.insert(f[1].to_string(), Entry { value, m, v });
        }
        Ok((store, meta))
    }
}

fn apply(e: &mut Entry, hyper: &AdamHyper, bc1: f64, bc2: f64) {
    for ((p, &m), &v) in e.value.data_mut().iter_mut().zip(e.m.data()).zip(e.v.data()) {
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        *p -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grads(name: &str, g: Mat) -> BTreeMap<String, Mat> {
        BTreeMap::from([(name.to_string(), g)])
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = ParamStore::new();
        s.insert("a", Mat::from_rows(&[[1.0, -2.0]]));
        let before = s.get("a").unwrap().clone();
        s.adam_step(&grads("a", Mat::zeros(1, 2)), &AdamHyper::default())
            .unwrap();
        assert_eq!(s.get("a").unwrap(), &before);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m̂ = 1, v̂ = 1 after one bias-corrected step with g = 1.
        let mut s = ParamStore::new();
        s.insert("x", Mat::scalar(2.0));
        let h = AdamHyper::with_lr(0.1);
        s.adam_step(&grads("x", Mat::scalar(1.0)), &h).unwrap();
        let expected = 2.0 - 0.1 * 1.0 / (1.0 + 1e-8);
        assert!((s.get("x").unwrap().data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_names_param() {
        let mut s = ParamStore::new();
        s.insert("w.q", Mat::zeros(2, 2));
        let err = s
            .adam_step(&grads("w.q", Mat::zeros(1, 2)), &AdamHyper::default())
            .unwrap_err();
        assert!(err.to_string().contains("w.q"), "{err}");
        assert_eq!(s.step(), 0);
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut s = ParamStore::new();
            s.insert("x", Mat::from_rows(&[[0.3, -0.7]]));
            for i in 0..10 {
                let g = Mat::from_rows(&[[i as f64 * 0.1, 1.0 / (i + 1) as f64]]);
                s.adam_step(&grads("x", g), &AdamHyper::default()).unwrap();
            }
            s
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn bad_hyper() {
        let h = AdamHyper {
            beta1: 1.0,
            ..AdamHyper::default()
        };
        assert!(h.validate().is_err());
        assert!(AdamHyper::with_lr(-1.0).validate().is_err());
        assert!(AdamHyper::with_lr(0.0).validate().is_ok());
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut s = ParamStore::new();
        s.insert("a", Mat::from_rows(&[[0.1, 1e-300], [-3.5, 2.0 / 3.0]]));
        s.insert("b", Mat::scalar(f64::MIN_POSITIVE));
        s.adam_step(&grads("a", Mat::filled(2, 2, 0.25)), &AdamHyper::default())
            .unwrap();
        let meta = serde_json::json!({"seed": 7});
        let mut buf = Vec::new();
        s.write_checkpoint(&mut buf, &meta).unwrap();
        let (back, meta_back) = ParamStore::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        assert_eq!(meta_back, meta);
    }

    #[test]
    fn checkpoint_errors() {
        assert!(ParamStore::read_checkpoint("nope\n".as_bytes()).is_err());
        let bad = "trignet-checkpoint 1\nmeta {}\nstep 0\nparam a 1 2\nvalue 1\nm 0 0\nv 0 0\n";
        assert!(ParamStore::read_checkpoint(bad.as_bytes()).is_err());
    }
}
