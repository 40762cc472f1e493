//! JSON-lines user datasets.
//!
//! One user per line:
//!
//! ```text
//! {"id": "u1", "posts": ["...", "..."], "labels": {"IE": 0, "SN": 1, "TF": 0, "PJ": 1}}
//! ```
//!
//! Label keys map to trait indices in [`TRAITS`] order. Post `i` (0-based)
//! of user `u` gets the id `u:p{i+1}`, which is how post-layer vectors are
//! keyed in embedding files.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TRAITS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserPost {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserExample {
    pub id: String,
    pub posts: Vec<UserPost>,
    /// One 0/1 label per trait.
    pub labels: Vec<usize>,
}

impl UserExample {
    /// Assigns post ids from position.
    pub fn new(id: impl Into<String>, posts: &[&str], labels: Vec<usize>) -> Self {
        let id = id.into();
        let posts = posts
            .iter()
            .enumerate()
            .map(|(i, t)| UserPost {
                id: post_id(&id, i),
                text: t.to_string(),
            })
            .collect();
        Self { id, posts, labels }
    }
}

pub fn post_id(user: &str, index: usize) -> String {
    format!("{user}:p{}", index + 1)
}

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    posts: Vec<String>,
    labels: BTreeMap<String, u8>,
}

pub fn parse_dataset<R: BufRead>(source: R) -> Result<Vec<UserExample>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Dataset { line: i + 1, msg };
        let rec: Record = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        if rec.posts.is_empty() {
            return Err(err(format!("user {} has no posts", rec.id)));
        }
        let mut labels = Vec::with_capacity(TRAITS.len());
        for key in TRAITS {
            match rec.labels.get(key) {
                Some(&v @ (0 | 1)) => labels.push(v as usize),
                Some(v) => return Err(err(format!("label {key} must be 0 or 1, got {v}"))),
                None => return Err(err(format!("missing label {key}"))),
            }
        }
        if let Some(k) = rec.labels.keys().find(|k| !TRAITS.contains(&k.as_str())) {
            return Err(err(format!("unknown label {k}")));
        }
        let posts: Vec<&str> = rec.posts.iter().map(String::as_str).collect();
        out.push(UserExample::new(rec.id, &posts, labels));
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<UserExample>> {
    let file = std::fs::File::open(path)?;
    parse_dataset(std::io::BufReader::new(file))
}

pub fn write_dataset<W: Write>(mut w: W, users: &[UserExample]) -> Result<()> {
    for u in users {
        let rec = Record {
            id: u.id.clone(),
            posts: u.posts.iter().map(|p| p.text.clone()).collect(),
            labels: TRAITS
                .iter()
                .zip(&u.labels)
                .map(|(k, &v)| (k.to_string(), v as u8))
                .collect(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let users = vec![UserExample::new("u1", &["hello there", "bye"], vec![0, 1, 1, 0])];
        let mut buf = Vec::new();
        write_dataset(&mut buf, &users).unwrap();
        let back = parse_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, users);
        assert_eq!(back[0].posts[1].id, "u1:p2");
    }

    #[test]
    fn bad_records() {
        let cases = [
            r#"{"id":"u","posts":[],"labels":{"IE":0,"SN":0,"TF":0,"PJ":0}}"#,
            r#"{"id":"u","posts":["x"],"labels":{"IE":0,"SN":0,"TF":0}}"#,
            r#"{"id":"u","posts":["x"],"labels":{"IE":2,"SN":0,"TF":0,"PJ":0}}"#,
            r#"{"id":"u","posts":["x"],"labels":{"IE":0,"SN":0,"TF":0,"PJ":0,"XY":1}}"#,
            "not json",
        ];
        for c in cases {
            let err = parse_dataset(c.as_bytes()).unwrap_err();
            assert!(matches!(err, Error::Dataset { line: 1, .. }), "{c}: {err}");
        }
    }
}
