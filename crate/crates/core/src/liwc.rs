//! LIWC-style category dictionaries.
//!
//! The on-disk layout is the classic two-section percent-delimited format:
//!
//! ```text
//! %
//! 1	function	main
//! 2	affect	main
//! 31	posemo	sub
//! %
//! love	2 31
//! hungr*	2
//! ```
//!
//! The first section lists categories as `id<TAB>name<TAB>main|sub`. The
//! second lists entries as `word<TAB>id id ...`. An entry ending in `*` is a
//! stem and matches every token that starts with it. Everything is
//! lowercased on the way in, so lookups are case-insensitive as long as the
//! caller lowercases the query token.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, Result};

pub type CategoryId = u32;

/// The nine LIWC main categories followed by the six personal-concern
/// subcategories. Order defines category-node indices.
pub const DEFAULT_CATEGORY_NAMES: [&str; 15] = [
    "function",
    "affect",
    "social",
    "cognitive processes",
    "perceptual processes",
    "biological processes",
    "drives",
    "relativity",
    "informal language",
    "work",
    "leisure",
    "home",
    "money",
    "religion",
    "death",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LiwcCategory {
    pub id: CategoryId,
    pub name: String,
    pub is_main: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LiwcDictionary {
    categories: BTreeMap<CategoryId, LiwcCategory>,
    exact: HashMap<String, BTreeSet<CategoryId>>,
    // Stems keyed by the stem text (without `*`); a token is matched by every
    // stem that is one of its prefixes.
    stems: HashMap<String, BTreeSet<CategoryId>>,
    longest_stem: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CategorySelection {
    pub selected: Vec<String>,
    pub resolved: Vec<CategoryId>,
}

impl CategorySelection {
    pub fn len(&self) -> usize {
        self.resolved.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resolved.is_empty()
    }

    /// Node index of a category id within this selection.
    pub fn index_of(&self, id: CategoryId) -> Option<usize> {
        self.resolved.iter().position(|&c| c == id)
    }
}

impl LiwcDictionary {
    /// Parses the two-section dictionary format from any buffered reader.
    pub fn parse<R: BufRead>(source: R) -> Result<Self> {
        let mut dict = LiwcDictionary::default();
        let mut names: HashMap<String, CategoryId> = HashMap::new();
        // 0 = before first `%`, 1 = category block, 2 = entries.
        let mut section = 0;

        for (i, line) in source.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if trimmed == "%" {
                section += 1;
                if section > 2 {
                    return Err(dict_err(lineno, "unexpected third `%` delimiter"));
                }
                continue;
            }
            match section {
                0 => return Err(dict_err(lineno, "malformed header: expected `%`")),
                1 => {
                    let cat = parse_category(trimmed, lineno)?;
                    if dict.categories.contains_key(&cat.id) {
                        return Err(dict_err(lineno, format!("duplicate category id {}", cat.id)));
                    }
                    if names.insert(cat.name.clone(), cat.id).is_some() {
                        return Err(dict_err(lineno, format!("duplicate category name {}", cat.name)));
                    }
                    dict.categories.insert(cat.id, cat);
                }
                _ => dict.add_entry(trimmed, lineno)?,
            }
        }
        if section < 2 {
            return Err(dict_err(0, "malformed header: category block not closed by `%`"));
        }
        Ok(dict)
    }

    pub fn parse_str(source: &str) -> Result<Self> {
        Self::parse(source.as_bytes())
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(file))
    }

    fn add_entry(&mut self, line: &str, lineno: usize) -> Result<()> {
        let mut cols = line.split('\t');
        let word = cols.next().unwrap_or("").trim().to_lowercase();
        let ids_col: Vec<&str> = cols.collect();
        if word.is_empty() {
            return Err(dict_err(lineno, "empty entry"));
        }
        let mut ids = BTreeSet::new();
        for tok in ids_col.iter().flat_map(|c| c.split_whitespace()) {
            let id: CategoryId = tok
                .parse()
                .map_err(|_| dict_err(lineno, format!("bad category id `{tok}`")))?;
            if !self.categories.contains_key(&id) {
                return Err(dict_err(lineno, format!("unknown category id {id}")));
            }
            ids.insert(id);
        }
        if ids.is_empty() {
            return Err(dict_err(lineno, format!("entry `{word}` has no categories")));
        }

        let (stem, is_stem) = match word.strip_suffix('*') {
            Some(s) => (s.to_string(), true),
            None => (word, false),
        };
        if stem.contains('*') {
            return Err(dict_err(lineno, "`*` is only allowed as the final character"));
        }
        if is_stem {
            if stem.is_empty() {
                return Err(dict_err(lineno, "empty stem"));
            }
            self.longest_stem = self.longest_stem.max(stem.len());
            self.stems.entry(stem).or_default().extend(ids);
        } else {
            self.exact.entry(stem).or_default().extend(ids);
        }
        Ok(())
    }

    pub fn categories(&self) -> impl Iterator<Item = &LiwcCategory> {
        self.categories.values()
    }

    pub fn category(&self, id: CategoryId) -> Option<&LiwcCategory> {
        self.categories.get(&id)
    }

    pub fn category_by_name(&self, name: &str) -> Option<&LiwcCategory> {
        let name = name.to_lowercase();
        self.categories.values().find(|c| c.name == name)
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn num_entries(&self) -> usize {
        self.exact.len() + self.stems.len()
    }

    /// All stems (without `*`) in lexicographic order.
    pub fn stems(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.stems.keys().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    /// Every category the dictionary assigns to `token`: the exact entry (if
    /// any) unioned with all matching stems.
    pub fn lookup(&self, token: &str) -> BTreeSet<CategoryId> {
        let mut out = self.exact.get(token).cloned().unwrap_or_default();
        if self.stems.is_empty() {
            return out;
        }
        let limit = self.longest_stem.min(token.len());
        let prefix_ends = token
            .char_indices()
            .map(|(i, _)| i)
            .skip(1)
            .chain(std::iter::once(token.len()));
        for end in prefix_ends {
            if end > limit {
                break;
            }
            if let Some(ids) = self.stems.get(&token[..end]) {
                out.extend(ids);
            }
        }
        out
    }

    /// Categories of `token` restricted to the selection.
    pub fn categories_of(&self, token: &str, sel: &CategorySelection) -> BTreeSet<CategoryId> {
        let mut ids = self.lookup(token);
        ids.retain(|id| sel.resolved.contains(id));
        ids
    }

    /// The 15 category nodes: nine main categories plus six personal concerns.
    pub fn default_selection(&self) -> Result<CategorySelection> {
        self.select(DEFAULT_CATEGORY_NAMES)
    }

    /// Resolves an ordered list of category names, failing on the first one
    /// the dictionary does not define.
    pub fn select<I, S>(&self, names: I) -> Result<CategorySelection>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut selected = Vec::new();
        let mut resolved = Vec::new();
        for name in names {
            let name = name.as_ref().to_lowercase();
            let cat = self
                .category_by_name(&name)
                .ok_or_else(|| Error::CategoryNotFound(name.clone()))?;
            selected.push(name);
            resolved.push(cat.id);
        }
        Ok(CategorySelection { selected, resolved })
    }
}

fn parse_category(line: &str, lineno: usize) -> Result<LiwcCategory> {
    let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
    if cols.len() != 3 {
        return Err(dict_err(
            lineno,
            format!("malformed header: expected `id<TAB>name<TAB>main|sub`, got `{line}`"),
        ));
    }
    let id = cols[0]
        .parse()
        .map_err(|_| dict_err(lineno, format!("malformed header: bad id `{}`", cols[0])))?;
    let name = cols[1].to_lowercase();
    if name.is_empty() {
        return Err(dict_err(lineno, "malformed header: empty category name"));
    }
    let is_main = match cols[2].to_lowercase().as_str() {
        "main" => true,
        "sub" => false,
        other => {
            return Err(dict_err(
                lineno,
                format!("malformed header: marker must be main|sub, got `{other}`"),
            ))
        }
    };
    Ok(LiwcCategory { id, name, is_main })
}

fn dict_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Dictionary { line, msg: msg.into() }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "%\n1\taffect\tmain\n2\tsocial\tmain\n3\tbio\tmain\n%\nlove\t1 2\nhungr*\t3\nthanks\t2\n";

    #[test]
    fn empty_dictionary() {
        let d = LiwcDictionary::parse_str("%\n%\n").unwrap();
        assert_eq!(d.num_categories(), 0);
        assert!(d.lookup("anything").is_empty());
    }

    #[test]
    fn exact_entry_with_two_categories() {
        let d = LiwcDictionary::parse_str(SMALL).unwrap();
        assert_eq!(d.lookup("love"), BTreeSet::from([1, 2]));
    }

    #[test]
    fn stem_matches_longer_token() {
        let d = LiwcDictionary::parse_str(SMALL).unwrap();
        assert_eq!(d.lookup("hungriest"), BTreeSet::from([3]));
        assert_eq!(d.lookup("hungr"), BTreeSet::from([3]));
        assert!(d.lookup("hung").is_empty());
        assert_eq!(d.stems(), vec!["hungr"]);
    }

    #[test]
    fn two_stems_union() {
        let src = "%\n1\ta\tmain\n2\tb\tmain\n%\nab*\t1\nabc*\t2\n";
        let d = LiwcDictionary::parse_str(src).unwrap();
        let sel = d.select(["a", "b"]).unwrap();
        assert_eq!(d.categories_of("abcd", &sel), BTreeSet::from([1, 2]));
    }

    #[test]
    fn uppercase_input_is_lowercased() {
        let d = LiwcDictionary::parse_str("%\n1\tAffect\tMAIN\n%\nLove\t1\n").unwrap();
        assert_eq!(d.lookup("love"), BTreeSet::from([1]));
        assert_eq!(d.category(1).unwrap().name, "affect");
    }

    #[test]
    fn selection_restricts_output() {
        let d = LiwcDictionary::parse_str(SMALL).unwrap();
        let sel = d.select(["social"]).unwrap();
        assert_eq!(d.categories_of("love", &sel), BTreeSet::from([2]));
        assert_eq!(d.categories_of("thanks", &sel), BTreeSet::from([2]));
        assert!(d.categories_of("absent", &sel).is_empty());
    }

    #[test]
    fn missing_category_in_selection() {
        let d = LiwcDictionary::parse_str(SMALL).unwrap();
        let err = d.select(["affect", "Death"]).unwrap_err();
        assert_eq!(err.to_string(), "category not found: death");
    }

    #[test]
    fn error_lines() {
        let cases = [
            ("1\ta\tmain\n%\n%\n", 1, "malformed header"),
            ("%\n1\ta\tmain\n1\tb\tmain\n%\n", 3, "duplicate category id 1"),
            ("%\n1\ta\tmain\n%\nfoo\t7\n", 4, "unknown category id 7"),
            ("%\n1\ta\tmain\n%\n*\t1\n", 4, "empty stem"),
            ("%\n1\ta\n%\n", 2, "malformed header"),
            ("%\n1\ta\tmain\n%\nf*o\t1\n", 4, "final character"),
        ];
        for (src, line, needle) in cases {
            match LiwcDictionary::parse_str(src) {
                Err(Error::Dictionary { line: l, msg }) => {
                    assert_eq!(l, line, "{src:?}: {msg}");
                    assert!(msg.contains(needle), "{msg} lacks {needle}");
                }
                other => panic!("{src:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn multibyte_tokens_do_not_split_chars() {
        let d = LiwcDictionary::parse_str("%\n1\ta\tmain\n%\ncafé*\t1\n").unwrap();
        assert_eq!(d.lookup("cafés"), BTreeSet::from([1]));
        assert!(d.lookup("caf").is_empty());
    }
}
