use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_text, Error, Result};

/// An assertion that objects of `object_class` can be used to `verb`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VerbObjectPair {
    pub verb: String,
    pub object_class: String,
}

impl VerbObjectPair {
    pub fn new(verb: impl Into<String>, object_class: impl Into<String>) -> Result<Self> {
        let verb = verb.into();
        let object_class = object_class.into();
        for (what, s) in [("verb", &verb), ("object class", &object_class)] {
            if s.trim().is_empty() {
                return Err(Error::data(format!("empty {what}")));
            }
            if *s != s.to_lowercase() {
                return Err(Error::data(format!("{what} {s:?} is not lowercase")));
            }
        }
        Ok(VerbObjectPair { verb, object_class })
    }
}

/// Lookup set over verb/object pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSet(BTreeSet<(String, String)>);

impl PairSet {
    pub fn contains(&self, verb: &str, object_class: &str) -> bool {
        self.0.contains(&(verb.to_string(), object_class.to_string()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<'a> FromIterator<&'a VerbObjectPair> for PairSet {
    fn from_iter<I: IntoIterator<Item = &'a VerbObjectPair>>(iter: I) -> Self {
        PairSet(iter.into_iter().map(|p| (p.verb.clone(), p.object_class.clone())).collect())
    }
}

/// Parses `verb<TAB>object[<TAB>frequency]` lines into a sorted, deduplicated list.
pub fn parse_pairs(text: &str) -> Result<Vec<VerbObjectPair>> {
    let mut pairs = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&cols.len()) {
            return Err(parse_err(format!("expected 2 or 3 tab-separated columns, found {}", cols.len())));
        }
        if let Some(freq) = cols.get(2) {
            freq.trim()
                .parse::<u64>()
                .map_err(|_| parse_err(format!("frequency is not an integer: {freq:?}")))?;
        }
        let pair = VerbObjectPair::new(cols[0].trim(), cols[1].trim()).map_err(|e| parse_err(e.to_string()))?;
        pairs.insert(pair);
    }
    if pairs.is_empty() {
        return Err(Error::data("pair file contains no pairs"));
    }
    Ok(pairs.into_iter().collect())
}

pub fn load_pairs(path: &Path) -> Result<Vec<VerbObjectPair>> {
    parse_pairs(&read_text(path)?)
}

/// Sorted distinct object classes.
pub fn object_classes(pairs: &[VerbObjectPair]) -> BTreeSet<String> {
    pairs.iter().map(|p| p.object_class.clone()).collect()
}

pub fn pairs_to_tsv(pairs: &[VerbObjectPair]) -> String {
    pairs.iter().map(|p| format!("{}\t{}\n", p.verb, p.object_class)).collect()
}
