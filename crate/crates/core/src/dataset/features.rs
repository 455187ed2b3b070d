//! Frozen image-side features and the `FEAT` file format.
//!
//! Layout (little-endian): magic `VGFEAT01`, `u32` dim, `u32` record count,
//! then per record `u16` class-name length, class-name UTF-8 bytes,
//! `u32` instance id and `dim` IEEE-754 `f32` values.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use crate::error::{read_file, write_file, Error, Result};

pub const FEAT_MAGIC: &[u8; 8] = b"VGFEAT01";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub object_class: String,
    pub instance_id: u32,
    pub vector: Vec<f32>,
}

/// Object instances with their feature vectors, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    records: Vec<FeatureRecord>,
    by_class: BTreeMap<String, Vec<usize>>,
    keys: HashSet<(String, u32)>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        FeatureStore {
            dim,
            records: Vec::new(),
            by_class: BTreeMap::new(),
            keys: HashSet::new(),
        }
    }

    pub fn from_records(dim: usize, records: impl IntoIterator<Item = FeatureRecord>) -> Result<Self> {
        let mut store = FeatureStore::new(dim);
        for r in records {
            store.push(r)?;
        }
        Ok(store)
    }

    pub fn push(&mut self, record: FeatureRecord) -> Result<()> {
        if record.vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: record.vector.len(),
            });
        }
        if record.object_class.is_empty() {
            return Err(Error::data("empty object class name"));
        }
        if record.vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::data(format!(
                "{}#{} has non-finite values",
                record.object_class, record.instance_id
            )));
        }
        if record.vector.iter().all(|&x| x == 0.0) {
            return Err(Error::data(format!(
                "{}#{} has a zero-norm vector",
                record.object_class, record.instance_id
            )));
        }
        if !self.keys.insert((record.object_class.clone(), record.instance_id)) {
            return Err(Error::data(format!(
                "duplicate record {}#{}",
                record.object_class, record.instance_id
            )));
        }
        self.by_class
            .entry(record.object_class.clone())
            .or_default()
            .push(self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    /// Distinct classes in sorted order.
    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.by_class.keys().map(String::as_str)
    }

    pub fn n_classes(&self) -> usize {
        self.by_class.len()
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.by_class.contains_key(class)
    }

    /// Records of one class, in insertion order.
    pub fn instances(&self, class: &str) -> impl Iterator<Item = &FeatureRecord> {
        self.by_class
            .get(class)
            .into_iter()
            .flatten()
            .map(move |&i| &self.records[i])
    }

    pub fn get(&self, class: &str, instance_id: u32) -> Option<&FeatureRecord> {
        self.instances(class).find(|r| r.instance_id == instance_id)
    }

    /// A copy holding only records whose class is in `classes`.
    pub fn restrict(&self, classes: &BTreeSet<String>) -> FeatureStore {
        let mut out = FeatureStore::new(self.dim);
        for r in self.records.iter().filter(|r| classes.contains(&r.object_class)) {
            out.push(r.clone()).expect("records were already validated");
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.records.len() * (self.dim * 4 + 16));
        out.extend_from_slice(FEAT_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for r in &self.records {
            out.extend_from_slice(&(r.object_class.len() as u16).to_le_bytes());
            out.extend_from_slice(r.object_class.as_bytes());
            out.extend_from_slice(&r.instance_id.to_le_bytes());
            for x in &r.vector {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "feature file");
        if r.take(8)? != FEAT_MAGIC {
            return Err(Error::BadMagic {
                what: "feature file",
                expected: "VGFEAT01",
            });
        }
        let dim = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut store = FeatureStore::new(dim);
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::data("class name is not valid UTF-8"))?
                .to_string();
            let instance_id = r.u32()?;
            let vector = r.f32s(dim)?;
            store.push(FeatureRecord {
                object_class: name,
                instance_id,
                vector,
            })?;
        }
        r.finish()?;
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }
}

/// Bounds-checked little-endian cursor.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8], section: &'static str) -> Self {
        ByteReader { bytes, pos: 0, section }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let remaining = self.bytes.len() - self.pos;
        if n > remaining {
            return Err(Error::Truncated {
                section: self.section.to_string(),
                expected: n,
                found: remaining,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::data("length overflow"))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    pub(crate) fn finish(&self) -> Result<()> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(Error::data(format!("{n} trailing bytes after {}", self.section))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(class: &str, id: u32, v: Vec<f32>) -> FeatureRecord {
        FeatureRecord {
            object_class: class.into(),
            instance_id: id,
            vector: v,
        }
    }

    fn small() -> FeatureStore {
        FeatureStore::from_records(
            3,
            vec![
                rec("cup", 0, vec![1.0, 0.0, 0.5]),
                rec("power drill", 7, vec![-1.0, 2.0, 0.0]),
                rec("cup", 1, vec![0.0, 0.25, 1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn byte_layout() {
        let store = FeatureStore::from_records(1, vec![rec("ab", 5, vec![1.0])]).unwrap();
        let bytes = store.to_bytes();
        let mut expected = b"VGFEAT01".to_vec();
        expected.extend([1, 0, 0, 0, 1, 0, 0, 0, 2, 0, b'a', b'b', 5, 0, 0, 0]);
        expected.extend(1.0f32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn round_trip() {
        let s = small();
        let back = FeatureStore::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.instances("cup").count(), 2);
        assert_eq!(back.classes().collect::<Vec<_>>(), vec!["cup", "power drill"]);
    }

    #[test]
    fn empty_store() {
        let bytes = FeatureStore::new(2048).to_bytes();
        assert_eq!(bytes.len(), 16);
        let back = FeatureStore::from_bytes(&bytes).unwrap();
        assert_eq!(back.dim(), 2048);
        assert!(back.is_empty());
    }

    #[test]
    fn rejects_bad_records() {
        let mut s = FeatureStore::new(2);
        assert!(s.push(rec("a", 0, vec![0.0, 0.0])).is_err());
        assert!(s.push(rec("a", 0, vec![1.0])).is_err());
        s.push(rec("a", 0, vec![1.0, 0.0])).unwrap();
        assert!(s.push(rec("a", 0, vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn rejects_bad_files() {
        let mut bytes = small().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(FeatureStore::from_bytes(&bytes), Err(Error::BadMagic { .. })));
        let bytes = small().to_bytes();
        assert!(matches!(
            FeatureStore::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        let mut bytes = small().to_bytes();
        bytes.push(0);
        assert!(FeatureStore::from_bytes(&bytes).is_err());
    }

    #[test]
    fn restrict_keeps_order() {
        let s = small().restrict(&["cup".to_string()].into());
        assert_eq!(s.len(), 2);
        assert_eq!(s.records()[1].instance_id, 1);
    }
}
