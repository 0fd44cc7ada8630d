//! Versioned section container shared by checkpoints and serialized datasets.
//!
//! Layout: the 7-byte magic `ESLSNN1`, a little-endian `u32` section count,
//! then per section a `u32` name length, the UTF-8 name, a `u64` payload
//! length and the payload bytes. Sections keep their insertion order, so a
//! load/save cycle reproduces the input byte for byte.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 7] = b"ESLSNN1";

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Container {
    sections: Vec<(String, Vec<u8>)>,
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a section, replacing any existing one with the same name.
    pub fn insert(&mut self, name: impl Into<String>, payload: Vec<u8>) {
        let name = name.into();
        if let Some(slot) = self.sections.iter_mut().find(|(n, _)| *n == name) {
            slot.1 = payload;
        } else {
            self.sections.push((name, payload));
        }
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[u8]> {
        self.get(name)
            .ok_or_else(|| Error::Corrupt(format!("missing section `{name}`")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(n, _)| n.as_str())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.sections.len() as u32).to_le_bytes());
        for (name, payload) in &self.sections {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = Reader::new(bytes);
        if reader.take(MAGIC.len())? != MAGIC {
            return Err(Error::Corrupt("missing ESLSNN1 magic".into()));
        }
        let count = reader.u32()? as usize;
        let mut sections = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = reader.u32()? as usize;
            let name = std::str::from_utf8(reader.take(name_len)?)
                .map_err(|_| Error::Corrupt("section name is not UTF-8".into()))?
                .to_owned();
            let len = reader.u64()? as usize;
            sections.push((name, reader.take(len)?.to_vec()));
        }
        if !reader.is_done() {
            return Err(Error::Corrupt("trailing bytes after last section".into()));
        }
        Ok(Self { sections })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Cursor over a little-endian byte payload.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Corrupt(format!("payload ends before byte {}", self.pos + n)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(
                n.checked_mul(8)
                    .ok_or_else(|| Error::Corrupt("length overflow".into()))?,
            )?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_exact() {
        let mut c = Container::new();
        c.insert("b", vec![1, 2, 3]);
        c.insert("a", vec![]);
        let bytes = c.to_bytes();
        assert_eq!(&bytes[..7], b"ESLSNN1");
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.names().collect::<Vec<_>>(), vec!["b", "a"]);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut c = Container::new();
        c.insert("x", vec![9; 10]);
        let bytes = c.to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Container::from_bytes(&bad).is_err());
        let mut long = bytes;
        long.push(0);
        assert!(Container::from_bytes(&long).is_err());
    }

    #[test]
    fn insert_replaces_in_place() {
        let mut c = Container::new();
        c.insert("a", vec![1]);
        c.insert("b", vec![2]);
        c.insert("a", vec![3]);
        assert_eq!(c.get("a"), Some(&[3u8][..]));
        assert_eq!(c.names().collect::<Vec<_>>(), vec!["a", "b"]);
    }
}
