//! Binary container for named `f32` tables.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic          4 bytes  "HINE"
//! format_version u32      1
//! dim            u32      row width shared by every table
//! table_count    u32
//! per table:     name_len u32, name (UTF-8), rows u64
//! payload:       each table row-major as f32 LE, in descriptor order
//! ```
//!
//! The file must end exactly where the last table ends.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vecmath::Matrix;

pub const MAGIC: [u8; 4] = *b"HINE";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub dim: usize,
    pub tables: Vec<(String, Matrix)>,
}

impl Checkpoint {
    pub fn new(dim: usize) -> Self {
        Checkpoint {
            dim,
            tables: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, table: Matrix) -> Result<()> {
        let name = name.into();
        if table.cols() != self.dim {
            return Err(Error::Shape(format!(
                "table {name} has width {}, container dim is {}",
                table.cols(),
                self.dim
            )));
        }
        if self.tables.iter().any(|(n, _)| *n == name) {
            return Err(Error::Checkpoint(format!("duplicate table {name}")));
        }
        self.tables.push((name, table));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn take(&mut self, name: &str) -> Option<Matrix> {
        let pos = self.tables.iter().position(|(n, _)| n == name)?;
        Some(self.tables.remove(pos).1)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.tables.iter().map(|(_, m)| m.as_slice().len() * 4).sum();
        let mut out = Vec::with_capacity(16 + payload + self.tables.len() * 32);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.tables.len() as u32).to_le_bytes());
        for (name, m) in &self.tables {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        }
        for (_, m) in &self.tables {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let dim = r.u32()? as usize;
        let count = r.u32()? as usize;
        let mut descriptors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Checkpoint("table name is not UTF-8".into()))?
                .to_string();
            let rows = r.u64()?;
            descriptors.push((name, rows));
        }
        let payload: u64 = descriptors
            .iter()
            .try_fold(0u64, |acc, (_, rows)| rows.checked_mul(dim as u64 * 4).and_then(|b| acc.checked_add(b)))
            .ok_or_else(|| Error::Shape("declared table sizes overflow".into()))?;
        let expected = r.pos as u64 + payload;
        let found = bytes.len() as u64;
        if found < expected {
            return Err(Error::Truncated { expected, found });
        }
        if found > expected {
            return Err(Error::Shape(format!(
                "{} trailing bytes after declared tables",
                found - expected
            )));
        }
        let mut ck = Checkpoint::new(dim);
        for (name, rows) in descriptors {
            let rows = rows as usize;
            let raw = r.take(rows * dim * 4)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            ck.push(name, Matrix::from_vec(rows, dim, data))?;
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::Truncated {
            expected: (self.pos + n) as u64,
            found: self.bytes.len() as u64,
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_bytes() {
        let mut ck = Checkpoint::new(2);
        ck.push("ab", Matrix::from_vec(1, 2, vec![1.0, -2.0])).unwrap();
        let expected: Vec<u8> = [
            &b"HINE"[..],
            &[1, 0, 0, 0],
            &[2, 0, 0, 0],
            &[1, 0, 0, 0],
            &[2, 0, 0, 0],
            b"ab",
            &[1, 0, 0, 0, 0, 0, 0, 0],
            &[0x00, 0x00, 0x80, 0x3f],
            &[0x00, 0x00, 0x00, 0xc0],
        ]
        .concat();
        assert_eq!(ck.to_bytes(), expected);
        assert_eq!(Checkpoint::from_bytes(&expected).unwrap(), ck);
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let mut ck = Checkpoint::new(3);
        ck.push("t", Matrix::from_vec(2, 3, vec![0.5; 6])).unwrap();
        let bytes = ck.to_bytes();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(_))));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Checkpoint(_))));

        let cut = &bytes[..bytes.len() - 1];
        let err = Checkpoint::from_bytes(cut).unwrap_err();
        assert!(matches!(err, Error::Truncated { .. }));
        assert!(err.to_string().contains("truncated"));

        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Checkpoint::from_bytes(&long), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_width_mismatch_and_duplicates() {
        let mut ck = Checkpoint::new(3);
        assert!(ck.push("t", Matrix::zeros(1, 2)).is_err());
        ck.push("t", Matrix::zeros(1, 3)).unwrap();
        assert!(ck.push("t", Matrix::zeros(1, 3)).is_err());
    }
}
