//! Checkpoint archive: a single binary file holding named f64 tensors with
//! shape headers plus a JSON metadata blob (config, counters, RNG state).
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  b"GPVTFAR1"        format tag, bumped on layout changes
//! meta    u64 length + UTF-8 JSON
//! count   u64 number of tensors
//! tensor  u16 name length + name bytes
//!         u64 rows, u64 cols
//!         rows*cols f64 values
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numeric::Matrix;

const MAGIC: &[u8; 8] = b"GPVTFAR1";

#[derive(Debug, Clone, Default)]
pub struct Archive {
    pub meta: serde_json::Value,
    tensors: BTreeMap<String, Matrix>,
}

impl Archive {
    pub fn new(meta: serde_json::Value) -> Self {
        Archive {
            meta,
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Matrix) {
        self.tensors.insert(name.into(), tensor);
    }

    /// Stores a flat vector as a 1 x len tensor.
    pub fn insert_vec(&mut self, name: impl Into<String>, values: &[f64]) {
        self.insert(
            name,
            Matrix::from_vec(1, values.len(), values.to_vec()).expect("1 x len tensor"),
        );
    }

    pub fn get(&self, name: &str) -> Result<&Matrix> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))
    }

    pub fn get_vec(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.get(name)?.data().to_vec())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(|s| s.as_str())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let meta = serde_json::to_vec(&self.meta)
            .map_err(|e| Error::Checkpoint(format!("meta serialization: {e}")))?;
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.tensors.len() as u64).to_le_bytes());
        for (name, tensor) in &self.tensors {
            let name_bytes = name.as_bytes();
            if name_bytes.len() > u16::MAX as usize {
                return Err(Error::Checkpoint(format!("tensor name too long: {name}")));
            }
            out.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
            out.extend_from_slice(name_bytes);
            out.extend_from_slice(&(tensor.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(tensor.cols() as u64).to_le_bytes());
            for &v in tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cursor = 0usize;

        let take = |cursor: &mut usize, len: usize| -> Result<&[u8]> {
            if *cursor + len > bytes.len() {
                return Err(Error::Checkpoint("unexpected end of file".into()));
            }
            let slice = &bytes[*cursor..*cursor + len];
            *cursor += len;
            Ok(slice)
        };

        if take(&mut cursor, 8)? != MAGIC {
            return Err(Error::Checkpoint("bad magic / unknown format tag".into()));
        }
        let meta_len = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
        let meta: serde_json::Value = serde_json::from_slice(take(&mut cursor, meta_len)?)
            .map_err(|e| Error::Checkpoint(format!("meta parse: {e}")))?;
        let count = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;

        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len =
                u16::from_le_bytes(take(&mut cursor, 2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(&mut cursor, name_len)?.to_vec())
                .map_err(|e| Error::Checkpoint(format!("tensor name: {e}")))?;
            let rows = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
            let cols = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
            let raw = take(&mut cursor, rows * cols * 8)?;
            let data: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.insert(
                name,
                Matrix::from_vec(rows, cols, data)
                    .map_err(|e| Error::Checkpoint(e.to_string()))?,
            );
        }
        Ok(Archive { meta, tensors })
    }
}
