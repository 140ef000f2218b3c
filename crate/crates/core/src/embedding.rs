//! Dense occurrence embeddings, the CALEEMB1 file format and the cosine
//! kernel shared by every evaluation.
//!
//! Layout of a CALEEMB1 file (all integers little-endian):
//!
//! ```text
//! "CALEEMB1"            8 bytes
//! n                     u32
//! d                     u32
//! rows                  n * d f32, row-major
//! id_block_len          u32
//! ids                   UTF-8, one newline-terminated id per row
//! ```

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"CALEEMB1";

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major `data`. Ids must be unique and contain
    /// no newline.
    pub fn new(dim: usize, data: Vec<f32>, ids: Vec<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("embedding dimension must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::Format(format!(
                "{} values do not form {} rows of dimension {dim}",
                data.len(),
                ids.len()
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if id.contains('\n') {
                return Err(Error::Format(format!("id `{id}` contains a newline")));
            }
            if index.insert(id.clone(), row).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(EmbeddingMatrix {
            dim,
            data,
            ids,
            index,
        })
    }

    pub fn from_rows(ids: Vec<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data, ids)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Result<&[f32]> {
        self.row_of(id)
            .map(|i| self.row(i))
            .ok_or_else(|| Error::MissingEmbedding(id.to_string()))
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Applies `f` to every row, producing a matrix with the same ids.
    pub fn map_rows<F>(&self, out_dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f32]) -> Result<Vec<f32>> + Sync + Send,
    {
        let rows = crate::par::try_map_range(self.len(), |i| f(self.row(i)))?;
        let mut data = Vec::with_capacity(self.len() * out_dim);
        for r in rows {
            if r.len() != out_dim {
                return Err(Error::DimensionMismatch {
                    expected: out_dim,
                    actual: r.len(),
                });
            }
            data.extend(r);
        }
        Self::new(out_dim, data, self.ids.clone())
    }

    /// The rows of `ids`, in the given order, duplicates collapsed.
    pub fn select<'a, I>(&self, ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen = HashSet::new();
        let mut out_ids = Vec::new();
        let mut data = Vec::new();
        for id in ids {
            if seen.insert(id) {
                data.extend_from_slice(self.get(id)?);
                out_ids.push(id.to_string());
            }
        }
        Self::new(self.dim, data, out_ids)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if let Some(i) = self.rows().position(|r| r.iter().all(|&x| x == 0.0)) {
            return Err(Error::Domain(format!("row `{}` is the zero vector", self.ids[i])));
        }
        let n = u32::try_from(self.len()).map_err(|_| Error::Format("too many rows".into()))?;
        let d = u32::try_from(self.dim).map_err(|_| Error::Format("dimension too large".into()))?;
        let id_block: String = self.ids.iter().map(|id| format!("{id}\n")).collect();
        let id_len = u32::try_from(id_block.len()).map_err(|_| Error::Format("id block too large".into()))?;

        let mut out = Vec::with_capacity(20 + 4 * self.data.len() + id_block.len());
        out.extend_from_slice(EMBEDDING_MAGIC);
        out.extend_from_slice(&n.to_le_bytes());
        out.extend_from_slice(&d.to_le_bytes());
        for x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&id_len.to_le_bytes());
        out.extend_from_slice(id_block.as_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take(8, "magic")? != EMBEDDING_MAGIC {
            return Err(Error::Format("not a CALEEMB1 file (bad magic)".into()));
        }
        let n = r.u32("row count")? as usize;
        let d = r.u32("dimension")? as usize;
        let values = n
            .checked_mul(d)
            .ok_or_else(|| Error::Format("row count overflow".into()))?;
        let data = r.f32s(values, "matrix payload")?;
        let id_len = r.u32("id block length")? as usize;
        let block = r.take(id_len, "id block")?;
        r.finish()?;

        let text = std::str::from_utf8(block).map_err(|e| Error::Format(format!("id block: {e}")))?;
        if !text.is_empty() && !text.ends_with('\n') {
            return Err(Error::Format("id block is not newline-terminated".into()));
        }
        let ids: Vec<String> = text.lines().map(String::from).collect();
        if ids.len() != n {
            return Err(Error::Format(format!("header declares {n} rows but index holds {} ids", ids.len())));
        }
        Self::new(d, data, ids)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::read(path)
}

pub fn write_embeddings(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    matrix.write(path)
}

/// Cursor over a little-endian byte buffer.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!(
                "{what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    pub(crate) fn f32s(&mut self, count: usize, what: &str) -> Result<Vec<f32>> {
        let len = count
            .checked_mul(4)
            .ok_or_else(|| Error::Format(format!("{what}: size overflow")))?;
        let b = self.take(len, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn dot_norms<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> Result<(f64, f64, f64)> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (mut uv, mut uu, mut vv) = (0.0f64, 0.0f64, 0.0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (a.into(), b.into());
        uv += a * b;
        uu += a * a;
        vv += b * b;
    }
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::Domain("cosine of a zero vector".into()));
    }
    Ok((uv, uu, vv))
}

/// Cosine similarity accumulated in f64 and clamped to `[-1, 1]`.
///
/// Computed as `u·v / sqrt(|u|²|v|²)`, which makes `cos(u, u)` exactly 1.
pub fn cosine_similarity<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> Result<f64> {
    let (uv, uu, vv) = dot_norms(u, v)?;
    let denom = (uu * vv).sqrt();
    let sim = if denom.is_finite() && denom > 0.0 {
        uv / denom
    } else {
        // |u|²|v|² over/underflowed; fall back to separate norms
        uv / (uu.sqrt() * vv.sqrt())
    };
    Ok(sim.clamp(-1.0, 1.0))
}

/// `1 - cosine_similarity`, in `[0, 2]`.
pub fn cosine_distance<T: Copy + Into<f64>>(u: &[T], v: &[T]) -> Result<f64> {
    Ok(1.0 - cosine_similarity(u, v)?)
}

/// Coordinate-wise mean of the given rows.
pub fn mean_vector(rows: &[usize], m: &EmbeddingMatrix) -> Result<Vec<f64>> {
    mean_of(rows.iter().map(|&i| m.row(i)))
}

pub fn mean_of<'a, T, I>(vectors: I) -> Result<Vec<f64>>
where
    T: Copy + Into<f64> + 'a,
    I: IntoIterator<Item = &'a [T]>,
{
    let mut acc: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for v in vectors {
        if n == 0 {
            acc = vec![0.0; v.len()];
        } else if v.len() != acc.len() {
            return Err(Error::DimensionMismatch {
                expected: acc.len(),
                actual: v.len(),
            });
        }
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x.into();
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Domain("mean of an empty set".into()));
    }
    let inv = n as f64;
    acc.iter_mut().for_each(|a| *a /= inv);
    Ok(acc)
}
