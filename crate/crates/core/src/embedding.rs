//! Embedding sets: loading, validation, normalization and persistence.
//!
//! An [`EmbeddingSet`] is the unlabeled pool as a row-major `n × d` matrix of
//! `f64` with one string id per row. Row order is the vertex order used by
//! every downstream module, so the file order is significant.
//!
//! Three on-disk formats are supported:
//!
//! * `jsonl`: one `{"id": "...", "vector": [...]}` object per line;
//! * `csv`: a header `id,v0,...,v{d-1}` followed by one row per example;
//! * `raw-f32`: the 8-byte magic `IDEALEMB`, little-endian `u32` row count and
//!   `u32` dimension, then `n·d` little-endian `f32` values. Ids are implicit
//!   (`"0"`, `"1"`, ...).
//!
//! Values are always held as `f64`, whatever the encoding on disk.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const RAW_MAGIC: &[u8; 8] = b"IDEALEMB";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Jsonl,
    Csv,
    RawF32,
}

impl Format {
    /// Guess the format from a file extension (`.jsonl`, `.csv`, `.bin`/`.f32`).
    pub fn from_extension(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()? {
            "jsonl" | "json" => Some(Format::Jsonl),
            "csv" => Some(Format::Csv),
            "bin" | "f32" | "raw" => Some(Format::RawF32),
            _ => None,
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            "raw-f32" => Ok(Format::RawF32),
            other => Err(Error::param(
                "format",
                format!("unknown embedding format {other:?} (expected jsonl, csv or raw-f32)"),
            )),
        }
    }
}

/// The unlabeled pool as id-indexed fixed-dimension vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    ids: Vec<String>,
    data: Vec<f64>,
    dim: usize,
    normalized: bool,
}

impl EmbeddingSet {
    /// Build a set from ids and equally sized rows.
    ///
    /// Enforces every invariant of the type: equal dimensions, finite values,
    /// unique ids and no all-zero rows.
    pub fn from_rows<S, R>(ids: Vec<S>, rows: Vec<R>) -> Result<Self>
    where
        S: Into<String>,
        R: AsRef<[f64]>,
    {
        if ids.len() != rows.len() {
            return Err(Error::param(
                "ids",
                format!("{} ids for {} rows", ids.len(), rows.len()),
            ));
        }
        let mut builder = Builder::default();
        for (row, (id, values)) in ids.into_iter().zip(rows.iter()).enumerate() {
            builder.push(row + 1, id.into(), values.as_ref().iter().copied())?;
        }
        builder.finish(None)
    }

    /// Rows with implicit ids `"0"`, `"1"`, ...
    pub fn from_vectors<R: AsRef<[f64]>>(rows: Vec<R>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::from_rows::<String, R>(ids, rows)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Position of `id` in the set, by linear scan.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Keep only the rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<EmbeddingSet> {
        let mut ids = Vec::with_capacity(indices.len());
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        let mut seen = HashSet::new();
        for &i in indices {
            if i >= self.len() {
                return Err(Error::VertexOutOfRange {
                    index: i,
                    n: self.len(),
                });
            }
            if !seen.insert(i) {
                return Err(Error::DuplicateId {
                    id: self.ids[i].clone(),
                    row: i + 1,
                });
            }
            ids.push(self.ids[i].clone());
            data.extend_from_slice(self.row(i));
        }
        Ok(EmbeddingSet {
            ids,
            data,
            dim: self.dim,
            normalized: self.normalized,
        })
    }

    /// Scale every row to unit L2 norm. Idempotent.
    pub fn normalize(&self) -> Result<EmbeddingSet> {
        if self.normalized {
            return Ok(self.clone());
        }
        let mut data = self.data.clone();
        for (i, row) in data.chunks_exact_mut(self.dim).enumerate() {
            let norm = l2_norm(row);
            if norm == 0.0 {
                return Err(Error::ZeroVector {
                    id: self.ids[i].clone(),
                });
            }
            row.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(EmbeddingSet {
            ids: self.ids.clone(),
            data,
            dim: self.dim,
            normalized: true,
        })
    }

    /// Hex SHA-256 over ids, shape and the exact bit patterns of the values.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.len() as u64).to_le_bytes());
        hasher.update((self.dim as u64).to_le_bytes());
        for id in &self.ids {
            hasher.update((id.len() as u64).to_le_bytes());
            hasher.update(id.as_bytes());
        }
        for x in &self.data {
            hasher.update(x.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }

    /// Cosine similarity between rows `a` and `b`.
    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let (u, v) = (self.row(a), self.row(b));
        if self.normalized {
            clamp_cosine(dot(u, v))
        } else {
            cosine(u, v).expect("rows are nonzero and share a dimension")
        }
    }

    /// Row norms, for repeated similarity queries against an unnormalized set.
    pub(crate) fn similarity(&self) -> Similarity<'_> {
        let norms = if self.normalized {
            Vec::new()
        } else {
            self.rows().map(l2_norm).collect()
        };
        Similarity { set: self, norms }
    }

    pub fn load(path: impl AsRef<Path>, format: Format) -> Result<EmbeddingSet> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        match format {
            Format::Jsonl => read_jsonl(path, BufReader::new(file)),
            Format::Csv => read_csv(path, BufReader::new(file)),
            Format::RawF32 => read_raw(path, BufReader::new(file)),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>, format: Format) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        match format {
            Format::Jsonl => self.write_jsonl(&mut out),
            Format::Csv => self.write_csv(&mut out),
            Format::RawF32 => self.write_raw(&mut out),
        }
        .and_then(|()| out.flush())
        .map_err(|e| Error::io(path, e))
    }

    fn write_jsonl(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (id, row) in self.ids.iter().zip(self.rows()) {
            let record = JsonlRecordRef { id, vector: row };
            serde_json::to_writer(&mut *out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend((0..self.dim).map(|j| format!("v{j}")));
        writer.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(self.rows()) {
            let mut record = Vec::with_capacity(self.dim + 1);
            record.push(id.clone());
            record.extend(row.iter().map(|x| x.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()
    }

    fn write_raw(&self, out: &mut impl Write) -> std::io::Result<()> {
        let too_big = |what| std::io::Error::new(std::io::ErrorKind::InvalidInput, what);
        let n = u32::try_from(self.len()).map_err(|_| too_big("row count exceeds u32"))?;
        let d = u32::try_from(self.dim).map_err(|_| too_big("dimension exceeds u32"))?;
        out.write_all(RAW_MAGIC)?;
        out.write_all(&n.to_le_bytes())?;
        out.write_all(&d.to_le_bytes())?;
        for &x in &self.data {
            out.write_all(&(x as f32).to_le_bytes())?;
        }
        Ok(())
    }
}

/// Cosine similarity `u·v / (‖u‖‖v‖)`, clamped to `[-1, 1]`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionDiffers {
            left: u.len(),
            right: v.len(),
        });
    }
    let (nu, nv) = (l2_norm(u), l2_norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroLength);
    }
    Ok(clamp_cosine(dot(u, v) / (nu * nv)))
}

/// Pairwise cosine lookups with norms computed once.
pub(crate) struct Similarity<'a> {
    set: &'a EmbeddingSet,
    norms: Vec<f64>,
}

impl Similarity<'_> {
    /// Same value as [`EmbeddingSet::cosine`].
    pub(crate) fn get(&self, a: usize, b: usize) -> f64 {
        let d = dot(self.set.row(a), self.set.row(b));
        if self.norms.is_empty() {
            clamp_cosine(d)
        } else {
            clamp_cosine(d / (self.norms[a] * self.norms[b]))
        }
    }
}

/// Clamp to `[-1, 1]` and fold `-0.0` into `+0.0` so that index tie-breaks
/// never see a signed zero.
pub(crate) fn clamp_cosine(x: f64) -> f64 {
    x.clamp(-1.0, 1.0) + 0.0
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn l2_norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: String,
    vector: Vec<f64>,
}

#[derive(Serialize)]
struct JsonlRecordRef<'a> {
    id: &'a str,
    vector: &'a [f64],
}

#[derive(Default)]
struct Builder {
    ids: Vec<String>,
    seen: HashSet<String>,
    data: Vec<f64>,
    dim: Option<usize>,
}

impl Builder {
    fn push(&mut self, row: usize, id: String, values: impl Iterator<Item = f64>) -> Result<()> {
        let start = self.data.len();
        let mut all_zero = true;
        for (column, x) in values.enumerate() {
            if !x.is_finite() {
                self.data.truncate(start);
                return Err(Error::NonFinite { row, column });
            }
            all_zero &= x == 0.0;
            self.data.push(x);
        }
        let found = self.data.len() - start;
        match self.dim {
            None if found == 0 => {
                return Err(Error::Malformed {
                    row,
                    message: "vector has no components".into(),
                })
            }
            None => self.dim = Some(found),
            Some(expected) if expected != found => {
                return Err(Error::DimensionMismatch {
                    row,
                    expected,
                    found,
                })
            }
            Some(_) => {}
        }
        if all_zero {
            return Err(Error::ZeroVector { id });
        }
        if !self.seen.insert(id.clone()) {
            return Err(Error::DuplicateId { id, row });
        }
        self.ids.push(id);
        Ok(())
    }

    fn finish(self, path: Option<&Path>) -> Result<EmbeddingSet> {
        let Some(dim) = self.dim else {
            return Err(match path {
                Some(p) => Error::EmptyFile { path: p.into() },
                None => Error::param("rows", "no rows given"),
            });
        };
        Ok(EmbeddingSet {
            ids: self.ids,
            data: self.data,
            dim,
            normalized: false,
        })
    }
}

fn read_jsonl(path: &Path, reader: impl BufRead) -> Result<EmbeddingSet> {
    let mut builder = Builder::default();
    let mut row = 0;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let record: JsonlRecord = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            row,
            message: e.to_string(),
        })?;
        builder.push(row, record.id, record.vector.into_iter())?;
    }
    builder.finish(Some(path))
}

fn read_csv(path: &Path, reader: impl Read) -> Result<EmbeddingSet> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| Error::Malformed {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if header.is_empty() || header.get(0) == Some("") {
        return Err(Error::EmptyFile { path: path.into() });
    }
    if header.get(0) != Some("id") {
        return Err(Error::Malformed {
            row: 0,
            message: "header must start with `id`".into(),
        });
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("v{j}") {
            return Err(Error::Malformed {
                row: 0,
                message: format!("header column {} is {name:?}, expected \"v{j}\"", j + 1),
            });
        }
    }
    let mut builder = Builder::default();
    for (i, record) in csv.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Malformed {
            row,
            message: e.to_string(),
        })?;
        let mut fields = record.iter();
        let id = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| Error::Malformed {
                    row,
                    message: format!("{s:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        builder.push(row, id, values.into_iter())?;
    }
    let set = builder.finish(Some(path))?;
    if set.dim != header.len() - 1 {
        return Err(Error::DimensionMismatch {
            row: 1,
            expected: header.len() - 1,
            found: set.dim,
        });
    }
    Ok(set)
}

fn read_raw(path: &Path, mut reader: impl Read) -> Result<EmbeddingSet> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::EmptyFile { path: path.into() });
    }
    if bytes.len() < 16 || &bytes[..8] != RAW_MAGIC {
        return Err(Error::Malformed {
            row: 0,
            message: "missing IDEALEMB header".into(),
        });
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if n == 0 {
        return Err(Error::EmptyFile { path: path.into() });
    }
    if d == 0 {
        return Err(Error::Malformed {
            row: 0,
            message: "dimension is zero".into(),
        });
    }
    let body = &bytes[16..];
    if body.len() != n * d * 4 {
        return Err(Error::Malformed {
            row: 0,
            message: format!(
                "header declares {n}x{d} floats ({} bytes) but body has {} bytes",
                n * d * 4,
                body.len()
            ),
        });
    }
    let mut builder = Builder::default();
    for (i, row) in body.chunks_exact(d * 4).enumerate() {
        let values = row
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64);
        builder.push(i + 1, i.to_string(), values)?;
    }
    builder.finish(Some(path))
}
