//! The recipe library: an id-aligned embedding matrix plus an id-keyed
//! recipe dictionary, with persistence and append-only update.
//!
//! On disk a library is two files:
//!
//! * embedding matrix (`.rsnp`), binary little-endian:
//!   magic `RSNP`, version `u32` = 1, `N` as `u64`, `D` as `u32`,
//!   then `N` id entries (`u16` length + UTF-8 bytes),
//!   then `N·D` `f32` values row-major;
//! * recipe dictionary (`.jsonl`), one JSON record per line with fields
//!   `id`, `title`, `ingredients`, `instructions`, `source_url`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::{unit_f64, Embedding};
use crate::error::{Error, Result};

const MATRIX_MAGIC: &[u8; 4] = b"RSNP";
const MATRIX_VERSION: u32 = 1;

/// One entry of the recipe dictionary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecipeRecord {
    pub id: String,
    pub title: String,
    pub ingredients: Vec<String>,
    pub instructions: Vec<String>,
    #[serde(default)]
    pub source_url: Option<String>,
}

impl RecipeRecord {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidConfig("recipe id must be non-empty".into()));
        }
        if self.title.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "recipe {:?} has an empty title",
                self.id
            )));
        }
        Ok(())
    }
}

/// Id-aligned embedding matrix plus recipe dictionary.
///
/// Row order is stable: the i-th row's id is fixed once inserted, and ids
/// and records stay in bijection. Embeddings are stored as provided;
/// a unit-norm copy of each row is cached for the retrieval scan.
#[derive(Debug, Clone)]
pub struct RecipeLibrary {
    dim: usize,
    ids: Vec<String>,
    rows: Vec<Embedding>,
    unit_rows: Vec<f64>,
    index: HashMap<String, usize>,
    records: HashMap<String, RecipeRecord>,
}

impl PartialEq for RecipeLibrary {
    fn eq(&self, other: &Self) -> bool {
        // unit_rows is derived data
        self.dim == other.dim
            && self.ids == other.ids
            && self.rows == other.rows
            && self.records == other.records
    }
}

impl RecipeLibrary {
    /// Builds a library from (record, embedding) pairs; iteration order
    /// equals input order.
    ///
    /// Zero-norm embeddings are rejected: they cannot be ranked by cosine
    /// and indicate an upstream bug.
    pub fn build(pairs: Vec<(RecipeRecord, Embedding)>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("dim must be at least 1".into()));
        }
        let mut lib = Self {
            dim,
            ids: Vec::with_capacity(pairs.len()),
            rows: Vec::with_capacity(pairs.len()),
            unit_rows: Vec::with_capacity(pairs.len() * dim),
            index: HashMap::with_capacity(pairs.len()),
            records: HashMap::with_capacity(pairs.len()),
        };
        for (record, embedding) in pairs {
            lib.add_entry(record, embedding)?;
        }
        Ok(lib)
    }

    /// Appends one recipe; all prior rows keep their index.
    pub fn add_entry(&mut self, record: RecipeRecord, embedding: Embedding) -> Result<()> {
        record.validate()?;
        if embedding.dim() != self.dim {
            return Err(Error::dims(self.dim, embedding.dim()));
        }
        if self.index.contains_key(&record.id) {
            return Err(Error::DuplicateId(record.id));
        }
        let unit = unit_f64(&embedding)?;
        self.index.insert(record.id.clone(), self.ids.len());
        self.ids.push(record.id.clone());
        self.records.insert(record.id.clone(), record);
        self.rows.push(embedding);
        self.unit_rows.extend_from_slice(&unit);
        Ok(())
    }

    pub fn get_recipe(&self, id: &str) -> Result<&RecipeRecord> {
        self.records
            .get(id)
            .ok_or_else(|| Error::NotFound(id.to_string()))
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

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id_at(&self, row: usize) -> &str {
        &self.ids[row]
    }

    pub fn embedding_at(&self, row: usize) -> &Embedding {
        &self.rows[row]
    }

    /// All embeddings in row order.
    pub fn embeddings(&self) -> &[Embedding] {
        &self.rows
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Rows in insertion order, as (id, embedding) pairs.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &Embedding)> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.rows.iter())
    }

    /// Cached unit-norm copy of row `row`.
    pub(crate) fn unit_row(&self, row: usize) -> &[f64] {
        &self.unit_rows[row * self.dim..(row + 1) * self.dim]
    }

    /// Serializes the embedding matrix in the binary layout above.
    pub fn write_embedding_matrix<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&MATRIX_VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for id in &self.ids {
            let bytes = id.as_bytes();
            if bytes.len() > u16::MAX as usize {
                return Err(Error::Format(format!(
                    "id {:?} exceeds the {}-byte limit",
                    id,
                    u16::MAX
                )));
            }
            w.write_all(&(bytes.len() as u16).to_le_bytes())?;
            w.write_all(bytes)?;
        }
        for row in &self.rows {
            for &v in row.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Serializes the recipe dictionary as JSON lines, in row order.
    pub fn write_recipe_dictionary<W: Write>(&self, w: &mut W) -> Result<()> {
        for id in &self.ids {
            let record = &self.records[id];
            let line = serde_json::to_string(record)
                .map_err(|e| Error::Format(format!("record {id:?}: {e}")))?;
            w.write_all(line.as_bytes())?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save<P: AsRef<Path>, Q: AsRef<Path>>(&self, emb_path: P, rec_path: Q) -> Result<()> {
        let mut emb = BufWriter::new(File::create(emb_path)?);
        self.write_embedding_matrix(&mut emb)?;
        emb.flush()?;
        let mut rec = BufWriter::new(File::create(rec_path)?);
        self.write_recipe_dictionary(&mut rec)?;
        rec.flush()?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>, Q: AsRef<Path>>(emb_path: P, rec_path: Q) -> Result<Self> {
        let (dim, ids, rows) = read_embedding_matrix(emb_path.as_ref())?;
        let records = read_recipe_dictionary(rec_path.as_ref())?;

        let rec_name = rec_path.as_ref().display().to_string();
        let emb_name = emb_path.as_ref().display().to_string();
        let mut by_id: HashMap<String, RecipeRecord> =
            HashMap::with_capacity(records.len());
        for record in records {
            if by_id.insert(record.id.clone(), record.clone()).is_some() {
                return Err(Error::DuplicateId(record.id));
            }
        }
        let mut pairs = Vec::with_capacity(ids.len());
        for (id, row) in ids.iter().zip(rows) {
            let record = by_id.remove(id).ok_or_else(|| {
                Error::Consistency(format!(
                    "{rec_name}: no record for matrix id {id:?}"
                ))
            })?;
            pairs.push((record, row));
        }
        if let Some(extra) = by_id.keys().next() {
            return Err(Error::Consistency(format!(
                "{emb_name}: no matrix row for record id {extra:?}"
            )));
        }
        let lib = Self::build(pairs, dim).map_err(|e| match e {
            // a zero-norm row in a stored matrix is file corruption
            Error::ZeroVector => Error::Format(format!("{emb_name}: zero-norm embedding row")),
            other => other,
        })?;
        Ok(lib)
    }
}

fn read_embedding_matrix(path: &Path) -> Result<(usize, Vec<String>, Vec<Embedding>)> {
    let name = path.display().to_string();
    let fail = |msg: String| Error::Format(format!("{name}: {msg}"));
    let mut r = BufReader::new(File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, &name, "magic")?;
    if &magic != MATRIX_MAGIC {
        return Err(fail(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r, &name, "version")?;
    if version != MATRIX_VERSION {
        return Err(fail(format!("unsupported version {version}")));
    }
    let n = read_u64(&mut r, &name, "entry count")? as usize;
    let dim = read_u32(&mut r, &name, "dimension")? as usize;
    if dim == 0 {
        return Err(fail("dimension must be at least 1".into()));
    }

    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let len = read_u16(&mut r, &name, "id length")? as usize;
        let mut buf = vec![0u8; len];
        read_exact(&mut r, &mut buf, &name, "id bytes")?;
        let id = String::from_utf8(buf)
            .map_err(|_| fail(format!("id {i} is not valid UTF-8")))?;
        ids.push(id);
    }

    let mut rows = Vec::with_capacity(n);
    let mut buf = vec![0u8; dim * 4];
    for i in 0..n {
        read_exact(&mut r, &mut buf, &name, "embedding values")?;
        let mut values = Vec::with_capacity(dim);
        for (d, chunk) in buf.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(fail(format!("non-finite value at row {i}, col {d}")));
            }
            values.push(v);
        }
        rows.push(Embedding::new(values)?);
    }

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(fail("trailing bytes after matrix data".into()));
    }
    Ok((dim, ids, rows))
}

fn read_recipe_dictionary(path: &Path) -> Result<Vec<RecipeRecord>> {
    let name = path.display().to_string();
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RecipeRecord = serde_json::from_str(&line).map_err(|e| {
            Error::Format(format!("{name}: line {}: {e}", lineno + 1))
        })?;
        record.validate().map_err(|e| {
            Error::Format(format!("{name}: line {}: {e}", lineno + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], name: &str, what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format(format!("{name}: truncated while reading {what}")))
}

fn read_u16<R: Read>(r: &mut R, name: &str, what: &str) -> Result<u16> {
    let mut b = [0u8; 2];
    read_exact(r, &mut b, name, what)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R, name: &str, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, name, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, name: &str, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, name, what)?;
    Ok(u64::from_le_bytes(b))
}
