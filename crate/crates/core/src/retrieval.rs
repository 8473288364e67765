//! Query path: embed a query, scan the library by cosine similarity,
//! return the top-k ids.
//!
//! The scan is exact. Library rows are unit-normalized once (cached on the
//! library), so each query reduces to one matrix-vector product. The
//! chunked path splits rows into fixed-size blocks whose per-block top-k
//! results are merged; blocks may be scanned in parallel without changing
//! the result. Ties break by ascending row index.

use rayon::prelude::*;

use crate::embedding::{unit_f64, Embedding};
use crate::encoder::{encode, EncoderParams};
use crate::error::{Error, Result};
use crate::library::RecipeLibrary;

pub const DEFAULT_BLOCK_ROWS: usize = 4096;

/// Ranked ids with their similarities, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    /// (id, cosine similarity) pairs, similarity non-increasing.
    pub ranked: Vec<(String, f64)>,
    /// The k that was asked for; `ranked` holds `min(k, N)` entries.
    pub k: usize,
}

fn validate_query(lib: &RecipeLibrary, query: &Embedding, k: usize) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::InvalidK(k));
    }
    if query.dim() != lib.dim() {
        return Err(Error::dims(lib.dim(), query.dim()));
    }
    let unit_q = unit_f64(query)?;
    if lib.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    Ok(unit_q)
}

/// Cosine of the query against row `row`, clamped to [-1, 1].
fn row_similarity(lib: &RecipeLibrary, unit_q: &[f64], row: usize) -> f64 {
    let mut dot = 0.0f64;
    for (&u, &q) in lib.unit_row(row).iter().zip(unit_q) {
        dot += u * q;
    }
    dot.clamp(-1.0, 1.0)
}

/// Descending similarity, ascending row index on ties.
fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
    b.1.partial_cmp(&a.1)
        .expect("similarities are finite")
        .then(a.0.cmp(&b.0))
}

fn to_result(lib: &RecipeLibrary, mut hits: Vec<(usize, f64)>, k: usize) -> QueryResult {
    hits.sort_unstable_by(rank_order);
    hits.truncate(k);
    QueryResult {
        ranked: hits
            .into_iter()
            .map(|(row, sim)| (lib.id_at(row).to_string(), sim))
            .collect(),
        k,
    }
}

/// Exact top-k by cosine similarity, scanning in blocks of
/// [`DEFAULT_BLOCK_ROWS`] rows.
pub fn query_topk(lib: &RecipeLibrary, query: &Embedding, k: usize) -> Result<QueryResult> {
    query_topk_in_blocks(lib, query, k, DEFAULT_BLOCK_ROWS)
}

/// Chunked scan with an explicit block size. Per-block top-k candidates are
/// merged with the same ordering rule, so any block size gives identical
/// results.
pub fn query_topk_in_blocks(
    lib: &RecipeLibrary,
    query: &Embedding,
    k: usize,
    block_rows: usize,
) -> Result<QueryResult> {
    let unit_q = validate_query(lib, query, k)?;
    let block_rows = block_rows.max(1);
    let n = lib.len();
    let blocks: Vec<(usize, usize)> = (0..n)
        .step_by(block_rows)
        .map(|start| (start, (start + block_rows).min(n)))
        .collect();
    let candidates: Vec<(usize, f64)> = blocks
        .par_iter()
        .map(|&(start, end)| {
            let mut block: Vec<(usize, f64)> = (start..end)
                .map(|row| (row, row_similarity(lib, &unit_q, row)))
                .collect();
            block.sort_unstable_by(rank_order);
            block.truncate(k);
            block
        })
        .flatten()
        .collect();
    Ok(to_result(lib, candidates, k))
}

/// Single full scan followed by one sort; the reference path the chunked
/// scan is checked against.
pub fn query_topk_naive(lib: &RecipeLibrary, query: &Embedding, k: usize) -> Result<QueryResult> {
    let unit_q = validate_query(lib, query, k)?;
    let hits: Vec<(usize, f64)> = (0..lib.len())
        .map(|row| (row, row_similarity(lib, &unit_q, row)))
        .collect();
    Ok(to_result(lib, hits, k))
}

/// Encode image-side features, then retrieve.
pub fn query_image_features(
    lib: &RecipeLibrary,
    params: &EncoderParams,
    features: &[f64],
    k: usize,
) -> Result<QueryResult> {
    let query = encode(params, features)?;
    query_topk(lib, &query, k)
}

/// 1-based position of `true_id` in the full similarity-sorted order of the
/// library, with the same tie rule as [`query_topk`].
pub fn rank_of(lib: &RecipeLibrary, query: &Embedding, true_id: &str) -> Result<usize> {
    let true_row = lib
        .row_of(true_id)
        .ok_or_else(|| Error::NotFound(true_id.to_string()))?;
    if query.dim() != lib.dim() {
        return Err(Error::dims(lib.dim(), query.dim()));
    }
    let unit_q = unit_f64(query)?;
    let sim_true = row_similarity(lib, &unit_q, true_row);
    let mut rank = 1usize;
    for row in 0..lib.len() {
        if row == true_row {
            continue;
        }
        let sim = row_similarity(lib, &unit_q, row);
        if sim > sim_true || (sim == sim_true && row < true_row) {
            rank += 1;
        }
    }
    Ok(rank)
}
