//! Retrieval metrics (MedR, Recall@K) under a sampled-pool protocol, plus a
//! synthetic paired-data generator for desk-scale experiments.
//!
//! Protocol: per repetition `r`, a pool of `pool_size` distinct library
//! rows is drawn with a partial Fisher-Yates shuffle seeded with
//! `seed + r`. Each query is ranked within that pool; when its true row is
//! not in the pool, the pool's last sampled element is replaced by the true
//! row for that query. MedR is the median rank per repetition, reported as
//! the mean over repetitions; Recall@K pools all (repetition, query) rank
//! observations.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{unit_f64, Embedding};
use crate::error::{Error, Result};
use crate::library::RecipeLibrary;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub pool_size: usize,
    pub repetitions: usize,
    pub ks: Vec<usize>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pool_size: 1000,
            repetitions: 10,
            ks: vec![1, 5, 10],
            seed: 0,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pool_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "pool size must be at least 2, got {}",
                self.pool_size
            )));
        }
        if self.repetitions < 1 {
            return Err(Error::InvalidConfig("repetitions must be at least 1".into()));
        }
        if self.ks.is_empty() {
            return Err(Error::InvalidConfig("at least one K is required".into()));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| k < 1) {
            return Err(Error::InvalidK(k));
        }
        Ok(())
    }
}

/// MedR and Recall@K with the protocol parameters that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub medr: f64,
    pub recall_at: BTreeMap<usize, f64>,
    pub per_repetition_medr: Vec<f64>,
    pub config: EvalConfig,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("eval report: {e}")))
    }

    /// Aligned plain-text table, one metric per column.
    pub fn to_table(&self) -> String {
        let mut header = format!("{:>8}", "MedR");
        let mut row = format!("{:>8.2}", self.medr);
        for (&k, &recall) in &self.recall_at {
            let label = format!("Recall@{k}");
            header.push_str(&format!("  {label:>10}"));
            row.push_str(&format!("  {recall:>10.4}"));
        }
        format!("{header}\n{row}\n")
    }
}

/// Median of 1-based ranks; even-length lists take the mean of the two
/// central values.
pub fn median_rank(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    })
}

/// Fraction of ranks that are ≤ K.
pub fn recall_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k < 1 {
        return Err(Error::InvalidK(k));
    }
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    Ok(hits as f64 / ranks.len() as f64)
}

/// A query embedding paired with the id of its true match.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledQuery {
    pub embedding: Embedding,
    pub true_id: String,
}

/// Runs the pooled protocol described at module level. Deterministic in
/// `cfg.seed`; repetitions evaluate in parallel with per-repetition
/// derived seeds, so parallel and serial runs agree.
pub fn evaluate(
    queries: &[LabeledQuery],
    lib: &RecipeLibrary,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    if queries.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = lib.len();
    if cfg.pool_size > n {
        return Err(Error::PoolTooLarge {
            pool_size: cfg.pool_size,
            library_size: n,
        });
    }

    let mut true_rows = Vec::with_capacity(queries.len());
    let mut unit_queries = Vec::with_capacity(queries.len());
    for q in queries {
        let row = lib
            .row_of(&q.true_id)
            .ok_or_else(|| Error::MissingTrueId(q.true_id.clone()))?;
        if q.embedding.dim() != lib.dim() {
            return Err(Error::dims(lib.dim(), q.embedding.dim()));
        }
        true_rows.push(row);
        unit_queries.push(unit_f64(&q.embedding)?);
    }

    let per_rep: Vec<(f64, Vec<usize>)> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(rep as u64));
            let pool = sample_pool(&mut rng, n, cfg.pool_size);
            let mut in_pool = vec![false; n];
            for &p in &pool {
                in_pool[p] = true;
            }
            let ranks: Vec<usize> = unit_queries
                .iter()
                .zip(&true_rows)
                .map(|(unit_q, &true_row)| {
                    rank_in_pool(lib, unit_q, true_row, &pool, in_pool[true_row])
                })
                .collect();
            let medr = median_rank(&ranks).expect("queries are non-empty");
            (medr, ranks)
        })
        .collect();

    let per_repetition_medr: Vec<f64> = per_rep.iter().map(|(m, _)| *m).collect();
    let all_ranks: Vec<usize> = per_rep.into_iter().flat_map(|(_, r)| r).collect();
    let medr = per_repetition_medr.iter().sum::<f64>() / per_repetition_medr.len() as f64;
    let mut recall_at = BTreeMap::new();
    for &k in &cfg.ks {
        recall_at.insert(k, recall_at_k(&all_ranks, k)?);
    }
    Ok(EvalReport {
        medr,
        recall_at,
        per_repetition_medr,
        config: cfg.clone(),
    })
}

/// First `pool_size` entries of a partial Fisher-Yates pass over `0..n`.
fn sample_pool<R: Rng + ?Sized>(rng: &mut R, n: usize, pool_size: usize) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..pool_size {
        let j = rng.random_range(i..n);
        indices.swap(i, j);
    }
    indices.truncate(pool_size);
    indices
}

/// Rank of `true_row` among the pool members, by cosine similarity to the
/// unit query, global row index breaking ties. When the true row is not in
/// the pool, it stands in for the pool's last element.
fn rank_in_pool(
    lib: &RecipeLibrary,
    unit_q: &[f64],
    true_row: usize,
    pool: &[usize],
    true_in_pool: bool,
) -> usize {
    let members: &[usize] = if true_in_pool {
        pool
    } else {
        &pool[..pool.len() - 1]
    };
    let sim_true = pool_similarity(lib, unit_q, true_row);
    let mut rank = 1usize;
    for &row in members {
        if row == true_row {
            continue;
        }
        let sim = pool_similarity(lib, unit_q, row);
        if sim > sim_true || (sim == sim_true && row < true_row) {
            rank += 1;
        }
    }
    rank
}

fn pool_similarity(lib: &RecipeLibrary, unit_q: &[f64], row: usize) -> f64 {
    let mut dot = 0.0f64;
    for (&u, &q) in lib.unit_row(row).iter().zip(unit_q) {
        dot += u * q;
    }
    dot.clamp(-1.0, 1.0)
}

/// Synthetic paired data: unit-vector targets `z_i`, features
/// `x_i = G z_i + noise` for a fixed seed-derived full-rank matrix `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPairs {
    pub features: Matrix,
    pub targets: Vec<Embedding>,
    pub ids: Vec<String>,
}

pub fn generate_synthetic_pairs(
    count: usize,
    f_dim: usize,
    d_dim: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<SyntheticPairs> {
    if f_dim == 0 || d_dim == 0 {
        return Err(Error::InvalidDimension(format!(
            "feature/embedding dims must be at least 1, got F={f_dim}, D={d_dim}"
        )));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise sigma must be finite and non-negative, got {noise_sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mix = Matrix::zeros(f_dim, d_dim);
    for g in mix.data_mut() {
        *g = StandardNormal.sample(&mut rng);
    }

    let mut features = Matrix::zeros(count, f_dim);
    let mut targets = Vec::with_capacity(count);
    let mut ids = Vec::with_capacity(count);
    for i in 0..count {
        let mut latent: Vec<f64> = (0..d_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut norm = latent.iter().map(|&v| v * v).sum::<f64>().sqrt();
        while norm == 0.0 {
            latent = (0..d_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            norm = latent.iter().map(|&v| v * v).sum::<f64>().sqrt();
        }
        for v in &mut latent {
            *v /= norm;
        }
        let row = features.row_mut(i);
        for (f, slot) in row.iter_mut().enumerate() {
            let mut x = 0.0;
            for (d, &z) in latent.iter().enumerate() {
                x += mix.row(f)[d] * z;
            }
            let noise: f64 = StandardNormal.sample(&mut rng);
            *slot = x + noise_sigma * noise;
        }
        targets.push(Embedding::from_f64(&latent)?);
        ids.push(format!("syn-{i:06}"));
    }
    Ok(SyntheticPairs {
        features,
        targets,
        ids,
    })
}
