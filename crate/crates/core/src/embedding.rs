//! Dense vector primitives shared by every other module.
//!
//! Embeddings carry `f32` values, matching the on-disk matrix format; all
//! reductions (dot products, norms) accumulate in `f64` so that sums over
//! long vectors keep full precision.

use crate::error::{Error, Result};

/// A fixed-dimension vector in the shared embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f32>,
}

impl Embedding {
    /// Wraps raw values. Rejects empty vectors and non-finite entries.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDimension(
                "embedding needs at least one entry".into(),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding entry {i}")));
        }
        Ok(Self { values })
    }

    /// Narrows `f64` values to storage precision.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| v as f64 * v as f64)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

fn check_dims(a: &Embedding, b: &Embedding) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::dims(a.dim(), b.dim()));
    }
    Ok(())
}

/// Standard inner product, accumulated in `f64`.
pub fn dot(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| x as f64 * y as f64)
        .sum())
}

/// Cosine similarity `dot(a,b) / (|a|·|b|)`, clamped to `[-1, 1]` so that
/// ranking never sees out-of-range values from round-off.
///
/// The single fused loop makes the result exactly symmetric in its
/// arguments.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_dims(a, b)?;
    let mut dot = 0.0f64;
    let mut norm_a = 0.0f64;
    let mut norm_b = 0.0f64;
    for (&x, &y) in a.values.iter().zip(&b.values) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        norm_a += x * x;
        norm_b += y * y;
    }
    if norm_a == 0.0 || norm_b == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (norm_a.sqrt() * norm_b.sqrt())).clamp(-1.0, 1.0))
}

/// Rescales to unit Euclidean norm.
pub fn l2_normalize(a: &Embedding) -> Result<Embedding> {
    let norm = a.l2_norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Embedding::new(
        a.values
            .iter()
            .map(|&v| (v as f64 / norm) as f32)
            .collect(),
    )
}

/// Unit-norm `f64` copy of an embedding; the retrieval scan kernel works on
/// these so each query reduces to plain dot products.
pub(crate) fn unit_f64(a: &Embedding) -> Result<Vec<f64>> {
    let norm = a.l2_norm();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(a.values.iter().map(|&v| v as f64 / norm).collect())
}
