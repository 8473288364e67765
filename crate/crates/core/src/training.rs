//! Bi-directional triplet cosine loss, its analytic gradient through the
//! projection encoder, in-batch negative sampling and the SGD training loop.
//!
//! All loss and gradient math runs in `f64`. The hinge takes the zero
//! subgradient at its kink, and cosines inside the loss are left unclamped
//! so the analytic gradient matches finite differences of the forward pass
//! everywhere away from the hinge kink.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode_batch, EncoderParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// How the negative index j is chosen for each anchor i within a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeStrategy {
    /// One uniformly sampled j != i per anchor (M terms, seed-deterministic).
    InBatchRandom,
    /// All ordered pairs i != j (M·(M-1) terms).
    InBatchAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub margin: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub negative_strategy: NegativeStrategy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.3,
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            negative_strategy: NegativeStrategy::InBatchAll,
        }
    }
}

impl TrainConfig {
    /// `epochs = 0` and `learning_rate = 0` are allowed; both make training
    /// a no-op, which the CLI relies on.
    pub fn validate(&self) -> Result<()> {
        if !self.margin.is_finite() || !(0.0..=2.0).contains(&self.margin) {
            return Err(Error::InvalidConfig(format!(
                "margin must lie in [0, 2], got {}",
                self.margin
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Anchor/positive/negative rows with matching shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    anchors: Matrix,
    positives: Matrix,
    negatives: Matrix,
}

impl TripletBatch {
    pub fn new(anchors: Matrix, positives: Matrix, negatives: Matrix) -> Result<Self> {
        if positives.rows() != anchors.rows() || negatives.rows() != anchors.rows() {
            return Err(Error::dims(anchors.rows(), positives.rows().max(negatives.rows())));
        }
        if positives.cols() != anchors.cols() || negatives.cols() != anchors.cols() {
            return Err(Error::dims(anchors.cols(), positives.cols().max(negatives.cols())));
        }
        for m in [&anchors, &positives, &negatives] {
            m.check_finite("triplet batch")?;
            for r in 0..m.rows() {
                if m.row(r).iter().all(|&v| v == 0.0) {
                    return Err(Error::ZeroVector);
                }
            }
        }
        Ok(Self {
            anchors,
            positives,
            negatives,
        })
    }

    pub fn len(&self) -> usize {
        self.anchors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mean_loss(&self, margin: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut sum = 0.0;
        for r in 0..self.len() {
            sum += triplet_cos_loss(
                self.anchors.row(r),
                self.positives.row(r),
                self.negatives.row(r),
                margin,
            )?;
        }
        Ok(sum / self.len() as f64)
    }
}

/// max(0, s), letting NaN through so a poisoned loss is caught instead of
/// silently becoming 0.
fn hinge(s: f64) -> f64 {
    if s > 0.0 || s.is_nan() {
        s
    } else {
        0.0
    }
}

/// Unclamped cosine plus both norms; the norms feed the gradient.
fn cosine_with_norms(a: &[f64], b: &[f64]) -> Result<(f64, f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let (na, nb) = (na.sqrt(), nb.sqrt());
    Ok((dot / (na * nb), na, nb))
}

/// Triplet cosine loss `max(0, c(a, n) - c(a, p) + m)` for a single
/// anchor/positive/negative.
pub fn triplet_cos_loss(anchor: &[f64], positive: &[f64], negative: &[f64], margin: f64) -> Result<f64> {
    let (c_an, _, _) = cosine_with_norms(anchor, negative)?;
    let (c_ap, _, _) = cosine_with_norms(anchor, positive)?;
    Ok(hinge(c_an - c_ap + margin))
}

/// The bi-directional pair loss on feature sets `a` and `b`: the triplet
/// loss applied in both cross-modal directions,
/// `L(a_i, b_i, b_j) + L(b_i, a_i, a_j)`.
pub fn bidirectional_loss(
    a_set: &Matrix,
    b_set: &Matrix,
    i: usize,
    j: usize,
    margin: f64,
) -> Result<f64> {
    if a_set.rows() != b_set.rows() || a_set.cols() != b_set.cols() {
        return Err(Error::dims(a_set.rows(), b_set.rows()));
    }
    let m = a_set.rows();
    for idx in [i, j] {
        if idx >= m {
            return Err(Error::IndexOutOfRange { index: idx, len: m });
        }
    }
    if i == j {
        return Err(Error::SameIndex(i));
    }
    let forward = triplet_cos_loss(a_set.row(i), b_set.row(i), b_set.row(j), margin)?;
    let backward = triplet_cos_loss(b_set.row(i), a_set.row(i), a_set.row(j), margin)?;
    Ok(forward + backward)
}

/// Uniformly samples a negative index j != anchor from `0..m`.
pub fn sample_negative<R: Rng + ?Sized>(m: usize, anchor: usize, rng: &mut R) -> Result<usize> {
    if m < 2 {
        return Err(Error::BatchTooSmall(m));
    }
    if anchor >= m {
        return Err(Error::IndexOutOfRange { index: anchor, len: m });
    }
    let j = rng.random_range(0..m - 1);
    Ok(if j >= anchor { j + 1 } else { j })
}

/// The (i, j) pairs the loss averages over, per strategy. The random
/// strategy is deterministic in `seed`.
fn sampled_pairs(m: usize, strategy: NegativeStrategy, seed: u64) -> Result<Vec<(usize, usize)>> {
    if m < 2 {
        return Err(Error::BatchTooSmall(m));
    }
    match strategy {
        NegativeStrategy::InBatchAll => {
            let mut pairs = Vec::with_capacity(m * (m - 1));
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        pairs.push((i, j));
                    }
                }
            }
            Ok(pairs)
        }
        NegativeStrategy::InBatchRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..m)
                .map(|i| sample_negative(m, i, &mut rng).map(|j| (i, j)))
                .collect()
        }
    }
}

/// Mean bi-directional loss over the sampled (i, j) pairs.
pub fn batch_loss(a_set: &Matrix, b_set: &Matrix, cfg: &TrainConfig) -> Result<f64> {
    cfg.validate()?;
    if a_set.rows() != b_set.rows() || a_set.cols() != b_set.cols() {
        return Err(Error::dims(a_set.rows(), b_set.rows()));
    }
    let pairs = sampled_pairs(a_set.rows(), cfg.negative_strategy, cfg.seed)?;
    let mut sum = 0.0;
    for &(i, j) in &pairs {
        sum += bidirectional_loss(a_set, b_set, i, j, cfg.margin)?;
    }
    Ok(sum / pairs.len() as f64)
}

/// Gradient of `batch_loss(encode_batch(params, features), targets)` with
/// respect to the encoder params, plus the forward loss value.
#[derive(Debug, Clone)]
pub struct LossGradient {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub loss: f64,
}

pub fn loss_gradient(
    params: &EncoderParams,
    features: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
) -> Result<LossGradient> {
    cfg.validate()?;
    if features.rows() != targets.rows() {
        return Err(Error::dims(features.rows(), targets.rows()));
    }
    if targets.cols() != params.embedding_dim() {
        return Err(Error::dims(params.embedding_dim(), targets.cols()));
    }
    let m = features.rows();
    let d = params.embedding_dim();
    let pairs = sampled_pairs(m, cfg.negative_strategy, cfg.seed)?;

    let encoded = encode_batch(params, features)?;

    // Per-row norms; a zero row means cosine (and the whole triplet) is
    // undefined.
    let row_norm = |mat: &Matrix, r: usize| -> Result<f64> {
        let n = mat.row(r).iter().map(|&v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(n)
    };
    let mut norm_a = Vec::with_capacity(m);
    let mut norm_b = Vec::with_capacity(m);
    for r in 0..m {
        norm_a.push(row_norm(&encoded, r)?);
        norm_b.push(row_norm(targets, r)?);
    }

    // cos_table[i][j] = cos(encoded_i, target_j), unclamped
    let mut cos_table = Matrix::zeros(m, m);
    for (i, &na) in norm_a.iter().enumerate() {
        let a_row = encoded.row(i);
        let cos_row = cos_table.row_mut(i);
        for (j, &nb) in norm_b.iter().enumerate() {
            let dot: f64 = a_row.iter().zip(targets.row(j)).map(|(&x, &y)| x * y).sum();
            cos_row[j] = dot / (na * nb);
        }
    }

    // d(cos(u, w))/du = w/(|u||w|) - cos·u/|u|^2, accumulated into `out`
    let add_cos_grad =
        |out: &mut [f64], w: &[f64], u: &[f64], cos: f64, nu: f64, nw: f64, scale: f64| {
            let ka = scale / (nu * nw);
            let kb = scale * cos / (nu * nu);
            for ((o, &wv), &uv) in out.iter_mut().zip(w).zip(u) {
                *o += ka * wv - kb * uv;
            }
        };

    let mut d_encoded = Matrix::zeros(m, d);
    let mut loss_sum = 0.0;
    for &(i, j) in &pairs {
        // forward direction: anchor = encoded_i, positive = target_i,
        // negative = target_j
        let s1 = cos_table.row(i)[j] - cos_table.row(i)[i] + cfg.margin;
        // backward direction: anchor = target_i, positive = encoded_i,
        // negative = encoded_j
        let s2 = cos_table.row(j)[i] - cos_table.row(i)[i] + cfg.margin;
        loss_sum += hinge(s1) + hinge(s2);
        if s1 > 0.0 {
            add_cos_grad(
                d_encoded.row_mut(i),
                targets.row(j),
                encoded.row(i),
                cos_table.row(i)[j],
                norm_a[i],
                norm_b[j],
                1.0,
            );
            add_cos_grad(
                d_encoded.row_mut(i),
                targets.row(i),
                encoded.row(i),
                cos_table.row(i)[i],
                norm_a[i],
                norm_b[i],
                -1.0,
            );
        }
        if s2 > 0.0 {
            add_cos_grad(
                d_encoded.row_mut(j),
                targets.row(i),
                encoded.row(j),
                cos_table.row(j)[i],
                norm_a[j],
                norm_b[i],
                1.0,
            );
            add_cos_grad(
                d_encoded.row_mut(i),
                targets.row(i),
                encoded.row(i),
                cos_table.row(i)[i],
                norm_a[i],
                norm_b[i],
                -1.0,
            );
        }
    }
    // same division as batch_loss so the reported loss matches it bit for bit
    let loss = loss_sum / pairs.len() as f64;
    let inv = 1.0 / pairs.len() as f64;

    // chain through the activation: dZ = dA * act'(A), with the mean factor
    for r in 0..m {
        let enc_row = encoded.row(r);
        let grad_row = d_encoded.row_mut(r);
        for c in 0..d {
            grad_row[c] *= inv * params.activation().derivative_from_output(enc_row[c]);
        }
    }

    // dW = X^T · dZ, dbias = column sums of dZ
    let mut d_weight = Matrix::zeros(params.feature_dim(), d);
    let mut d_bias = vec![0.0; d];
    for r in 0..m {
        let x_row = features.row(r);
        let g_row = d_encoded.row(r);
        for (f, &x) in x_row.iter().enumerate() {
            let w_row = d_weight.row_mut(f);
            for c in 0..d {
                w_row[c] += x * g_row[c];
            }
        }
        for c in 0..d {
            d_bias[c] += g_row[c];
        }
    }

    Ok(LossGradient {
        weight: d_weight,
        bias: d_bias,
        loss,
    })
}

/// Final params plus the per-epoch mean loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub params: EncoderParams,
    pub loss_trace: Vec<f64>,
}

/// Plain mini-batch SGD against frozen targets, deterministic in
/// `cfg.seed`: the epoch shuffle and the per-step negative sampling both
/// derive from it.
///
/// Remainder batches with a single row cannot form a pair and are skipped.
pub fn train(
    params: EncoderParams,
    features: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if features.rows() != targets.rows() {
        return Err(Error::dims(features.rows(), targets.rows()));
    }
    if features.rows() < 2 {
        return Err(Error::BatchTooSmall(features.rows()));
    }
    if features.cols() != params.feature_dim() {
        return Err(Error::dims(params.feature_dim(), features.cols()));
    }
    if targets.cols() != params.embedding_dim() {
        return Err(Error::dims(params.embedding_dim(), targets.cols()));
    }
    if cfg.batch_size < 2 {
        return Err(Error::BatchTooSmall(cfg.batch_size));
    }

    let m = features.rows();
    let mut params = params;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut shuffle_rng);

        let mut loss_weighted = 0.0;
        let mut rows_seen = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let batch_features = features.gather_rows(chunk);
            let batch_targets = targets.gather_rows(chunk);
            let step_cfg = TrainConfig {
                seed: step_seed(cfg.seed, epoch, batch_idx),
                ..cfg.clone()
            };
            let grad = loss_gradient(&params, &batch_features, &batch_targets, &step_cfg)?;

            let lr = cfg.learning_rate;
            for (w, g) in params.weight_mut().data_mut().iter_mut().zip(grad.weight.data()) {
                *w -= lr * g;
            }
            for (b, g) in params.bias_mut().iter_mut().zip(&grad.bias) {
                *b -= lr * g;
            }
            loss_weighted += grad.loss * chunk.len() as f64;
            rows_seen += chunk.len();
        }

        let mean = loss_weighted / rows_seen as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        trace.push(mean);
    }

    Ok(TrainReport {
        params,
        loss_trace: trace,
    })
}

/// Loss trace as `epoch,mean_loss` CSV (epochs are 1-based).
pub fn loss_trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("epoch,mean_loss\n");
    for (i, loss) in trace.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, loss));
    }
    out
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Decorrelates in-batch negative sampling across (epoch, batch) steps.
fn step_seed(seed: u64, epoch: usize, batch: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((epoch as u64) << 32) ^ batch as u64))
}
