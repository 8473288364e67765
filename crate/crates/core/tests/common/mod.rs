//! Independent oracles for the integration and acceptance suites. These
//! deliberately avoid the library's computation paths: cosines, rankings,
//! medians and the pooled protocol are all re-derived from scratch here.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recipe_retrieval::{
    batch_loss, encode_batch, Activation, EncoderParams, Matrix, TrainConfig,
};

/// Plain cosine over f64 slices, no clamping.
pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn hinge(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Brute-force mean bi-directional loss over all ordered pairs i != j,
/// re-deriving every cosine.
pub fn oracle_in_batch_all_loss(a_set: &Matrix, b_set: &Matrix, margin: f64) -> f64 {
    let m = a_set.rows();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let forward = hinge(
                oracle_cosine(a_set.row(i), b_set.row(j))
                    - oracle_cosine(a_set.row(i), b_set.row(i))
                    + margin,
            );
            let backward = hinge(
                oracle_cosine(b_set.row(i), a_set.row(j))
                    - oracle_cosine(b_set.row(i), a_set.row(i))
                    + margin,
            );
            sum += forward + backward;
            pairs += 1;
        }
    }
    sum / pairs as f64
}

/// Central finite differences of `batch_loss(encode_batch(params, x), b)`
/// with respect to every weight and bias coordinate.
pub fn fd_gradient(
    params: &EncoderParams,
    features: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
    h: f64,
) -> (Vec<f64>, Vec<f64>) {
    let f_dim = params.feature_dim();
    let d_dim = params.embedding_dim();
    let act = params.activation();
    let base_weight = params.weight().data().to_vec();
    let base_bias = params.bias().to_vec();

    let eval = |weight: &[f64], bias: &[f64]| -> f64 {
        let p = EncoderParams::from_parts(
            Matrix::from_vec(f_dim, d_dim, weight.to_vec()).unwrap(),
            bias.to_vec(),
            act,
        )
        .unwrap();
        let encoded = encode_batch(&p, features).unwrap();
        batch_loss(&encoded, targets, cfg).unwrap()
    };

    let mut weight_grad = vec![0.0; base_weight.len()];
    for i in 0..base_weight.len() {
        let mut plus = base_weight.clone();
        let mut minus = base_weight.clone();
        plus[i] += h;
        minus[i] -= h;
        weight_grad[i] = (eval(&plus, &base_bias) - eval(&minus, &base_bias)) / (2.0 * h);
    }
    let mut bias_grad = vec![0.0; base_bias.len()];
    for i in 0..base_bias.len() {
        let mut plus = base_bias.clone();
        let mut minus = base_bias.clone();
        plus[i] += h;
        minus[i] -= h;
        bias_grad[i] = (eval(&base_weight, &plus) - eval(&base_weight, &minus)) / (2.0 * h);
    }
    (weight_grad, bias_grad)
}

/// Relative error between analytic and finite-difference gradients; pairs
/// where both are essentially zero count as exact.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let scale = a.abs().max(n.abs());
            if scale < 1e-8 {
                0.0
            } else {
                (a - n).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Smallest |hinge argument| over ALL ordered pairs in both directions; a
/// superset of the pairs any strategy samples, used to keep finite
/// differences away from the hinge kink.
pub fn min_hinge_margin(
    params: &EncoderParams,
    features: &Matrix,
    targets: &Matrix,
    margin: f64,
) -> f64 {
    let encoded = encode_batch(params, features).unwrap();
    let m = encoded.rows();
    let mut closest = f64::INFINITY;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let s1 = oracle_cosine(encoded.row(i), targets.row(j))
                - oracle_cosine(encoded.row(i), targets.row(i))
                + margin;
            let s2 = oracle_cosine(targets.row(i), encoded.row(j))
                - oracle_cosine(targets.row(i), encoded.row(i))
                + margin;
            closest = closest.min(s1.abs()).min(s2.abs());
        }
    }
    closest
}

/// The spec'd retrieval oracle: compute every similarity the way the
/// engine defines it (unit-normalize, dot, clamp), stable-sort descending,
/// truncate.
pub fn oracle_topk(rows: &[Vec<f32>], query: &[f32], k: usize) -> Vec<(usize, f64)> {
    let unit = |v: &[f32]| -> Vec<f64> {
        let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
        v.iter().map(|&x| x as f64 / norm).collect()
    };
    let unit_q = unit(query);
    let mut scored: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let unit_row = unit(row);
            let mut dot = 0.0;
            for (u, q) in unit_row.iter().zip(&unit_q) {
                dot += u * q;
            }
            (i, dot.clamp(-1.0, 1.0))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    scored.truncate(k);
    scored
}

/// 1-based rank of `true_row` in the full sorted order (same oracle).
pub fn oracle_rank(rows: &[Vec<f32>], query: &[f32], true_row: usize) -> usize {
    let order = oracle_topk(rows, query, rows.len());
    order.iter().position(|&(row, _)| row == true_row).unwrap() + 1
}

pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| {
            loop {
                let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
                if v.iter().any(|&x| x != 0.0) {
                    return v;
                }
            }
        })
        .collect()
}

/// Independent run of the pooled evaluation protocol, sharing only the
/// seed and the documented sampling rule (partial Fisher-Yates over row
/// indices, seed + repetition, true row replaces the last pool slot when
/// absent).
pub struct OracleEvalOutcome {
    pub medr: f64,
    pub per_repetition_medr: Vec<f64>,
    pub recall_at: Vec<(usize, f64)>,
}

pub fn oracle_evaluate(
    rows: &[Vec<f32>],
    queries: &[(Vec<f32>, usize)],
    pool_size: usize,
    repetitions: usize,
    ks: &[usize],
    seed: u64,
) -> OracleEvalOutcome {
    let n = rows.len();
    let mut all_ranks = Vec::new();
    let mut per_rep = Vec::new();
    for rep in 0..repetitions {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64));
        let mut indices: Vec<usize> = (0..n).collect();
        for i in 0..pool_size {
            let j = rng.random_range(i..n);
            indices.swap(i, j);
        }
        let pool = &indices[..pool_size];

        let mut ranks = Vec::new();
        for (query, true_row) in queries {
            let in_pool = pool.contains(true_row);
            let members: Vec<usize> = if in_pool {
                pool.to_vec()
            } else {
                pool[..pool_size - 1].to_vec()
            };
            // full-order rank via the sort oracle restricted to the pool
            let mut member_rows: Vec<Vec<f32>> = Vec::new();
            let mut member_ids: Vec<usize> = Vec::new();
            for &row in &members {
                if row != *true_row {
                    member_rows.push(rows[row].clone());
                    member_ids.push(row);
                }
            }
            member_rows.push(rows[*true_row].clone());
            member_ids.push(*true_row);
            // sort by similarity desc, global row index asc
            let scored = oracle_topk(&member_rows, query, member_rows.len());
            let mut order: Vec<(usize, f64)> = scored
                .into_iter()
                .map(|(local, sim)| (member_ids[local], sim))
                .collect();
            order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let rank = order.iter().position(|&(row, _)| row == *true_row).unwrap() + 1;
            ranks.push(rank);
        }
        per_rep.push(oracle_median(&ranks));
        all_ranks.extend(ranks);
    }
    let medr = per_rep.iter().sum::<f64>() / per_rep.len() as f64;
    let recall_at = ks
        .iter()
        .map(|&k| {
            let hits = all_ranks.iter().filter(|&&r| r <= k).count();
            (k, hits as f64 / all_ranks.len() as f64)
        })
        .collect();
    OracleEvalOutcome {
        medr,
        per_repetition_medr: per_rep,
        recall_at,
    }
}

pub fn oracle_median(ranks: &[usize]) -> f64 {
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Naive triple-loop affine map plus activation, for checking `encode`.
pub fn oracle_affine(
    weight: &Matrix,
    bias: &[f64],
    activation: Activation,
    features: &[f64],
) -> Vec<f64> {
    let mut out = vec![0.0; weight.cols()];
    for d in 0..weight.cols() {
        let mut acc = 0.0;
        for (f, &x) in features.iter().enumerate() {
            acc += x * weight.row(f)[d];
        }
        acc += bias[d];
        out[d] = match activation {
            Activation::Identity => acc,
            Activation::Tanh => acc.tanh(),
        };
    }
    out
}
