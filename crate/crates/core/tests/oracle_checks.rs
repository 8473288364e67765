//! Derived-value checks: every number asserted here is produced by an
//! independent oracle from `common`, not by the code path under test.

// index-based loops keep the linear algebra here legible
#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recipe_retrieval::{
    batch_loss, encode, encode_batch, evaluate, generate_synthetic_pairs, loss_gradient,
    query_topk, query_topk_in_blocks, query_topk_naive, rank_of, train, Activation, Embedding,
    EncoderParams, EvalConfig, LabeledQuery, Matrix, NegativeStrategy, RecipeLibrary,
    RecipeRecord, TrainConfig,
};

fn record(id: &str) -> RecipeRecord {
    RecipeRecord {
        id: id.into(),
        title: format!("title {id}"),
        ingredients: vec![],
        instructions: vec![],
        source_url: None,
    }
}

fn library_from_rows(rows: &[Vec<f32>]) -> RecipeLibrary {
    let dim = rows[0].len();
    RecipeLibrary::build(
        rows.iter()
            .enumerate()
            .map(|(i, v)| (record(&format!("r{i}")), Embedding::new(v.clone()).unwrap()))
            .collect(),
        dim,
    )
    .unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.random_range(-1.5..1.5))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

#[test]
fn encode_matches_triple_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for case in 0..20 {
        let f_dim = rng.random_range(1..8);
        let d_dim = rng.random_range(1..8);
        let activation = if case % 2 == 0 {
            Activation::Identity
        } else {
            Activation::Tanh
        };
        let params = EncoderParams::init(f_dim, d_dim, activation, case).unwrap();
        let features: Vec<f64> = (0..f_dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let got = encode(&params, &features).unwrap();
        let want = oracle_affine(params.weight(), params.bias(), activation, &features);
        for (g, w) in got.values().iter().zip(&want) {
            assert!((*g as f64 - w).abs() < 1e-6, "case {case}: {g} vs {w}");
        }
    }
}

#[test]
fn batch_loss_matches_double_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = TrainConfig {
        negative_strategy: NegativeStrategy::InBatchAll,
        ..TrainConfig::default()
    };
    for _ in 0..30 {
        let m = rng.random_range(2..7);
        let d = rng.random_range(2..6);
        let a = random_matrix(&mut rng, m, d);
        let b = random_matrix(&mut rng, m, d);
        let got = batch_loss(&a, &b, &cfg).unwrap();
        let want = oracle_in_batch_all_loss(&a, &b, cfg.margin);
        assert!((got - want).abs() < 1e-9, "got {got}, oracle {want}");
    }
}

#[test]
fn gradient_matches_finite_differences_small_case() {
    // F=3, D=2, M=4 reference configuration
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let cfg = TrainConfig {
        seed: 3,
        negative_strategy: NegativeStrategy::InBatchAll,
        ..TrainConfig::default()
    };
    let mut checked = 0;
    let mut attempt = 0;
    while checked < 5 {
        attempt += 1;
        assert!(attempt < 200, "could not find kink-free configurations");
        let params = EncoderParams::init(3, 2, Activation::Identity, attempt).unwrap();
        let features = random_matrix(&mut rng, 4, 3);
        let targets = random_matrix(&mut rng, 4, 2);
        if min_hinge_margin(&params, &features, &targets, cfg.margin) < 1e-3 {
            continue;
        }
        let grad = loss_gradient(&params, &features, &targets, &cfg).unwrap();
        let (fd_weight, fd_bias) = fd_gradient(&params, &features, &targets, &cfg, 1e-5);
        let err_w = max_relative_error(grad.weight.data(), &fd_weight);
        let err_b = max_relative_error(&grad.bias, &fd_bias);
        assert!(err_w < 1e-4, "weight gradient off by {err_w}");
        assert!(err_b < 1e-4, "bias gradient off by {err_b}");
        checked += 1;
    }
}

#[test]
fn added_entry_ranks_first_for_its_own_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let rows = random_rows(&mut rng, 40, 12);
    let mut lib = library_from_rows(&rows);
    let new_emb: Vec<f32> = (0..12).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    lib.add_entry(record("fresh"), Embedding::new(new_emb.clone()).unwrap())
        .unwrap();

    let query = Embedding::new(new_emb.clone()).unwrap();
    let res = query_topk(&lib, &query, 1).unwrap();
    assert_eq!(res.ranked[0].0, "fresh");

    // cross-check with the brute-force rank oracle over all rows
    let mut all_rows = rows;
    all_rows.push(new_emb.clone());
    assert_eq!(oracle_rank(&all_rows, &new_emb, all_rows.len() - 1), 1);
    assert_eq!(rank_of(&lib, &query, "fresh").unwrap(), 1);
}

#[test]
fn image_feature_query_equals_encode_then_topk() {
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let rows = random_rows(&mut rng, 50, 6);
    let lib = library_from_rows(&rows);
    for case in 0..10 {
        let params = EncoderParams::init(9, 6, Activation::Tanh, case).unwrap();
        let features: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let composed = recipe_retrieval::query_image_features(&lib, &params, &features, 7).unwrap();
        let two_step = query_topk(&lib, &encode(&params, &features).unwrap(), 7).unwrap();
        assert_eq!(composed, two_step, "case {case}");
    }
}

#[test]
fn rank_of_matches_full_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let rows = random_rows(&mut rng, 100, 16);
    let lib = library_from_rows(&rows);
    for case in 0..25 {
        let query: Vec<f32> = (0..16).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let true_row = rng.random_range(0..rows.len());
        let got = rank_of(
            &lib,
            &Embedding::new(query.clone()).unwrap(),
            &format!("r{true_row}"),
        )
        .unwrap();
        let want = oracle_rank(&rows, &query, true_row);
        assert_eq!(got, want, "case {case}");
    }
}

#[test]
fn topk_matches_sort_oracle_with_duplicates() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut rows = random_rows(&mut rng, 60, 8);
    // duplicated rows force ties; the oracle's stable sort keeps low row
    // index first, and query_topk must agree
    rows[30] = rows[4].clone();
    rows[45] = rows[4].clone();
    let lib = library_from_rows(&rows);
    let query = rows[4].clone();
    let got = query_topk(&lib, &Embedding::new(query.clone()).unwrap(), 10).unwrap();
    let want = oracle_topk(&rows, &query, 10);
    assert_eq!(got.ranked.len(), want.len());
    for ((id, sim), (row, oracle_sim)) in got.ranked.iter().zip(&want) {
        assert_eq!(id, &format!("r{row}"));
        assert_eq!(sim, oracle_sim);
    }
}

#[test]
fn evaluate_matches_protocol_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let n = 400;
    let dim = 12;
    let rows = random_rows(&mut rng, n, dim);
    let lib = library_from_rows(&rows);

    // 200 noisy queries pointing at random true rows
    let mut queries = Vec::new();
    let mut oracle_queries = Vec::new();
    for _ in 0..200 {
        let true_row = rng.random_range(0..n);
        let mut q = rows[true_row].clone();
        for v in &mut q {
            *v += rng.random_range(-0.3f32..0.3);
        }
        if q.iter().all(|&x| x == 0.0) {
            q[0] = 1.0;
        }
        queries.push(LabeledQuery {
            embedding: Embedding::new(q.clone()).unwrap(),
            true_id: format!("r{true_row}"),
        });
        oracle_queries.push((q, true_row));
    }

    let cfg = EvalConfig {
        pool_size: 100,
        repetitions: 10,
        ks: vec![1, 5, 10],
        seed: 2024,
    };
    let report = evaluate(&queries, &lib, &cfg).unwrap();
    let oracle = oracle_evaluate(&rows, &oracle_queries, 100, 10, &[1, 5, 10], 2024);

    assert_eq!(report.per_repetition_medr, oracle.per_repetition_medr);
    assert_eq!(report.medr, oracle.medr);
    for (k, want) in oracle.recall_at {
        assert_eq!(report.recall_at[&k], want, "recall@{k}");
    }
}

#[test]
fn realizable_targets_train_to_perfect_recall() {
    // targets are an exact affine image of the features, so an identity
    // activation encoder can match them exactly; after training, every
    // training query must rank its own target first
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (f_dim, d_dim, m) = (8, 8, 60);
    let features = random_matrix(&mut rng, m, f_dim);
    let true_map = random_matrix(&mut rng, f_dim, d_dim);
    let mut target_rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0f64; d_dim];
        for (f, &x) in features.row(i).iter().enumerate() {
            for d in 0..d_dim {
                row[d] += x * true_map.row(f)[d];
            }
        }
        target_rows.push(row);
    }
    let targets = Matrix::from_rows(&target_rows, d_dim).unwrap();

    let cfg = TrainConfig {
        margin: 0.3,
        learning_rate: 0.6,
        epochs: 120,
        batch_size: 20,
        seed: 5,
        negative_strategy: NegativeStrategy::InBatchAll,
    };
    let init = EncoderParams::init(f_dim, d_dim, Activation::Identity, 11).unwrap();
    let report = train(init, &features, &targets, &cfg).unwrap();
    assert!(
        report.loss_trace.last().unwrap() < report.loss_trace.first().unwrap(),
        "loss should decrease: {:?}",
        report.loss_trace
    );

    let lib = RecipeLibrary::build(
        (0..m)
            .map(|i| {
                (
                    record(&format!("t{i}")),
                    Embedding::from_f64(targets.row(i)).unwrap(),
                )
            })
            .collect(),
        d_dim,
    )
    .unwrap();
    let encoded = encode_batch(&report.params, &features).unwrap();
    let mut ranks = Vec::with_capacity(m);
    for i in 0..m {
        let q = Embedding::from_f64(encoded.row(i)).unwrap();
        ranks.push(rank_of(&lib, &q, &format!("t{i}")).unwrap());
    }
    let medr = oracle_median(&ranks);
    assert_eq!(medr, 1.0, "ranks {ranks:?}");
}

#[test]
fn noiseless_synthetic_features_are_exact_linear_images() {
    let pairs = generate_synthetic_pairs(50, 6, 4, 0.0, 99).unwrap();
    // with sigma = 0 the feature matrix has rank at most D: any D+1 columns
    // of X^T are linearly dependent; verify via a least-squares residual of
    // reconstructing features from targets
    let targets = Matrix::from_embeddings(&pairs.targets, 4).unwrap();
    // solve G column-by-column from the first 4 samples, then check the rest
    // (the latent matrix of 4 random unit vectors is invertible a.s.)
    let mut z4 = [[0.0f64; 4]; 4];
    for i in 0..4 {
        for d in 0..4 {
            z4[i][d] = targets.row(i)[d];
        }
    }
    let inv = invert4(&z4).expect("latent block invertible");
    for f in 0..6 {
        // g_f = inv * x_f over the first four samples
        let mut g = [0.0f64; 4];
        for d in 0..4 {
            for i in 0..4 {
                g[d] += inv[d][i] * pairs.features.row(i)[f];
            }
        }
        for sample in 4..50 {
            let mut predicted = 0.0;
            for d in 0..4 {
                predicted += g[d] * targets.row(sample)[d];
            }
            let actual = pairs.features.row(sample)[f];
            assert!(
                (predicted - actual).abs() < 1e-6,
                "sample {sample}, feature {f}: predicted {predicted}, actual {actual}"
            );
        }
    }
}

fn invert4(m: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    // Gauss-Jordan with partial pivoting
    let mut a = *m;
    let mut inv = [[0.0; 4]; 4];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..4 {
        let pivot = (col..4).max_by(|&x, &y| {
            a[x][col].abs().partial_cmp(&a[y][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = a[col][col];
        for j in 0..4 {
            a[col][j] /= scale;
            inv[col][j] /= scale;
        }
        for row in 0..4 {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            for j in 0..4 {
                a[row][j] -= factor * a[col][j];
                inv[row][j] -= factor * inv[col][j];
            }
        }
    }
    Some(inv)
}

#[test]
fn chunked_and_naive_paths_agree_on_random_libraries() {
    let mut rng = ChaCha8Rng::seed_from_u64(4096);
    for case in 0..10 {
        let n = rng.random_range(1..300);
        let dim = rng.random_range(1..24);
        let rows = random_rows(&mut rng, n, dim);
        let lib = library_from_rows(&rows);
        let query: Vec<f32> = loop {
            let q: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            if q.iter().any(|&x| x != 0.0) {
                break q;
            }
        };
        let q = Embedding::new(query).unwrap();
        let k = rng.random_range(1..=n + 3);
        let naive = query_topk_naive(&lib, &q, k).unwrap();
        for block in [1, 5, 37, 4096] {
            let chunked = query_topk_in_blocks(&lib, &q, k, block).unwrap();
            assert_eq!(naive, chunked, "case {case}, block {block}");
        }
    }
}
