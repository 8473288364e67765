//! Shared fixtures for the benchmark targets.

use recipe_retrieval::{Embedding, RecipeLibrary, RecipeRecord};

/// Deterministic pseudo-random library; xorshift is plenty for benchmark
/// data and keeps this crate free of RNG dependencies.
pub fn synthetic_library(n: usize, dim: usize, seed: u64) -> RecipeLibrary {
    let mut state = seed | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f32 / (1u64 << 53) as f32 * 2.0 - 0.5
    };
    let pairs = (0..n)
        .map(|i| {
            let mut values: Vec<f32> = (0..dim).map(|_| next()).collect();
            if values.iter().all(|&v| v == 0.0) {
                values[0] = 1.0;
            }
            let record = RecipeRecord {
                id: format!("bench-{i:07}"),
                title: format!("bench recipe {i}"),
                ingredients: vec![],
                instructions: vec![],
                source_url: None,
            };
            (record, Embedding::new(values).unwrap())
        })
        .collect();
    RecipeLibrary::build(pairs, dim).unwrap()
}
