//! Cross-modal recipe retrieval at desk scale: an embedding library with
//! binary persistence, a trainable projection encoder optimized with a
//! bi-directional triplet cosine loss against pre-computed target
//! embeddings, exact cosine top-k search, and MedR / Recall@K evaluation.

pub mod embedding;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod library;
pub mod matrix;
pub mod retrieval;
pub mod training;

pub use embedding::{cosine_similarity, dot, l2_normalize, Embedding};
pub use encoder::{encode, encode_batch, Activation, EncoderParams};
pub use error::{Error, Result};
pub use evaluation::{
    evaluate, generate_synthetic_pairs, median_rank, recall_at_k, EvalConfig, EvalReport,
    LabeledQuery, SyntheticPairs,
};
pub use library::{RecipeLibrary, RecipeRecord};
pub use matrix::Matrix;
pub use retrieval::{
    query_image_features, query_topk, query_topk_in_blocks, query_topk_naive, rank_of,
    QueryResult, DEFAULT_BLOCK_ROWS,
};
pub use training::{
    batch_loss, bidirectional_loss, loss_gradient, loss_trace_csv, sample_negative, train,
    triplet_cos_loss, LossGradient, NegativeStrategy, TrainConfig, TrainReport, TripletBatch,
};
