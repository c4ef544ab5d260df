#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transnets_core::corpus::{ReviewRecord, TokenSequence};
use transnets_core::embeddings::EmbeddingTable;
use transnets_core::models::ModelDims;
use transnets_core::nn::Tensor;

pub fn tiny_dims() -> ModelDims {
    ModelDims {
        seq_len: 8,
        embed_dim: 4,
        filters: 3,
        window: 2,
        latent: 3,
        fm_rank: 2,
        layers: 2,
        ..ModelDims::default()
    }
}

pub const ROWS: usize = 20;

pub fn table(seed: u64, dim: usize) -> EmbeddingTable {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..ROWS * dim).map(|_| r.random_range(-1.0..1.0)).collect();
    EmbeddingTable::from_matrix(Tensor::matrix(ROWS, dim, data).unwrap()).unwrap()
}

pub fn seq(seed: u64, len: usize) -> TokenSequence {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    TokenSequence::new((0..len).map(|_| r.random_range(1..ROWS as u32)).collect())
}

pub fn records() -> Vec<ReviewRecord> {
    vec![
        ReviewRecord::new("u1", "i1", 4.0, "good"),
        ReviewRecord::new("u2", "i1", 2.0, "bad"),
        ReviewRecord::new("u1", "i2", 5.0, "great"),
    ]
}
