//! Review-based rating prediction with TransNets and its baselines.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every piece of the
//! numerical pipeline: tokenization and vocabularies, frozen word
//! embeddings, a small reverse-mode gradient engine, factorization
//! machines, the model zoo (MF, DeepCoNN, DeepCoNN-rev_AB, TransNet,
//! TransNet-Ext), the sub-step training procedure, and evaluation.
//!
//! IO, file formats and the command line live in the companion `transnets`
//! crate.
#![no_std]

extern crate alloc;

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod fm;
pub mod gradcheck;
pub mod models;
pub mod nn;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
