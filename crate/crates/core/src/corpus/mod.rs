//! Review ingestion types, tokenization, vocabularies, dataset splits and
//! profile-text construction.

mod profile;
mod split;
pub mod synth;
mod tokenize;
mod vocab;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use profile::{assemble_profile, build_profile_text};
pub use split::{split_dataset, split_indices, DatasetSplit, SplitIndices, DEFAULT_RATIOS};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, DEFAULT_VOCAB_SIZE, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

/// One (user, item, rating, text) interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    pub text: String,
}

impl ReviewRecord {
    pub fn new(user_id: impl Into<String>, item_id: impl Into<String>, rating: f64, text: impl Into<String>) -> Self {
        Self {
            user_id: user_id.into(),
            item_id: item_id.into(),
            rating,
            text: text.into(),
        }
    }

    /// True when this review is the joint review of `pair`.
    pub fn is_pair(&self, pair: (&str, &str)) -> bool {
        self.user_id == pair.0 && self.item_id == pair.1
    }
}

/// Token ids into a [`Vocabulary`], including the PAD and UNK specials.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence(Vec<u32>);

impl TokenSequence {
    pub fn new(ids: Vec<u32>) -> Self {
        Self(ids)
    }

    /// A sequence of `len` PAD tokens.
    pub fn padding(len: usize) -> Self {
        Self(alloc::vec![PAD; len])
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: u32) -> bool {
        self.0.contains(&id)
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

impl From<Vec<u32>> for TokenSequence {
    fn from(ids: Vec<u32>) -> Self {
        Self(ids)
    }
}
