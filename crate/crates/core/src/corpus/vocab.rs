use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

use super::TokenSequence;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const DEFAULT_VOCAB_SIZE: usize = 50_000;

/// Token to id map. Ids 0 and 1 are reserved for PAD and UNK; the `i`-th
/// regular token has id `i + 2`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Keeps the `max_size` most frequent tokens of `corpus`. Ties are
    /// broken by lexicographic order.
    pub fn build<D, S>(corpus: D, max_size: usize) -> Self
    where
        D: IntoIterator,
        D::Item: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for doc in corpus {
            for tok in doc {
                let tok = tok.as_ref();
                if let Some(c) = counts.get_mut(tok) {
                    *c += 1;
                } else {
                    counts.insert(String::from(tok), 1);
                }
            }
        }
        // BTreeMap iteration is lexicographic; a stable sort by descending
        // count therefore keeps ties in lexicographic order.
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by_key(|x| core::cmp::Reverse(x.1));
        ranked.truncate(max_size);
        let tokens = ranked.into_iter().map(|(t, _)| t).collect();
        Self::from_tokens(tokens).expect("counted tokens are unique")
    }

    /// Rebuilds a vocabulary from its regular tokens in id order.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Config(format!("invalid vocabulary token {t:?}")));
            }
            if t == PAD_TOKEN || t == UNK_TOKEN {
                return Err(Error::Config(format!("reserved token {t} in vocabulary")));
            }
            if index.insert(t.clone(), i as u32 + 2).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Regular tokens in id order (ids start at 2).
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Number of regular tokens, excluding PAD and UNK.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Total id range including the two specials.
    pub fn id_count(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        match id {
            PAD => Some(PAD_TOKEN),
            UNK => Some(UNK_TOKEN),
            _ => self.tokens.get(id as usize - 2).map(String::as_str),
        }
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> TokenSequence {
        TokenSequence::new(tokens.iter().map(|t| self.id(t.as_ref())).collect())
    }
}
