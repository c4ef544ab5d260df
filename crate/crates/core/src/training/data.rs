//! Training examples and profile texts built from the training split only.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{assemble_profile, tokenize, ReviewRecord, TokenSequence, Vocabulary, PAD};
use crate::models::PairInput;
use rand::SeedableRng;

use crate::rng::{self, fnv1a};

use super::ProfileShuffle;

/// (text_A, text_B, rev_AB, r_AB) plus the ids of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub user_id: String,
    pub item_id: String,
    pub text_a: TokenSequence,
    pub text_b: TokenSequence,
    /// The joint review; `None` for held-out examples, whose reviews are
    /// never read.
    pub review: Option<TokenSequence>,
    pub rating: f64,
}

impl TrainExample {
    pub fn input(&self) -> PairInput<'_> {
        PairInput {
            user_id: &self.user_id,
            item_id: &self.item_id,
            text_a: &self.text_a,
            text_b: &self.text_b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Partition {
    Train,
    Validation,
    Test,
}

impl Partition {
    fn tag(self) -> u64 {
        match self {
            Partition::Train => 1,
            Partition::Validation => 2,
            Partition::Test => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedReview {
    pub user_id: String,
    pub item_id: String,
    pub rating: f64,
    pub tokens: Vec<u32>,
    /// row of the review in the source record list
    pub source_id: usize,
}

/// Encoded training reviews indexed by user and by item.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileIndex {
    reviews: Vec<EncodedReview>,
    by_user: BTreeMap<String, Vec<usize>>,
    by_item: BTreeMap<String, Vec<usize>>,
}

impl ProfileIndex {
    /// `source_ids[i]` is the source row of `train[i]`; pass an empty
    /// slice to number reviews by position.
    pub fn new(train: &[ReviewRecord], source_ids: &[usize], vocab: &Vocabulary) -> Self {
        let mut by_user: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut by_item: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let reviews = train
            .iter()
            .enumerate()
            .map(|(i, r)| {
                by_user.entry(r.user_id.clone()).or_default().push(i);
                by_item.entry(r.item_id.clone()).or_default().push(i);
                EncodedReview {
                    user_id: r.user_id.clone(),
                    item_id: r.item_id.clone(),
                    rating: r.rating,
                    tokens: vocab.encode(&tokenize(&r.text)).into_inner(),
                    source_id: source_ids.get(i).copied().unwrap_or(i),
                }
            })
            .collect();
        Self {
            reviews,
            by_user,
            by_item,
        }
    }

    pub fn reviews(&self) -> &[EncodedReview] {
        &self.reviews
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    /// Training reviews of `item_id`, as positions into [`Self::reviews`].
    pub fn item_reviews(&self, item_id: &str) -> &[usize] {
        self.by_item.get(item_id).map_or(&[], Vec::as_slice)
    }

    pub fn user_reviews(&self, user_id: &str) -> &[usize] {
        self.by_user.get(user_id).map_or(&[], Vec::as_slice)
    }

    fn profile(
        &self,
        members: &[usize],
        exclude: Option<(&str, &str)>,
        extra: Option<&[u32]>,
        len: usize,
        seed: u64,
    ) -> TokenSequence {
        let mut parts: Vec<&[u32]> = members
            .iter()
            .map(|&i| &self.reviews[i])
            .filter(|r| !exclude.is_some_and(|(u, it)| r.user_id == u && r.item_id == it))
            .map(|r| r.tokens.as_slice())
            .collect();
        if let Some(extra) = extra {
            parts.push(extra);
        }
        let mut r = rng::Rng::seed_from_u64(seed);
        assemble_profile(&mut parts, len, &mut r)
    }
}

/// Truncates or PAD-extends `tokens` to `len`.
pub fn fit_length(tokens: &[u32], len: usize) -> TokenSequence {
    let mut ids: Vec<u32> = tokens.iter().take(len).copied().collect();
    ids.resize(len, PAD);
    TokenSequence::new(ids)
}

/// How profile texts are assembled for one training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRules {
    pub seq_len: usize,
    /// Drop the joint review from training profiles.
    pub exclude_joint: bool,
    /// Add the held-out joint review to evaluation profiles (diagnostic).
    pub include_heldout_review: bool,
    pub shuffle: ProfileShuffle,
    pub seed: u64,
}

/// Builds training and held-out examples over a [`ProfileIndex`].
#[derive(Debug, Clone, Copy)]
pub struct ExampleBuilder<'a> {
    pub index: &'a ProfileIndex,
    pub vocab: &'a Vocabulary,
    pub rules: ProfileRules,
}

const USER_SIDE: u64 = 0xa;
const ITEM_SIDE: u64 = 0xb;

impl<'a> ExampleBuilder<'a> {
    pub fn new(index: &'a ProfileIndex, vocab: &'a Vocabulary, rules: ProfileRules) -> Self {
        Self { index, vocab, rules }
    }

    fn seed(&self, partition: Partition, i: usize, epoch: usize, side: u64) -> u64 {
        let epoch_key = match self.rules.shuffle {
            ProfileShuffle::OncePerBuild => 0,
            ProfileShuffle::PerEpoch => epoch as u64 + 1,
        };
        rng::derive(
            self.rules.seed,
            &[fnv1a(b"profile"), partition.tag(), i as u64, epoch_key, side],
        )
    }

    /// Training example `i` (position in the training split).
    pub fn train_example(&self, i: usize, epoch: usize) -> TrainExample {
        let r = &self.index.reviews[i];
        let exclude = self
            .rules
            .exclude_joint
            .then_some((r.user_id.as_str(), r.item_id.as_str()));
        let len = self.rules.seq_len;
        TrainExample {
            user_id: r.user_id.clone(),
            item_id: r.item_id.clone(),
            text_a: self.index.profile(
                self.index.user_reviews(&r.user_id),
                exclude,
                None,
                len,
                self.seed(Partition::Train, i, epoch, USER_SIDE),
            ),
            text_b: self.index.profile(
                self.index.item_reviews(&r.item_id),
                exclude,
                None,
                len,
                self.seed(Partition::Train, i, epoch, ITEM_SIDE),
            ),
            review: Some(fit_length(&r.tokens, len)),
            rating: r.rating,
        }
    }

    /// Example for a validation or test record. Profiles come from the
    /// training reviews only, unless the held-out-review diagnostic is on.
    pub fn heldout_example(&self, partition: Partition, i: usize, record: &ReviewRecord) -> TrainExample {
        let len = self.rules.seq_len;
        let own = self
            .rules
            .include_heldout_review
            .then(|| self.vocab.encode(&tokenize(&record.text)).into_inner());
        TrainExample {
            user_id: record.user_id.clone(),
            item_id: record.item_id.clone(),
            text_a: self.index.profile(
                self.index.user_reviews(&record.user_id),
                None,
                own.as_deref(),
                len,
                self.seed(partition, i, 0, USER_SIDE),
            ),
            text_b: self.index.profile(
                self.index.item_reviews(&record.item_id),
                None,
                own.as_deref(),
                len,
                self.seed(partition, i, 0, ITEM_SIDE),
            ),
            review: None,
            rating: record.rating,
        }
    }

    /// Profiles for an arbitrary (user, item) query, joint review excluded.
    pub fn query(&self, user_id: &str, item_id: &str) -> (TokenSequence, TokenSequence) {
        let len = self.rules.seq_len;
        let key = fnv1a(user_id.as_bytes()) ^ fnv1a(item_id.as_bytes()).rotate_left(17);
        let seed = rng::derive(self.rules.seed, &[fnv1a(b"query"), key]);
        let exclude = Some((user_id, item_id));
        (
            self.index.profile(
                self.index.user_reviews(user_id),
                exclude,
                None,
                len,
                rng::derive(seed, &[USER_SIDE]),
            ),
            self.index.profile(
                self.index.item_reviews(item_id),
                exclude,
                None,
                len,
                rng::derive(seed, &[ITEM_SIDE]),
            ),
        )
    }
}
