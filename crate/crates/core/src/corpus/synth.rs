//! Synthetic review corpus with a known rating mechanism.
//!
//! Every user has a latent mood and every item a latent quality, each one
//! of -1, 0 or +1. A review's rating is `clamp(3 + mood + quality, 1, 5)`
//! and its text carries a phrase for the mood, a phrase for the quality,
//! the rating as a word, and random filler words.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ReviewRecord;
use crate::rng;

const MOOD: [&[&str]; 3] = [
    &["grumpy reviewer here", "honestly annoyed", "hard to please"],
    &["neutral take", "calm opinion", "measured view"],
    &["cheerful as always", "happy visitor", "delighted again"],
];

const QUALITY: [&[&str]; 3] = [
    &["the food was awful", "service was terrible", "dirty tables"],
    &["the food was decent", "service was okay", "average place"],
    &["the food was superb", "service was excellent", "spotless tables"],
];

const RATING: [&str; 5] = ["one", "two", "three", "four", "five"];

const FILLER: [&str; 24] = [
    "we", "went", "there", "on", "a", "tuesday", "with", "friends", "parking", "was", "near", "menu", "had", "many",
    "options", "music", "played", "loud", "ordered", "coffee", "and", "dessert", "later", "again",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub users: usize,
    pub items: usize,
    pub reviews: usize,
    /// filler words per review
    pub filler: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 500,
            items: 200,
            reviews: 5000,
            filler: 6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<ReviewRecord>,
    /// latent mood per user, indexed like `user_id(i)`
    pub moods: Vec<i8>,
    pub qualities: Vec<i8>,
}

pub fn user_id(i: usize) -> String {
    format!("u{i:04}")
}

pub fn item_id(i: usize) -> String {
    format!("i{i:04}")
}

/// Rating of a review by a user of `mood` on an item of `quality`.
pub fn synth_rating(mood: i8, quality: i8) -> f64 {
    f64::from((3 + mood + quality).clamp(1, 5))
}

/// Generates the corpus. Each (user, item) pair appears at most once and
/// every user and item gets at least one review when `reviews` allows it.
/// Panics if `reviews` exceeds `users * items`.
pub fn generate(config: &SynthConfig) -> SynthCorpus {
    assert!(
        config.reviews <= config.users * config.items,
        "more reviews than distinct pairs"
    );
    let mut latent = rng::stream(config.seed, "synth-latent");
    let moods: Vec<i8> = (0..config.users).map(|_| latent.random_range(-1..=1)).collect();
    let qualities: Vec<i8> = (0..config.items).map(|_| latent.random_range(-1..=1)).collect();

    let mut r = rng::stream(config.seed, "synth-pairs");
    let mut seen = BTreeSet::new();
    let mut pairs = Vec::with_capacity(config.reviews);
    while pairs.len() < config.reviews {
        let k = pairs.len();
        let u = if k < config.users {
            k
        } else {
            r.random_range(0..config.users)
        };
        let i = if k < config.items {
            k
        } else {
            r.random_range(0..config.items)
        };
        if seen.insert((u, i)) {
            pairs.push((u, i));
        }
    }

    let mut t = rng::stream(config.seed, "synth-text");
    let records = pairs
        .into_iter()
        .map(|(u, i)| {
            let (mood, quality) = (moods[u], qualities[i]);
            let rating = synth_rating(mood, quality);
            let mut words: Vec<&str> = Vec::new();
            let filler = |t: &mut rng::Rng, words: &mut Vec<&str>, n: usize| {
                for _ in 0..n {
                    words.push(FILLER.choose(t).expect("non-empty"));
                }
            };
            let half = config.filler / 2;
            filler(&mut t, &mut words, half);
            words.push(MOOD[(mood + 1) as usize].choose(&mut t).expect("non-empty"));
            words.push(QUALITY[(quality + 1) as usize].choose(&mut t).expect("non-empty"));
            filler(&mut t, &mut words, config.filler - half);
            words.push(RATING[rating as usize - 1]);
            words.push("stars");
            ReviewRecord::new(user_id(u), item_id(i), rating, words.join(" "))
        })
        .collect();
    SynthCorpus {
        records,
        moods,
        qualities,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes() {
        let c = generate(&SynthConfig::default());
        assert_eq!(c.records.len(), 5000);
        let users: BTreeSet<&str> = c.records.iter().map(|r| r.user_id.as_str()).collect();
        let items: BTreeSet<&str> = c.records.iter().map(|r| r.item_id.as_str()).collect();
        assert_eq!((users.len(), items.len()), (500, 200));
        let pairs: BTreeSet<(&str, &str)> = c
            .records
            .iter()
            .map(|r| (r.user_id.as_str(), r.item_id.as_str()))
            .collect();
        assert_eq!(pairs.len(), 5000);
    }

    #[test]
    fn ratings_follow_the_latent_sum() {
        let c = generate(&SynthConfig {
            reviews: 300,
            ..SynthConfig::default()
        });
        for r in &c.records {
            let u: usize = r.user_id[1..].parse().unwrap();
            let i: usize = r.item_id[1..].parse().unwrap();
            assert_eq!(r.rating, synth_rating(c.moods[u], c.qualities[i]));
            assert!(r.text.ends_with(&format!("{} stars", RATING[r.rating as usize - 1])));
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let cfg = SynthConfig {
            reviews: 400,
            seed: 9,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg), generate(&cfg));
        assert_ne!(
            generate(&cfg).records,
            generate(&SynthConfig { seed: 10, ..cfg }).records
        );
    }

    #[test]
    fn clamps_to_the_rating_scale() {
        assert_eq!(synth_rating(-1, -1), 1.0);
        assert_eq!(synth_rating(1, 1), 5.0);
        assert_eq!(synth_rating(0, 1), 4.0);
    }
}
