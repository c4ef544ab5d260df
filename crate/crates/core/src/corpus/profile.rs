use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{tokenize, ReviewRecord, TokenSequence, Vocabulary, PAD};

/// Shuffles the reviews in `parts`, concatenates them, keeps the first
/// `len` tokens and right-pads with PAD to exactly `len`.
pub fn assemble_profile<R: Rng + ?Sized>(parts: &mut [&[u32]], len: usize, rng: &mut R) -> TokenSequence {
    parts.shuffle(rng);
    let mut ids = Vec::with_capacity(len);
    for part in parts.iter() {
        let room = len - ids.len();
        if room == 0 {
            break;
        }
        ids.extend_from_slice(&part[..part.len().min(room)]);
    }
    ids.resize(len, PAD);
    TokenSequence::new(ids)
}

/// Profile text for a user or an item: every review in `reviews` except
/// the joint review named by `exclude`, in random order, truncated and
/// padded to `len` tokens.
pub fn build_profile_text<R: Rng + ?Sized>(
    reviews: &[ReviewRecord],
    exclude: Option<(&str, &str)>,
    len: usize,
    vocab: &Vocabulary,
    rng: &mut R,
) -> TokenSequence {
    let encoded: Vec<TokenSequence> = reviews
        .iter()
        .filter(|r| !exclude.is_some_and(|pair| r.is_pair(pair)))
        .map(|r| vocab.encode(&tokenize(&r.text)))
        .collect();
    let mut parts: Vec<&[u32]> = encoded.iter().map(TokenSequence::ids).collect();
    assemble_profile(&mut parts, len, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::format;
    use alloc::string::String;
    use alloc::vec;
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        let toks = ["a", "b", "c", "d", "e", "f", "g", "h", "i", "x", "y", "z"];
        Vocabulary::from_tokens(toks.iter().map(|t| String::from(*t)).collect()).unwrap()
    }

    #[test]
    fn excludes_joint_review() {
        let v = vocab();
        let reviews = vec![
            ReviewRecord::new("u", "i1", 4.0, "a b"),
            ReviewRecord::new("u", "i2", 2.0, "x y z"),
            ReviewRecord::new("u", "i3", 5.0, "c"),
        ];
        let mut r = rng::stream(1, "profile");
        let seq = build_profile_text(&reviews, Some(("u", "i2")), 6, &v, &mut r);
        assert_eq!(seq.len(), 6);
        let ab = v.encode(&["a", "b"]).into_inner();
        let c = v.encode(&["c"]).into_inner();
        let mut first = ab.clone();
        first.extend(&c);
        let mut second = c.clone();
        second.extend(&ab);
        let body = &seq.ids()[..3];
        assert!(body == first.as_slice() || body == second.as_slice());
        assert_eq!(&seq.ids()[3..], &[PAD; 3]);
        for id in v.encode(&["x", "y", "z"]).ids() {
            assert!(!seq.contains(*id));
        }
    }

    #[test]
    fn excluded_singleton_is_all_pad() {
        let reviews = vec![ReviewRecord::new("u", "i", 4.0, "a b c")];
        let mut r = rng::stream(2, "profile");
        let seq = build_profile_text(&reviews, Some(("u", "i")), 4, &vocab(), &mut r);
        assert_eq!(seq, TokenSequence::padding(4));
    }

    #[test]
    fn truncates_long_review() {
        let v = vocab();
        let reviews = vec![ReviewRecord::new("u", "i", 4.0, "a b c d e f g h i")];
        let mut r = rng::stream(3, "profile");
        let seq = build_profile_text(&reviews, None, 5, &v, &mut r);
        assert_eq!(seq, v.encode(&["a", "b", "c", "d", "e"]));
    }

    proptest! {
        #[test]
        fn exact_length_and_no_sentinel(lens in proptest::collection::vec(0usize..12, 0..8),
                                        excluded in 0usize..8, t in 1usize..40, seed in any::<u64>()) {
            let mut tokens = Vec::new();
            for i in 0..lens.len() + 1 {
                tokens.push(format!("w{i}"));
            }
            tokens.push(String::from("sentinel"));
            let v = Vocabulary::from_tokens(tokens).unwrap();
            let mut reviews: Vec<ReviewRecord> = lens.iter().enumerate()
                .map(|(i, &l)| ReviewRecord::new("u", format!("i{i}"), 3.0, vec![format!("w{i}"); l.max(1)].join(" ")))
                .collect();
            let ex = excluded.min(reviews.len());
            reviews.insert(ex, ReviewRecord::new("u", "joint", 1.0, "sentinel sentinel"));
            let mut r = rng::Rng::seed_from_u64(seed);
            let seq = build_profile_text(&reviews, Some(("u", "joint")), t, &v, &mut r);
            prop_assert_eq!(seq.len(), t);
            prop_assert!(!seq.contains(v.id("sentinel")));
        }
    }

    use rand::SeedableRng;
}
