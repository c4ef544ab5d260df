//! Rating error and most-similar-review retrieval.

use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::TokenSequence;
use crate::embeddings::EmbeddingTable;
use crate::models::{Architecture, Model, Regime};
use crate::nn::{euclidean_distance, Tape, Tensor};
use crate::training::steps::TransNetView;
use crate::training::{fit_length, ProfileIndex, TrainExample};
use crate::{Error, Result};

/// Mean squared error over `n` examples.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub mse: f64,
    /// `r - r_hat` per example, in input order
    pub residuals: Vec<f64>,
}

impl EvalReport {
    /// Report over (rating, prediction) pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let residuals: Vec<f64> = pairs.iter().map(|(r, p)| r - p).collect();
        Ok(Self {
            n: pairs.len(),
            mse: mse(pairs)?,
            residuals,
        })
    }
}

/// `(1/N) sum (r_i - r_hat_i)^2`.
pub fn mse(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("mse input"));
    }
    Ok(pairs.iter().map(|(r, p)| (r - p) * (r - p)).sum::<f64>() / pairs.len() as f64)
}

/// Eval-mode MSE of `model` on `examples`.
pub fn evaluate(model: &Model, table: &EmbeddingTable, examples: &[TrainExample]) -> Result<EvalReport> {
    let pairs = examples
        .iter()
        .map(|ex| Ok((ex.rating, model.predict(table, &ex.input())?)))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_pairs(&pairs)
}

/// Eval-mode MSE of the target network `FM_T(Gamma_T(rev_AB))` on
/// examples that carry their joint review.
pub fn target_mse(model: &Model, table: &EmbeddingTable, examples: &[TrainExample]) -> Result<EvalReport> {
    let view = TransNetView::of(&model.arch)?;
    let pairs = examples
        .iter()
        .map(|ex| {
            let review = ex.review.as_ref().ok_or(Error::Empty("joint review"))?;
            let mut tape = Tape::new(&model.store);
            let out = view.target().forward(&mut tape, table, review, &mut Regime::Eval)?;
            Ok((ex.rating, tape.scalar(out.r_hat)))
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_pairs(&pairs)
}

/// Candidate reviews for a retrieval query, ranked by distance.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub user_id: String,
    pub item_id: String,
    /// (review id, distance), distances non-decreasing, ties by review id
    pub ranked: Vec<(usize, f64)>,
}

impl RetrievalResult {
    pub fn top(&self) -> Option<(usize, f64)> {
        self.ranked.first().copied()
    }
}

/// Orders candidates by distance to `query`, breaking ties by review id.
pub fn rank_by_distance(query: &Tensor, candidates: &[(usize, Tensor)]) -> Result<Vec<(usize, f64)>> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate set"));
    }
    let mut ranked = candidates
        .iter()
        .map(|(id, x)| Ok((*id, euclidean_distance(query.data(), x.data())?)))
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Eval-mode `z_L` of the source network for the given profiles.
pub fn source_representation(
    model: &Model,
    table: &EmbeddingTable,
    text_a: &TokenSequence,
    text_b: &TokenSequence,
) -> Result<Tensor> {
    let view = TransNetView::of(&model.arch)?;
    let mut tape = Tape::new(&model.store);
    let out = view
        .source()
        .forward(&mut tape, table, text_a, text_b, &mut Regime::Eval)?;
    Ok(tape.value(out.z_l).clone())
}

/// Eval-mode `x = Gamma_T(review)`.
pub fn target_representation(model: &Model, table: &EmbeddingTable, review: &TokenSequence) -> Result<Tensor> {
    let view = TransNetView::of(&model.arch)?;
    let mut tape = Tape::new(&model.store);
    let x = view.target().encode(&mut tape, table, review)?;
    Ok(tape.value(x).clone())
}

/// Ranks `candidates` (review id, tokens) by the distance between their
/// target encodings and the source representation of the query profiles.
pub fn most_similar_review(
    model: &Model,
    table: &EmbeddingTable,
    user_id: &str,
    item_id: &str,
    profiles: (&TokenSequence, &TokenSequence),
    candidates: &[(usize, TokenSequence)],
) -> Result<RetrievalResult> {
    if !matches!(model.arch, Architecture::TransNet(_) | Architecture::TransNetExt(_)) {
        return Err(Error::WrongModel("transnet or transnet-ext"));
    }
    if candidates.is_empty() {
        return Err(Error::Empty("candidate set"));
    }
    let z = source_representation(model, table, profiles.0, profiles.1)?;
    let encoded = candidates
        .iter()
        .map(|(id, tokens)| Ok((*id, target_representation(model, table, tokens)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RetrievalResult {
        user_id: user_id.into(),
        item_id: item_id.into(),
        ranked: rank_by_distance(&z, &encoded)?,
    })
}

/// Training reviews of `item_id` written by users other than `user_id`,
/// as (source review id, tokens fitted to `len`).
pub fn retrieval_candidates(
    index: &ProfileIndex,
    user_id: &str,
    item_id: &str,
    len: usize,
) -> Vec<(usize, TokenSequence)> {
    index
        .item_reviews(item_id)
        .iter()
        .map(|&i| &index.reviews()[i])
        .filter(|r| r.user_id != user_id)
        .map(|r| (r.source_id, fit_length(&r.tokens, len)))
        .collect()
}
