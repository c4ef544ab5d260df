//! Rating-only matrix factorization baseline:
//! `r = mu + b_u + b_i + <p_u, q_i>`.

use alloc::vec::Vec;

use rand::Rng;

use super::IdIndex;
use crate::nn::{init, NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct MFParams {
    pub mean: f64,
    pub users: IdIndex,
    pub items: IdIndex,
    /// `U x 1`
    pub user_bias: Tensor,
    /// `I x 1`
    pub item_bias: Tensor,
    /// `U x n`
    pub user_factors: Tensor,
    /// `I x n`
    pub item_factors: Tensor,
}

/// Unseen users and items contribute a zero bias and a zero factor.
pub fn mf_predict(user_id: &str, item_id: &str, params: &MFParams) -> f64 {
    let u = params.users.row(user_id);
    let i = params.items.row(item_id);
    let mut r = params.mean;
    if let Some(u) = u {
        r += params.user_bias.row(u)[0];
    }
    if let Some(i) = i {
        r += params.item_bias.row(i)[0];
    }
    if let (Some(u), Some(i)) = (u, i) {
        r += params
            .user_factors
            .row(u)
            .iter()
            .zip(params.item_factors.row(i))
            .map(|(a, b)| a * b)
            .sum::<f64>();
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mf {
    pub mean: ParamId,
    pub user_bias: ParamId,
    pub item_bias: ParamId,
    pub user_factors: ParamId,
    pub item_factors: ParamId,
    pub users: IdIndex,
    pub items: IdIndex,
}

impl Mf {
    /// `mu` starts at the training mean, biases at zero and factors from
    /// truncated normal(0, 0.1).
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        latent: usize,
        mean: f64,
        users: IdIndex,
        items: IdIndex,
        rng: &mut R,
    ) -> Self {
        let (nu, ni) = (users.len(), items.len());
        Self {
            mean: store.add("mf.mean", Tensor::scalar(mean)),
            user_bias: store.add("mf.user_bias", Tensor::zeros(&[nu, 1])),
            item_bias: store.add("mf.item_bias", Tensor::zeros(&[ni, 1])),
            user_factors: store.add("mf.user_factors", init::truncated_normal(rng, &[nu, latent], 0.0, 0.1)),
            item_factors: store.add("mf.item_factors", init::truncated_normal(rng, &[ni, latent], 0.0, 0.1)),
            users,
            items,
        }
    }

    pub fn locate(store: &ParamStore, users: IdIndex, items: IdIndex) -> Result<Self> {
        Ok(Self {
            mean: super::find(store, "mf.mean")?,
            user_bias: super::find(store, "mf.user_bias")?,
            item_bias: super::find(store, "mf.item_bias")?,
            user_factors: super::find(store, "mf.user_factors")?,
            item_factors: super::find(store, "mf.item_factors")?,
            users,
            items,
        })
    }

    pub fn ids(&self) -> Vec<ParamId> {
        alloc::vec![
            self.mean,
            self.user_bias,
            self.item_bias,
            self.user_factors,
            self.item_factors
        ]
    }

    pub fn forward(&self, tape: &mut Tape<'_>, user_id: &str, item_id: &str) -> Result<NodeId> {
        let mut terms = alloc::vec![tape.param(self.mean)];
        let u = self.users.row(user_id);
        let i = self.items.row(item_id);
        if let Some(u) = u {
            let t = tape.param(self.user_bias);
            terms.push(tape.gather(t, u)?);
        }
        if let Some(i) = i {
            let t = tape.param(self.item_bias);
            terms.push(tape.gather(t, i)?);
        }
        if let (Some(u), Some(i)) = (u, i) {
            let (pt, qt) = (tape.param(self.user_factors), tape.param(self.item_factors));
            let p = tape.gather(pt, u)?;
            let q = tape.gather(qt, i)?;
            terms.push(tape.dot(p, q)?);
        }
        tape.sum(&terms)
    }

    pub fn params(&self, store: &ParamStore) -> MFParams {
        MFParams {
            mean: store.value(self.mean).item(),
            users: self.users.clone(),
            items: self.items.clone(),
            user_bias: store.value(self.user_bias).clone(),
            item_bias: store.value(self.item_bias).clone(),
            user_factors: store.value(self.user_factors).clone(),
            item_factors: store.value(self.item_factors).clone(),
        }
    }
}
