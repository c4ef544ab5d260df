use alloc::vec::Vec;

use rand::Rng;

use super::{CnnText, IdIndex, ModelDims, Regime, Transform};
use crate::corpus::TokenSequence;
use crate::embeddings::EmbeddingTable;
use crate::fm::{FMParams, FmLayer};
use crate::nn::{init, DropoutMask, NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::rng::{self, fnv1a};
use crate::Result;

fn locate_fm(store: &ParamStore, prefix: &str) -> Result<FmLayer> {
    Ok(FmLayer {
        w0: super::find(store, &alloc::format!("{prefix}.w0"))?,
        w: super::find(store, &alloc::format!("{prefix}.w"))?,
        v: super::find(store, &alloc::format!("{prefix}.v"))?,
    })
}

fn dropped(tape: &mut Tape<'_>, x: NodeId, regime: &mut Regime<'_>) -> Result<(NodeId, DropoutMask)> {
    let mask = regime.mask(tape.value(x).len())?;
    Ok((tape.dropout(x, &mask)?, mask))
}

/// Two text processors side by side feeding an FM over `[x_A, y_B]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepConn {
    pub user: CnnText,
    pub item: CnnText,
    pub fm: FmLayer,
}

impl DeepConn {
    pub fn register<R: Rng + ?Sized>(store: &mut ParamStore, dims: &ModelDims, rng: &mut R) -> Self {
        let user = CnnText::register(store, "gamma_a", dims, rng);
        let item = CnnText::register(store, "gamma_b", dims, rng);
        let fm = FmLayer::register(store, "fm", FMParams::init(2 * dims.latent, dims.fm_rank, rng));
        Self { user, item, fm }
    }

    pub fn locate(store: &ParamStore, dims: &ModelDims) -> Result<Self> {
        Ok(Self {
            user: CnnText::locate(store, "gamma_a", dims.cnn_activation)?,
            item: CnnText::locate(store, "gamma_b", dims.cnn_activation)?,
            fm: locate_fm(store, "fm")?,
        })
    }

    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids = self.user.ids();
        ids.extend(self.item.ids());
        ids.extend(self.fm.ids());
        ids
    }

    /// `FM([delta(Gamma_A(text_A)), delta(Gamma_B(text_B))])`.
    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        table: &EmbeddingTable,
        text_a: &TokenSequence,
        text_b: &TokenSequence,
        regime: &mut Regime<'_>,
    ) -> Result<NodeId> {
        let x = self.user.encode(tape, table, text_a)?;
        let y = self.item.encode(tape, table, text_b)?;
        let (xd, _) = dropped(tape, x, regime)?;
        let (yd, _) = dropped(tape, y, regime)?;
        let z = tape.concat(&[xd, yd])?;
        self.fm.forward(tape, z)
    }
}

/// Target network: `Gamma_T` and `FM_T` over the joint review.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetNet {
    pub cnn: CnnText,
    pub fm: FmLayer,
}

#[derive(Debug, Clone, Copy)]
pub struct TargetOut {
    /// `x_T = Gamma_T(rev_AB)`
    pub x_t: NodeId,
    /// `FM_T(delta(x_T))`
    pub r_hat: NodeId,
}

impl TargetNet {
    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids = self.cnn.ids();
        ids.extend(self.fm.ids());
        ids
    }

    pub fn encode(&self, tape: &mut Tape<'_>, table: &EmbeddingTable, review: &TokenSequence) -> Result<NodeId> {
        self.cnn.encode(tape, table, review)
    }

    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        table: &EmbeddingTable,
        review: &TokenSequence,
        regime: &mut Regime<'_>,
    ) -> Result<TargetOut> {
        let x_t = self.cnn.encode(tape, table, review)?;
        let (xd, _) = dropped(tape, x_t, regime)?;
        let r_hat = self.fm.forward(tape, xd)?;
        Ok(TargetOut { x_t, r_hat })
    }
}

/// Source network body: `Gamma_A`, `Gamma_B` and TRANSFORM.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceNet {
    pub user: CnnText,
    pub item: CnnText,
    pub transform: Transform,
}

#[derive(Debug, Clone)]
pub struct SourceOut {
    pub z0: NodeId,
    pub z_l: NodeId,
    /// `delta(z_L)`
    pub z_bar: NodeId,
    pub mask: DropoutMask,
}

impl SourceNet {
    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids = self.user.ids();
        ids.extend(self.item.ids());
        ids.extend(self.transform.ids());
        ids
    }

    pub fn forward(
        &self,
        tape: &mut Tape<'_>,
        table: &EmbeddingTable,
        text_a: &TokenSequence,
        text_b: &TokenSequence,
        regime: &mut Regime<'_>,
    ) -> Result<SourceOut> {
        let x_a = self.user.encode(tape, table, text_a)?;
        let x_b = self.item.encode(tape, table, text_b)?;
        let z0 = tape.concat(&[x_a, x_b])?;
        let z_l = self.transform.forward(tape, z0)?;
        let (z_bar, mask) = dropped(tape, z_l, regime)?;
        Ok(SourceOut { z0, z_l, z_bar, mask })
    }
}

fn register_source<R: Rng + ?Sized>(store: &mut ParamStore, dims: &ModelDims, rng: &mut R) -> Result<SourceNet> {
    Ok(SourceNet {
        user: CnnText::register(store, "gamma_a", dims, rng),
        item: CnnText::register(store, "gamma_b", dims, rng),
        transform: Transform::register(store, "transform", dims, rng)?,
    })
}

fn register_target<R: Rng + ?Sized>(store: &mut ParamStore, dims: &ModelDims, rng: &mut R) -> TargetNet {
    let cnn = CnnText::register(store, "gamma_t", dims, rng);
    let fm = FmLayer::register(store, "fm_t", FMParams::init(dims.latent, dims.fm_rank, rng));
    TargetNet { cnn, fm }
}

fn locate_source(store: &ParamStore, dims: &ModelDims) -> Result<SourceNet> {
    Ok(SourceNet {
        user: CnnText::locate(store, "gamma_a", dims.cnn_activation)?,
        item: CnnText::locate(store, "gamma_b", dims.cnn_activation)?,
        transform: Transform::locate(store, "transform", dims.layers, dims.transform_activation)?,
    })
}

fn locate_target(store: &ParamStore, dims: &ModelDims) -> Result<TargetNet> {
    Ok(TargetNet {
        cnn: CnnText::locate(store, "gamma_t", dims.cnn_activation)?,
        fm: locate_fm(store, "fm_t")?,
    })
}

/// Source network with `FM_S`, plus the target network used in training.
#[derive(Debug, Clone, PartialEq)]
pub struct TransNet {
    pub source: SourceNet,
    pub fm_s: FmLayer,
    pub target: TargetNet,
}

impl TransNet {
    pub fn register<R: Rng + ?Sized>(store: &mut ParamStore, dims: &ModelDims, rng: &mut R) -> Result<Self> {
        let source = register_source(store, dims, rng)?;
        let fm_s = FmLayer::register(store, "fm_s", FMParams::init(dims.latent, dims.fm_rank, rng));
        let target = register_target(store, dims, rng);
        Ok(Self { source, fm_s, target })
    }

    pub fn locate(store: &ParamStore, dims: &ModelDims) -> Result<Self> {
        Ok(Self {
            source: locate_source(store, dims)?,
            fm_s: locate_fm(store, "fm_s")?,
            target: locate_target(store, dims)?,
        })
    }
}

/// TransNet whose regression head also sees learned user and item
/// embeddings: `FM_SE([delta(omega_A), delta(omega_B), z_bar_L])`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransNetExt {
    pub source: SourceNet,
    pub target: TargetNet,
    pub omega_users: ParamId,
    pub omega_items: ParamId,
    pub fm_se: FmLayer,
    pub users: IdIndex,
    pub items: IdIndex,
    pub unseen_seed: u64,
}

const USER_TAG: u64 = 0x75;
const ITEM_TAG: u64 = 0x69;

impl TransNetExt {
    /// Omega tables start uniform in (-1, 1).
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        dims: &ModelDims,
        users: IdIndex,
        items: IdIndex,
        unseen_seed: u64,
        rng: &mut R,
    ) -> Result<Self> {
        let source = register_source(store, dims, rng)?;
        let target = register_target(store, dims, rng);
        let n = dims.latent;
        let omega_users = store.add("omega_a", init::uniform(rng, &[users.len(), n], -1.0, 1.0));
        let omega_items = store.add("omega_b", init::uniform(rng, &[items.len(), n], -1.0, 1.0));
        let fm_se = FmLayer::register(store, "fm_se", FMParams::init(3 * n, dims.fm_rank, rng));
        Ok(Self {
            source,
            target,
            omega_users,
            omega_items,
            fm_se,
            users,
            items,
            unseen_seed,
        })
    }

    pub fn locate(
        store: &ParamStore,
        dims: &ModelDims,
        users: IdIndex,
        items: IdIndex,
        unseen_seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            source: locate_source(store, dims)?,
            target: locate_target(store, dims)?,
            omega_users: super::find(store, "omega_a")?,
            omega_items: super::find(store, "omega_b")?,
            fm_se: locate_fm(store, "fm_se")?,
            users,
            items,
            unseen_seed,
        })
    }

    /// theta_S: `FM_SE` and both Omega tables.
    pub fn head_ids(&self) -> Vec<ParamId> {
        let mut ids = self.fm_se.ids().to_vec();
        ids.push(self.omega_users);
        ids.push(self.omega_items);
        ids
    }

    fn latent(&self, store: &ParamStore) -> usize {
        store.value(self.omega_users).shape()[1]
    }

    /// Random vector for an id absent from training, identical on every
    /// call for the same id.
    pub fn unseen_vector(&self, store: &ParamStore, user: bool, id: &str) -> Tensor {
        let tag = if user { USER_TAG } else { ITEM_TAG };
        let mut r = rng::stream_keyed(self.unseen_seed, &[tag, fnv1a(id.as_bytes())]);
        init::uniform(&mut r, &[self.latent(store)], -1.0, 1.0)
    }

    fn embed(&self, tape: &mut Tape<'_>, user: bool, id: &str) -> Result<NodeId> {
        let (table, index) = if user {
            (self.omega_users, &self.users)
        } else {
            (self.omega_items, &self.items)
        };
        match index.row(id) {
            Some(row) => {
                let t = tape.param(table);
                tape.gather(t, row)
            }
            None => {
                let v = self.unseen_vector(tape.store(), user, id);
                Ok(tape.constant(v))
            }
        }
    }

    /// `r_SE` from an already computed `z_bar_L`.
    pub fn head(
        &self,
        tape: &mut Tape<'_>,
        user_id: &str,
        item_id: &str,
        z_bar: NodeId,
        regime: &mut Regime<'_>,
    ) -> Result<NodeId> {
        let wa = self.embed(tape, true, user_id)?;
        let wb = self.embed(tape, false, item_id)?;
        let (wa, _) = dropped(tape, wa, regime)?;
        let (wb, _) = dropped(tape, wb, regime)?;
        let z = tape.concat(&[wa, wb, z_bar])?;
        self.fm_se.forward(tape, z)
    }
}
