//! One optimizer update per batch for each model family.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{TrainConfig, TrainExample, TransLoss};
use crate::corpus::TokenSequence;
use crate::embeddings::EmbeddingTable;
use crate::fm::FmLayer;
use crate::models::{Architecture, Model, Regime, SourceNet, TargetNet, TransNetExt};
use crate::nn::{AdamConfig, AdamState, DropoutMask, Gradients, NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::rng::Rng;
use crate::{Error, Result};

/// One Adam state per parameter group of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    pub groups: Vec<(String, AdamState)>,
}

impl Optimizers {
    pub fn new(model: &Model, config: AdamConfig) -> Self {
        let groups = model
            .param_groups()
            .into_iter()
            .map(|(name, ids)| (name.to_string(), AdamState::new(&model.store, ids, config)))
            .collect();
        Self { groups }
    }

    pub fn get(&self, name: &str) -> Option<&AdamState> {
        self.groups.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    fn get_mut(&mut self, name: &str) -> Result<&mut AdamState> {
        self.groups
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Config(alloc::format!("no optimizer group {name}")))
    }
}

/// Adds the gradients of the group's parameters into the store and takes
/// one Adam step on that group. Entries for other parameters are ignored.
pub fn apply_group(store: &mut ParamStore, state: &mut AdamState, grads: &Gradients, lr: f64) {
    for id in &state.params {
        if let Some(g) = grads.get(*id) {
            store.get_mut(*id).grad.add_assign(g);
        }
    }
    state.step(store, lr);
}

/// Mean losses of one batch. `loss_t` and `loss_trans` exist only for
/// TransNet models.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchLosses {
    pub loss_t: Option<f64>,
    pub loss_trans: Option<f64>,
    pub loss_s: f64,
}

fn review(example: &TrainExample) -> Result<&TokenSequence> {
    example
        .review
        .as_ref()
        .ok_or(Error::Empty("joint review of a training example"))
}

fn check_batch(batch: &[TrainExample]) -> Result<()> {
    if batch.is_empty() {
        Err(Error::Empty("batch"))
    } else {
        Ok(())
    }
}

/// Borrowed view of the parts of a TransNet or TransNet-Ext model.
#[derive(Clone, Copy)]
pub enum TransNetView<'m> {
    Plain {
        source: &'m SourceNet,
        fm_s: &'m FmLayer,
        target: &'m TargetNet,
    },
    Ext(&'m TransNetExt),
}

impl<'m> TransNetView<'m> {
    pub fn of(arch: &'m Architecture) -> Result<Self> {
        match arch {
            Architecture::TransNet(t) => Ok(Self::Plain {
                source: &t.source,
                fm_s: &t.fm_s,
                target: &t.target,
            }),
            Architecture::TransNetExt(e) => Ok(Self::Ext(e)),
            _ => Err(Error::WrongModel("transnet or transnet-ext")),
        }
    }

    pub fn source(self) -> &'m SourceNet {
        match self {
            Self::Plain { source, .. } => source,
            Self::Ext(e) => &e.source,
        }
    }

    pub fn target(self) -> &'m TargetNet {
        match self {
            Self::Plain { target, .. } => target,
            Self::Ext(e) => &e.target,
        }
    }

    /// `r_hat_S` (or `r_SE`) from `z_bar_L`.
    pub fn head(
        self,
        tape: &mut Tape<'_>,
        example: &TrainExample,
        z_bar: NodeId,
        regime: &mut Regime<'_>,
    ) -> Result<NodeId> {
        match self {
            Self::Plain { fm_s, .. } => fm_s.forward(tape, z_bar),
            Self::Ext(e) => e.head(tape, &example.user_id, &example.item_id, z_bar, regime),
        }
    }
}

/// Result of sub-step 1.
#[derive(Debug, Clone)]
pub struct TargetStep {
    pub loss: f64,
    /// `x_T` per example, before any update
    pub x_t: Vec<Tensor>,
    pub grads: Gradients,
}

/// Sub-step 1: L1 loss of the target network on the joint reviews.
pub fn target_step(
    store: &ParamStore,
    target: &TargetNet,
    table: &EmbeddingTable,
    batch: &[TrainExample],
    keep_prob: f64,
    rng: &mut Rng,
) -> Result<TargetStep> {
    check_batch(batch)?;
    let mut tape = Tape::new(store);
    let mut regime = Regime::Train { keep_prob, rng };
    let mut losses = Vec::with_capacity(batch.len());
    let mut x_nodes = Vec::with_capacity(batch.len());
    for ex in batch {
        let out = target.forward(&mut tape, table, review(ex)?, &mut regime)?;
        x_nodes.push(out.x_t);
        losses.push(tape.abs_error(out.r_hat, ex.rating)?);
    }
    let loss = tape.mean(&losses)?;
    let x_t = x_nodes.iter().map(|x| tape.value(*x).clone()).collect();
    let value = tape.scalar(loss);
    Ok(TargetStep {
        loss: value,
        x_t,
        grads: tape.backward(loss)?,
    })
}

/// Result of sub-step 2.
#[derive(Debug, Clone)]
pub struct TransStep {
    pub loss: f64,
    /// `z_bar_L` per example, with the dropout mask that produced it
    pub z_bar: Vec<(Tensor, DropoutMask)>,
    pub grads: Gradients,
}

/// Sub-step 2: distance between the source representation and the fixed
/// `x_T` targets.
#[allow(clippy::too_many_arguments)]
pub fn trans_step(
    store: &ParamStore,
    source: &SourceNet,
    table: &EmbeddingTable,
    batch: &[TrainExample],
    x_t: &[Tensor],
    trans_loss: TransLoss,
    keep_prob: f64,
    rng: &mut Rng,
) -> Result<TransStep> {
    check_batch(batch)?;
    if x_t.len() != batch.len() {
        return Err(Error::Shape(alloc::format!(
            "{} targets for {} examples",
            x_t.len(),
            batch.len()
        )));
    }
    let mut tape = Tape::new(store);
    let mut regime = Regime::Train { keep_prob, rng };
    let mut losses = Vec::with_capacity(batch.len());
    let mut outs = Vec::with_capacity(batch.len());
    for (ex, x) in batch.iter().zip(x_t) {
        let out = source.forward(&mut tape, table, &ex.text_a, &ex.text_b, &mut regime)?;
        let target = tape.constant(x.clone());
        losses.push(match trans_loss {
            TransLoss::Squared => tape.squared_distance(out.z_bar, target)?,
            TransLoss::Norm => tape.distance(out.z_bar, target)?,
        });
        outs.push((out.z_bar, out.mask));
    }
    let loss = tape.mean(&losses)?;
    let z_bar = outs.into_iter().map(|(z, m)| (tape.value(z).clone(), m)).collect();
    let value = tape.scalar(loss);
    Ok(TransStep {
        loss: value,
        z_bar,
        grads: tape.backward(loss)?,
    })
}

/// `z_bar_L` recomputed with the current parameters and a fresh mask.
pub fn fresh_z_bar(
    store: &ParamStore,
    source: &SourceNet,
    table: &EmbeddingTable,
    batch: &[TrainExample],
    keep_prob: f64,
    rng: &mut Rng,
) -> Result<Vec<Tensor>> {
    let mut tape = Tape::new(store);
    let mut regime = Regime::Train { keep_prob, rng };
    batch
        .iter()
        .map(|ex| {
            let out = source.forward(&mut tape, table, &ex.text_a, &ex.text_b, &mut regime)?;
            Ok(tape.value(out.z_bar).clone())
        })
        .collect()
}

/// Sub-step 3: L1 loss of the regression head on fixed `z_bar_L` inputs.
pub fn source_step(
    store: &ParamStore,
    view: TransNetView<'_>,
    batch: &[TrainExample],
    z_bar: &[Tensor],
    keep_prob: f64,
    rng: &mut Rng,
) -> Result<(f64, Gradients)> {
    check_batch(batch)?;
    let mut tape = Tape::new(store);
    let mut regime = Regime::Train { keep_prob, rng };
    let mut losses = Vec::with_capacity(batch.len());
    for (ex, z) in batch.iter().zip(z_bar) {
        let z = tape.constant(z.clone());
        let r = view.head(&mut tape, ex, z, &mut regime)?;
        losses.push(tape.abs_error(r, ex.rating)?);
    }
    let loss = tape.mean(&losses)?;
    let value = tape.scalar(loss);
    Ok((value, tape.backward(loss)?))
}

/// Observer of the parameter store between sub-steps, used to verify
/// that each sub-step touches only its own group.
pub trait SubStepHook {
    fn after(&mut self, step: usize, store: &ParamStore);
}

impl SubStepHook for () {
    fn after(&mut self, _: usize, _: &ParamStore) {}
}

/// Three-sub-step TransNet update on one batch.
pub fn transnet_train_batch(
    model: &mut Model,
    optimizers: &mut Optimizers,
    table: &EmbeddingTable,
    batch: &[TrainExample],
    config: &TrainConfig,
    rng: &mut Rng,
    hook: &mut dyn SubStepHook,
) -> Result<BatchLosses> {
    let Model { store, arch, .. } = model;
    let view = TransNetView::of(arch)?;
    let keep = config.keep_prob;

    let t = target_step(store, view.target(), table, batch, keep, rng)?;
    apply_group(store, optimizers.get_mut("target")?, &t.grads, config.lr);
    hook.after(1, store);

    let s = trans_step(store, view.source(), table, batch, &t.x_t, config.trans_loss, keep, rng)?;
    apply_group(store, optimizers.get_mut("trans")?, &s.grads, config.lr);
    hook.after(2, store);

    let z_bar: Vec<Tensor> = if config.fresh_step3_mask {
        fresh_z_bar(store, view.source(), table, batch, keep, rng)?
    } else {
        s.z_bar.into_iter().map(|(z, _)| z).collect()
    };
    let (loss_s, grads) = source_step(store, view, batch, &z_bar, keep, rng)?;
    apply_group(store, optimizers.get_mut("source")?, &grads, config.lr);
    hook.after(3, store);

    Ok(BatchLosses {
        loss_t: Some(t.loss),
        loss_trans: Some(s.loss),
        loss_s,
    })
}

/// Diagnostic: one gradient of `loss_T + loss_trans + loss_S` through a
/// single graph, each group then stepped by its own optimizer.
pub fn transnet_joint_batch(
    model: &mut Model,
    optimizers: &mut Optimizers,
    table: &EmbeddingTable,
    batch: &[TrainExample],
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<BatchLosses> {
    check_batch(batch)?;
    let Model { store, arch, .. } = model;
    let view = TransNetView::of(arch)?;
    let grads;
    let (lt, ltr, ls);
    {
        let mut tape = Tape::new(store);
        let mut regime = Regime::Train {
            keep_prob: config.keep_prob,
            rng,
        };
        let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for ex in batch {
            let t = view.target().forward(&mut tape, table, review(ex)?, &mut regime)?;
            a.push(tape.abs_error(t.r_hat, ex.rating)?);
            let s = view
                .source()
                .forward(&mut tape, table, &ex.text_a, &ex.text_b, &mut regime)?;
            b.push(match config.trans_loss {
                TransLoss::Squared => tape.squared_distance(s.z_bar, t.x_t)?,
                TransLoss::Norm => tape.distance(s.z_bar, t.x_t)?,
            });
            let r = view.head(&mut tape, ex, s.z_bar, &mut regime)?;
            c.push(tape.abs_error(r, ex.rating)?);
        }
        let (na, nb, nc) = (tape.mean(&a)?, tape.mean(&b)?, tape.mean(&c)?);
        (lt, ltr, ls) = (tape.scalar(na), tape.scalar(nb), tape.scalar(nc));
        let total = tape.sum(&[na, nb, nc])?;
        grads = tape.backward(total)?;
    }
    for name in ["target", "trans", "source"] {
        apply_group(store, optimizers.get_mut(name)?, &grads, config.lr);
    }
    Ok(BatchLosses {
        loss_t: Some(lt),
        loss_trans: Some(ltr),
        loss_s: ls,
    })
}

/// Loss and gradients of one DeepCoNN batch without updating anything.
pub fn deepconn_gradients(
    model: &Model,
    table: &EmbeddingTable,
    batch: &[TrainExample],
    keep_prob: f64,
    rng: &mut Rng,
) -> Result<(f64, Gradients)> {
    check_batch(batch)?;
    let Architecture::DeepConn(net) = &model.arch else {
        return Err(Error::WrongModel("deepconn"));
    };
    let mut tape = Tape::new(&model.store);
    let mut regime = Regime::Train { keep_prob, rng };
    let mut losses = Vec::with_capacity(batch.len());
    for ex in batch {
        let r = net.forward(&mut tape, table, &ex.text_a, &ex.text_b, &mut regime)?;
        losses.push(tape.abs_error(r, ex.rating)?);
    }
    let loss = tape.mean(&losses)?;
    let v = tape.scalar(loss);
    Ok((v, tape.backward(loss)?))
}

/// Single L1 step on every DeepCoNN parameter. Whether the joint review is
/// part of the profiles is decided when the examples are built.
pub fn deepconn_train_batch(
    model: &mut Model,
    optimizers: &mut Optimizers,
    table: &EmbeddingTable,
    batch: &[TrainExample],
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<BatchLosses> {
    let (loss, grads) = deepconn_gradients(model, table, batch, config.keep_prob, rng)?;
    apply_group(&mut model.store, optimizers.get_mut("all")?, &grads, config.lr);
    Ok(BatchLosses {
        loss_s: loss,
        ..BatchLosses::default()
    })
}

/// Single squared-error step on every MF parameter.
pub fn mf_train_batch(
    model: &mut Model,
    optimizers: &mut Optimizers,
    batch: &[TrainExample],
    config: &TrainConfig,
) -> Result<BatchLosses> {
    check_batch(batch)?;
    let Architecture::Mf(mf) = &model.arch else {
        return Err(Error::WrongModel("mf"));
    };
    let (loss, grads) = {
        let mut tape = Tape::new(&model.store);
        let mut losses = Vec::with_capacity(batch.len());
        for ex in batch {
            let r = mf.forward(&mut tape, &ex.user_id, &ex.item_id)?;
            losses.push(tape.squared_error(r, ex.rating)?);
        }
        let loss = tape.mean(&losses)?;
        (tape.scalar(loss), tape.backward(loss)?)
    };
    apply_group(&mut model.store, optimizers.get_mut("all")?, &grads, config.lr);
    Ok(BatchLosses {
        loss_s: loss,
        ..BatchLosses::default()
    })
}

/// Dispatches one batch to the update rule of the configured model.
pub fn train_batch(
    model: &mut Model,
    optimizers: &mut Optimizers,
    table: &EmbeddingTable,
    batch: &[TrainExample],
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<BatchLosses> {
    match (&model.arch, config.joint_training) {
        (Architecture::Mf(_), _) => mf_train_batch(model, optimizers, batch, config),
        (Architecture::DeepConn(_), _) => deepconn_train_batch(model, optimizers, table, batch, config, rng),
        (_, true) => transnet_joint_batch(model, optimizers, table, batch, config, rng),
        (_, false) => transnet_train_batch(model, optimizers, table, batch, config, rng, &mut ()),
    }
}

/// Parameter ids of a named group, empty if the model lacks it.
pub fn group_ids(model: &Model, name: &str) -> Vec<ParamId> {
    model
        .param_groups()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ids)| ids)
        .unwrap_or_default()
}
