//! Central finite-difference checks of the recorded gradients.
//!
//! A check perturbs each selected parameter coordinate by `+-h`, re-runs
//! the forward pass and compares `(f(x+h) - f(x-h)) / 2h` with the
//! analytic gradient. Coordinates whose perturbation changes a discrete
//! choice of the forward pass (max-pool winner, sign of an absolute error,
//! ReLU pattern) sit on a kink and are skipped and counted.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng as _, SeedableRng};

use crate::corpus::ReviewRecord;
use crate::corpus::TokenSequence;
use crate::embeddings::EmbeddingTable;
use crate::fm::{FMParams, FmLayer};
use crate::models::{Model, ModelDims, ModelKind, Regime, Transform};
use crate::nn::{init, Activation, DropoutMask, Mode, NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::rng::{self, Rng};
use crate::training::steps::TransNetView;
use crate::training::TrainExample;
use crate::Result;

/// Finite-difference step.
pub const STEP: f64 = 1e-3;
/// Largest accepted relative error.
pub const TOLERANCE: f64 = 1e-4;
/// Gradients smaller than this are compared in absolute terms.
pub const FLOOR: f64 = 1e-6;
/// At most this many coordinates of one tensor are checked.
pub const MAX_COORDS: usize = 24;

/// `|a - n| / max(|a|, |n|, FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = libm::fmax(libm::fmax(libm::fabs(analytic), libm::fabs(numeric)), FLOOR);
    libm::fabs(analytic - numeric) / scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub max_rel_error: f64,
    /// coordinate with the largest error, as (parameter name, flat index)
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub skipped: usize,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.max_rel_error < TOLERANCE
    }
}

/// Checks the gradient of the scalar built by `forward` with respect to
/// the parameters `ids` of `store`. `forward` must be deterministic.
pub fn check<F>(name: &str, store: &mut ParamStore, ids: &[ParamId], rng: &mut Rng, forward: F) -> Result<CheckOutcome>
where
    F: Fn(&mut Tape<'_>) -> Result<NodeId>,
{
    let eval = |store: &ParamStore| -> Result<(f64, u64)> {
        let mut tape = Tape::new(store);
        let out = forward(&mut tape)?;
        Ok((tape.scalar(out), tape.branch_signature()))
    };
    let (grads, base_sig) = {
        let mut tape = Tape::new(store);
        let out = forward(&mut tape)?;
        let sig = tape.branch_signature();
        (tape.backward(out)?, sig)
    };
    let mut outcome = CheckOutcome {
        name: name.into(),
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
    };
    for &id in ids {
        let len = store.value(id).len();
        let coords: Vec<usize> = if len <= MAX_COORDS {
            (0..len).collect()
        } else {
            let mut c = index::sample(rng, len, MAX_COORDS).into_vec();
            c.sort_unstable();
            c
        };
        for c in coords {
            let x = store.value(id).data()[c];
            store.get_mut(id).value.data_mut()[c] = x + STEP;
            let (fp, sp) = eval(store)?;
            store.get_mut(id).value.data_mut()[c] = x - STEP;
            let (fm, sm) = eval(store)?;
            store.get_mut(id).value.data_mut()[c] = x;
            if sp != base_sig || sm != base_sig {
                outcome.skipped += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * STEP);
            let analytic = grads.get(id).map_or(0.0, |g| g.data()[c]);
            let err = relative_error(analytic, numeric);
            outcome.checked += 1;
            if err > outcome.max_rel_error || outcome.worst.is_none() {
                outcome.max_rel_error = libm::fmax(err, outcome.max_rel_error);
                outcome.worst = Some((store.get(id).name.clone(), c));
            }
        }
    }
    Ok(outcome)
}

/// Kinds of checks run by [`run_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseKind {
    Conv,
    MaxPool,
    FullyConnected,
    Dropout,
    Fm,
    Transform,
    L1,
    L2,
    TransNetSource,
    TransNetExtSource,
    Target,
    DeepConn,
    Mf,
}

impl CaseKind {
    pub const ALL: [CaseKind; 13] = [
        CaseKind::Conv,
        CaseKind::MaxPool,
        CaseKind::FullyConnected,
        CaseKind::Dropout,
        CaseKind::Fm,
        CaseKind::Transform,
        CaseKind::L1,
        CaseKind::L2,
        CaseKind::TransNetSource,
        CaseKind::TransNetExtSource,
        CaseKind::Target,
        CaseKind::DeepConn,
        CaseKind::Mf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseKind::Conv => "conv",
            CaseKind::MaxPool => "max_pool",
            CaseKind::FullyConnected => "fully_connected",
            CaseKind::Dropout => "dropout",
            CaseKind::Fm => "fm",
            CaseKind::Transform => "transform",
            CaseKind::L1 => "l1_loss",
            CaseKind::L2 => "l2_loss",
            CaseKind::TransNetSource => "transnet_r_s",
            CaseKind::TransNetExtSource => "transnet_ext_r_se",
            CaseKind::Target => "target_r_t",
            CaseKind::DeepConn => "deepconn",
            CaseKind::Mf => "mf",
        }
    }
}

fn normal(rng: &mut Rng, shape: &[usize], std: f64) -> Tensor {
    init::truncated_normal(rng, shape, 0.0, std)
}

fn act(rng: &mut Rng) -> Activation {
    if rng.random_bool(0.5) {
        Activation::Tanh
    } else {
        Activation::Identity
    }
}

/// Random tiny dimensions for model-level checks.
pub fn tiny_dims(rng: &mut Rng) -> ModelDims {
    ModelDims {
        seq_len: rng.random_range(6..=10),
        embed_dim: 4,
        filters: 3,
        window: 2,
        latent: 3,
        fm_rank: 2,
        layers: rng.random_range(1..=3),
        ..ModelDims::default()
    }
}

fn tiny_fixture(rng: &mut Rng, dims: &ModelDims) -> Result<(EmbeddingTable, Vec<TrainExample>, Vec<ReviewRecord>)> {
    let vocab_rows = 12;
    let mut m = init::uniform(rng, &[vocab_rows, dims.embed_dim], -1.0, 1.0);
    m.row_mut(0).fill(0.0);
    let table = EmbeddingTable::from_matrix(m)?;
    let seq = |rng: &mut Rng| -> TokenSequence {
        TokenSequence::new(
            (0..dims.seq_len)
                .map(|_| rng.random_range(1..vocab_rows as u32))
                .collect(),
        )
    };
    let users = ["u0", "u1"];
    let items = ["i0", "i1"];
    let mut examples = Vec::new();
    let mut records = Vec::new();
    for k in 0..2 {
        let rating = f64::from(rng.random_range(1..=5u8));
        records.push(ReviewRecord::new(users[k], items[k], rating, ""));
        examples.push(TrainExample {
            user_id: users[k].into(),
            item_id: items[k].into(),
            text_a: seq(rng),
            text_b: seq(rng),
            review: Some(seq(rng)),
            rating,
        });
    }
    Ok((table, examples, records))
}

fn layer_case(kind: CaseKind, rng: &mut Rng) -> Result<CheckOutcome> {
    let mut store = ParamStore::new();
    let name = kind.name();
    match kind {
        CaseKind::Conv | CaseKind::MaxPool => {
            let (len, dim, m, t) = (
                rng.random_range(4..=8),
                rng.random_range(2..=4),
                rng.random_range(1..=4),
                rng.random_range(1..=3),
            );
            let x = store.add("x", normal(rng, &[len, dim], 1.0));
            let k = store.add("filters", normal(rng, &[m, t, dim], 0.5));
            let b = store.add("bias", normal(rng, &[m], 0.1));
            let a = act(rng);
            let probe = normal(rng, &[m * (len - t + 1)], 1.0);
            let probe_m = normal(rng, &[m], 1.0);
            let pool = kind == CaseKind::MaxPool;
            let ids = [x, k, b];
            check(name, &mut store, &ids, rng, |tape| {
                let (xn, kn, bn) = (tape.param(x), tape.param(k), tape.param(b));
                let c = tape.conv(xn, kn, bn)?;
                let z = tape.activate(c, a);
                if pool {
                    let o = tape.max_pool(z)?;
                    let p = tape.constant(probe_m.clone());
                    tape.dot(o, p)
                } else {
                    let p = tape.constant(probe.clone());
                    tape.dot(z, p)
                }
            })
        }
        CaseKind::FullyConnected => {
            let (i, o) = (rng.random_range(1..=6), rng.random_range(1..=6));
            let x = store.add("x", normal(rng, &[i], 1.0));
            let w = store.add("weight", normal(rng, &[i, o], 0.5));
            let g = store.add("bias", normal(rng, &[o], 0.1));
            let a = act(rng);
            let probe = normal(rng, &[o], 1.0);
            check(name, &mut store, &[x, w, g], rng, |tape| {
                let (xn, wn, gn) = (tape.param(x), tape.param(w), tape.param(g));
                let y = tape.affine(xn, wn, gn)?;
                let y = tape.activate(y, a);
                let p = tape.constant(probe.clone());
                tape.dot(y, p)
            })
        }
        CaseKind::Dropout => {
            let n = rng.random_range(2..=8);
            let keep = rng.random_range(0.3..1.0);
            let mode = if rng.random_bool(0.5) { Mode::Train } else { Mode::Eval };
            let mask = DropoutMask::sample(n, keep, mode, rng)?;
            let x = store.add("x", normal(rng, &[n], 1.0));
            let probe = normal(rng, &[n], 1.0);
            check(name, &mut store, &[x], rng, |tape| {
                let xn = tape.param(x);
                let y = tape.dropout(xn, &mask)?;
                let y = tape.activate(y, Activation::Tanh);
                let p = tape.constant(probe.clone());
                tape.dot(y, p)
            })
        }
        CaseKind::Fm => {
            let (p, k) = (rng.random_range(1..=8), rng.random_range(1..=4));
            let z = store.add("z", normal(rng, &[p], 1.0));
            let params = FMParams {
                w0: rng.random_range(-1.0..1.0),
                w: normal(rng, &[p], 0.5),
                v: normal(rng, &[p, k], 0.5),
            };
            let fm = FmLayer::register(&mut store, "fm", params);
            let mut ids = alloc::vec![z];
            ids.extend(fm.ids());
            check(name, &mut store, &ids, rng, |tape| {
                let zn = tape.param(z);
                fm.forward(tape, zn)
            })
        }
        CaseKind::Transform => {
            let dims = ModelDims {
                latent: rng.random_range(1..=4),
                layers: rng.random_range(1..=4),
                ..ModelDims::default()
            };
            let z0 = store.add("z0", normal(rng, &[2 * dims.latent], 1.0));
            let tr = Transform::register(&mut store, "transform", &dims, rng)?;
            let probe = normal(rng, &[dims.latent], 1.0);
            let mut ids = alloc::vec![z0];
            ids.extend(tr.ids());
            check(name, &mut store, &ids, rng, |tape| {
                let zn = tape.param(z0);
                let y = tr.forward(tape, zn)?;
                let p = tape.constant(probe.clone());
                tape.dot(y, p)
            })
        }
        CaseKind::L1 => {
            let p = store.add("pred", Tensor::scalar(rng.random_range(-3.0..3.0)));
            let target = rng.random_range(-3.0..3.0);
            check(name, &mut store, &[p], rng, |tape| {
                let pn = tape.param(p);
                tape.abs_error(pn, target)
            })
        }
        CaseKind::L2 => {
            let n = rng.random_range(1..=6);
            let a = store.add("a", normal(rng, &[n], 1.0));
            let b = store.add("b", normal(rng, &[n], 1.0));
            let squared = rng.random_bool(0.5);
            check(name, &mut store, &[a, b], rng, |tape| {
                let (an, bn) = (tape.param(a), tape.param(b));
                if squared {
                    tape.squared_distance(an, bn)
                } else {
                    tape.distance(an, bn)
                }
            })
        }
        _ => model_case(kind, rng),
    }
}

fn model_case(kind: CaseKind, rng: &mut Rng) -> Result<CheckOutcome> {
    let dims = tiny_dims(rng);
    let (table, examples, records) = tiny_fixture(rng, &dims)?;
    let model_kind = match kind {
        CaseKind::TransNetSource | CaseKind::Target => ModelKind::TransNet,
        CaseKind::TransNetExtSource => ModelKind::TransNetExt,
        CaseKind::DeepConn => ModelKind::DeepConn,
        _ => ModelKind::Mf,
    };
    let seed = rng.random();
    let model = Model::new(model_kind, dims, &records, seed)?;
    let mut store = model.store.clone();
    let ids: Vec<ParamId> = store.ids().collect();
    let keep = rng.random_range(0.4..1.0);
    let mask_seed: u64 = rng.random();
    let name = kind.name();
    // the same seed on every pass gives the same dropout masks
    let forward = |tape: &mut Tape<'_>| -> Result<NodeId> {
        let mut r = Rng::seed_from_u64(mask_seed);
        let mut regime = Regime::Train {
            keep_prob: keep,
            rng: &mut r,
        };
        let mut losses = Vec::new();
        for ex in &examples {
            let pred = match (&model.arch, kind) {
                (crate::models::Architecture::Mf(mf), _) => mf.forward(tape, &ex.user_id, &ex.item_id)?,
                (crate::models::Architecture::DeepConn(d), _) => {
                    d.forward(tape, &table, &ex.text_a, &ex.text_b, &mut regime)?
                }
                (arch, CaseKind::Target) => {
                    let view = TransNetView::of(arch)?;
                    let review = ex.review.as_ref().expect("fixture reviews");
                    view.target().forward(tape, &table, review, &mut regime)?.r_hat
                }
                (arch, _) => {
                    let view = TransNetView::of(arch)?;
                    let s = view
                        .source()
                        .forward(tape, &table, &ex.text_a, &ex.text_b, &mut regime)?;
                    view.head(tape, ex, s.z_bar, &mut regime)?
                }
            };
            losses.push(tape.abs_error(pred, ex.rating)?);
        }
        tape.mean(&losses)
    };
    check(name, &mut store, &ids, rng, forward)
}

/// One check of `kind` at random tiny sizes drawn from `seed`.
pub fn run_case(kind: CaseKind, seed: u64) -> Result<CheckOutcome> {
    let mut rng = rng::stream_keyed(seed, &[rng::fnv1a(kind.name().as_bytes())]);
    let mut out = layer_case(kind, &mut rng)?;
    out.name = format!("{}#{seed}", kind.name());
    Ok(out)
}

/// Summary of [`run_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn max_rel_error(&self) -> f64 {
        self.outcomes.iter().map(|o| o.max_rel_error).fold(0.0, libm::fmax)
    }

    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(CheckOutcome::passed)
    }

    pub fn checked(&self) -> usize {
        self.outcomes.iter().map(|o| o.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.outcomes.iter().map(|o| o.skipped).sum()
    }
}

/// `configs_per_kind` random configurations of every case kind.
pub fn run_suite(configs_per_kind: usize, seed: u64) -> Result<SuiteReport> {
    let mut outcomes = Vec::new();
    for kind in CaseKind::ALL {
        for i in 0..configs_per_kind {
            outcomes.push(run_case(kind, rng::derive(seed, &[i as u64]))?);
        }
    }
    Ok(SuiteReport { outcomes })
}
