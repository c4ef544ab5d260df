//! Model zoo built from the text processor, the TRANSFORM stack and
//! factorization machines.

mod cnn;
mod ids;
mod mf;
mod nets;
mod transform;

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use cnn::{cnn_text_process, CNNTextParams, CnnText};
pub use ids::IdIndex;
pub use mf::{mf_predict, MFParams, Mf};
pub use nets::{DeepConn, SourceNet, SourceOut, TargetNet, TargetOut, TransNet, TransNetExt};
pub use transform::{transform, Transform, TransformParams};

use crate::corpus::{ReviewRecord, TokenSequence};
use crate::embeddings::EmbeddingTable;
use crate::nn::{Activation, DropoutMask, Mode, ParamId, ParamStore, Tape};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "mf")]
    Mf,
    #[serde(rename = "deepconn")]
    DeepConn,
    #[serde(rename = "deepconn-revab")]
    DeepConnRevAb,
    #[serde(rename = "transnet")]
    TransNet,
    #[serde(rename = "transnet-ext")]
    TransNetExt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Mf,
        ModelKind::DeepConn,
        ModelKind::DeepConnRevAb,
        ModelKind::TransNet,
        ModelKind::TransNetExt,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mf => "mf",
            ModelKind::DeepConn => "deepconn",
            ModelKind::DeepConnRevAb => "deepconn-revab",
            ModelKind::TransNet => "transnet",
            ModelKind::TransNetExt => "transnet-ext",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Whether training profiles drop the joint review.
    pub fn excludes_joint_review(self) -> bool {
        !matches!(self, ModelKind::DeepConn)
    }

    pub fn uses_text(self) -> bool {
        !matches!(self, ModelKind::Mf)
    }

    pub fn is_transnet(self) -> bool {
        matches!(self, ModelKind::TransNet | ModelKind::TransNetExt)
    }
}

impl core::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Architecture sizes shared by every text-based model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    /// T, tokens per text
    pub seq_len: usize,
    /// d
    pub embed_dim: usize,
    /// m, convolution neurons
    pub filters: usize,
    /// t, convolution window
    pub window: usize,
    /// n, text-processor output width, also the MF and Omega width
    pub latent: usize,
    /// k
    pub fm_rank: usize,
    /// L, TRANSFORM depth
    pub layers: usize,
    pub cnn_activation: Activation,
    pub transform_activation: Activation,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            seq_len: 1000,
            embed_dim: 64,
            filters: 100,
            window: 3,
            latent: 50,
            fm_rank: 8,
            layers: 2,
            cnn_activation: Activation::Tanh,
            transform_activation: Activation::Tanh,
        }
    }
}

impl ModelDims {
    /// CPU-scale sizes.
    pub fn desk() -> Self {
        Self {
            seq_len: 64,
            embed_dim: 16,
            filters: 8,
            latent: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let named = [
            ("seq_len", self.seq_len),
            ("embed_dim", self.embed_dim),
            ("filters", self.filters),
            ("window", self.window),
            ("latent", self.latent),
            ("fm_rank", self.fm_rank),
            ("layers", self.layers),
        ];
        for (name, v) in named {
            if v == 0 {
                problems.push(alloc::format!("{name} must be positive"));
            }
        }
        if self.window > self.seq_len {
            problems.push("window must not exceed seq_len".to_string());
        }
        problems
    }
}

/// Dropout behaviour of one forward pass.
pub enum Regime<'r> {
    Eval,
    Train { keep_prob: f64, rng: &'r mut Rng },
}

impl Regime<'_> {
    pub fn mode(&self) -> Mode {
        match self {
            Regime::Eval => Mode::Eval,
            Regime::Train { .. } => Mode::Train,
        }
    }

    pub fn mask(&mut self, len: usize) -> Result<DropoutMask> {
        match self {
            Regime::Eval => Ok(DropoutMask::ones(len)),
            Regime::Train { keep_prob, rng } => DropoutMask::sample(len, *keep_prob, Mode::Train, *rng),
        }
    }
}

/// Inputs describing one (user, item) query.
#[derive(Debug, Clone, Copy)]
pub struct PairInput<'a> {
    pub user_id: &'a str,
    pub item_id: &'a str,
    pub text_a: &'a TokenSequence,
    pub text_b: &'a TokenSequence,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Architecture {
    Mf(Mf),
    DeepConn(DeepConn),
    TransNet(TransNet),
    TransNetExt(TransNetExt),
}

/// A model: its kind, sizes, parameters and the handles into them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub dims: ModelDims,
    pub store: ParamStore,
    pub arch: Architecture,
}

pub(crate) fn find(store: &ParamStore, name: &str) -> Result<ParamId> {
    store.find(name).ok_or_else(|| Error::MissingParam(name.to_string()))
}

impl Model {
    /// Freshly initialized model. `train` supplies the user/item id
    /// spaces and the global mean needed by the MF and TransNet-Ext models.
    pub fn new(kind: ModelKind, dims: ModelDims, train: &[ReviewRecord], seed: u64) -> Result<Self> {
        let problems = dims.validate();
        if kind.uses_text() && !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        let mut store = ParamStore::new();
        let mut r = rng::stream(seed, "init");
        let users = IdIndex::from_ids(train.iter().map(|x| x.user_id.as_str()));
        let items = IdIndex::from_ids(train.iter().map(|x| x.item_id.as_str()));
        let arch = match kind {
            ModelKind::Mf => {
                let mean = if train.is_empty() {
                    0.0
                } else {
                    train.iter().map(|x| x.rating).sum::<f64>() / train.len() as f64
                };
                Architecture::Mf(Mf::register(&mut store, dims.latent, mean, users, items, &mut r))
            }
            ModelKind::DeepConn | ModelKind::DeepConnRevAb => {
                Architecture::DeepConn(DeepConn::register(&mut store, &dims, &mut r))
            }
            ModelKind::TransNet => Architecture::TransNet(TransNet::register(&mut store, &dims, &mut r)?),
            ModelKind::TransNetExt => Architecture::TransNetExt(TransNetExt::register(
                &mut store,
                &dims,
                users,
                items,
                rng::derive_str(seed, "unseen"),
                &mut r,
            )?),
        };
        Ok(Self {
            kind,
            dims,
            store,
            arch,
        })
    }

    /// Rebinds handles over a restored parameter store.
    pub fn from_store(
        kind: ModelKind,
        dims: ModelDims,
        store: ParamStore,
        users: IdIndex,
        items: IdIndex,
        seed: u64,
    ) -> Result<Self> {
        let arch = match kind {
            ModelKind::Mf => Architecture::Mf(Mf::locate(&store, users, items)?),
            ModelKind::DeepConn | ModelKind::DeepConnRevAb => Architecture::DeepConn(DeepConn::locate(&store, &dims)?),
            ModelKind::TransNet => Architecture::TransNet(TransNet::locate(&store, &dims)?),
            ModelKind::TransNetExt => Architecture::TransNetExt(TransNetExt::locate(
                &store,
                &dims,
                users,
                items,
                rng::derive_str(seed, "unseen"),
            )?),
        };
        let model = Self {
            kind,
            dims,
            store,
            arch,
        };
        for id in model.store.ids() {
            if !model.param_groups().iter().any(|(_, g)| g.contains(&id)) {
                return Err(Error::Config(alloc::format!(
                    "unexpected parameter {} for {kind}",
                    model.store.get(id).name
                )));
            }
        }
        Ok(model)
    }

    /// User and item id spaces, for the models that have them.
    pub fn id_spaces(&self) -> Option<(&IdIndex, &IdIndex)> {
        match &self.arch {
            Architecture::Mf(m) => Some((&m.users, &m.items)),
            Architecture::TransNetExt(e) => Some((&e.users, &e.items)),
            _ => None,
        }
    }

    /// Named parameter sets updated by separate optimizers. TransNet
    /// models split into `target`, `trans` and `source`; the others train
    /// everything together under `all`.
    pub fn param_groups(&self) -> Vec<(&'static str, Vec<ParamId>)> {
        match &self.arch {
            Architecture::Mf(m) => vec![("all", m.ids())],
            Architecture::DeepConn(d) => vec![("all", d.ids())],
            Architecture::TransNet(t) => vec![
                ("target", t.target.ids()),
                ("trans", t.source.ids()),
                ("source", t.fm_s.ids().to_vec()),
            ],
            Architecture::TransNetExt(e) => vec![
                ("target", e.target.ids()),
                ("trans", e.source.ids()),
                ("source", e.head_ids()),
            ],
        }
    }

    /// Eval-mode rating prediction. Text inputs are ignored by MF.
    pub fn predict(&self, table: &EmbeddingTable, input: &PairInput<'_>) -> Result<f64> {
        let mut tape = Tape::new(&self.store);
        let mut regime = Regime::Eval;
        let out = match &self.arch {
            Architecture::Mf(m) => m.forward(&mut tape, input.user_id, input.item_id)?,
            Architecture::DeepConn(d) => d.forward(&mut tape, table, input.text_a, input.text_b, &mut regime)?,
            Architecture::TransNet(t) => {
                let s = t
                    .source
                    .forward(&mut tape, table, input.text_a, input.text_b, &mut regime)?;
                t.fm_s.forward(&mut tape, s.z_bar)?
            }
            Architecture::TransNetExt(e) => {
                let s = e
                    .source
                    .forward(&mut tape, table, input.text_a, input.text_b, &mut regime)?;
                e.head(&mut tape, input.user_id, input.item_id, s.z_bar, &mut regime)?
            }
        };
        Ok(tape.scalar(out))
    }

    pub fn parameter_count(&self) -> usize {
        self.store.iter().map(|(_, p)| p.value.len()).sum()
    }
}
