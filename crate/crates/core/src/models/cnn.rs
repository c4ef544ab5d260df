//! CNN text processor: embedding lookup, convolution, max-pool and a
//! fully connected layer mapping a token sequence to an `n`-vector.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::ModelDims;
use crate::corpus::TokenSequence;
use crate::embeddings::{lookup, EmbeddingTable};
use crate::nn::{conv_text_forward, fc_forward, init, max_pool, Activation, NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::Result;

/// Plain snapshot of one text processor's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CNNTextParams {
    /// `m x t x d`
    pub filters: Tensor,
    /// `m`
    pub conv_bias: Tensor,
    /// `m x n`
    pub weight: Tensor,
    /// `n`
    pub bias: Tensor,
    pub activation: Activation,
}

/// Text processor whose parameters live in a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnnText {
    pub filters: ParamId,
    pub conv_bias: ParamId,
    pub weight: ParamId,
    pub bias: ParamId,
    pub activation: Activation,
}

impl CnnText {
    /// Filters and `W` from truncated normal(0, 0.1); both biases 0.1.
    pub fn register<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, dims: &ModelDims, rng: &mut R) -> Self {
        let (m, t, d, n) = (dims.filters, dims.window, dims.embed_dim, dims.latent);
        Self {
            filters: store.add(
                format!("{prefix}.filters"),
                init::truncated_normal(rng, &[m, t, d], 0.0, 0.1),
            ),
            conv_bias: store.add(format!("{prefix}.conv_bias"), Tensor::filled(&[m], 0.1)),
            weight: store.add(
                format!("{prefix}.weight"),
                init::truncated_normal(rng, &[m, n], 0.0, 0.1),
            ),
            bias: store.add(format!("{prefix}.bias"), Tensor::filled(&[n], 0.1)),
            activation: dims.cnn_activation,
        }
    }

    pub fn locate(store: &ParamStore, prefix: &str, activation: Activation) -> Result<Self> {
        Ok(Self {
            filters: super::find(store, &format!("{prefix}.filters"))?,
            conv_bias: super::find(store, &format!("{prefix}.conv_bias"))?,
            weight: super::find(store, &format!("{prefix}.weight"))?,
            bias: super::find(store, &format!("{prefix}.bias"))?,
            activation,
        })
    }

    pub fn ids(&self) -> Vec<ParamId> {
        alloc::vec![self.filters, self.conv_bias, self.weight, self.bias]
    }

    /// Records the processor on `tape` for an already embedded `T x d` input.
    pub fn forward(&self, tape: &mut Tape<'_>, embedded: NodeId) -> Result<NodeId> {
        let (k, b) = (tape.param(self.filters), tape.param(self.conv_bias));
        let conv = tape.conv(embedded, k, b)?;
        let z = tape.activate(conv, self.activation);
        let o = tape.max_pool(z)?;
        let (w, g) = (tape.param(self.weight), tape.param(self.bias));
        let x = tape.affine(o, w, g)?;
        Ok(tape.activate(x, self.activation))
    }

    /// Looks `seq` up in the frozen table and records the processor.
    pub fn encode(&self, tape: &mut Tape<'_>, table: &EmbeddingTable, seq: &TokenSequence) -> Result<NodeId> {
        let v = tape.constant(lookup(table, seq)?);
        self.forward(tape, v)
    }

    pub fn params(&self, store: &ParamStore) -> CNNTextParams {
        CNNTextParams {
            filters: store.value(self.filters).clone(),
            conv_bias: store.value(self.conv_bias).clone(),
            weight: store.value(self.weight).clone(),
            bias: store.value(self.bias).clone(),
            activation: self.activation,
        }
    }
}

/// `lookup -> conv_text_forward -> max_pool -> fc_forward`, evaluated
/// without a tape.
pub fn cnn_text_process(seq: &TokenSequence, params: &CNNTextParams, table: &EmbeddingTable) -> Result<Tensor> {
    let v = lookup(table, seq)?;
    let z = conv_text_forward(&v, &params.filters, &params.conv_bias, params.activation)?;
    let (o, _) = max_pool(&z)?;
    fc_forward(&o, &params.weight, &params.bias, params.activation)
}
