//! The TRANSFORM stack: `L` layers `z_l = sigma(z_{l-1} G_l + g_l)`, the
//! first one mapping `2n` inputs to `n` outputs.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::ModelDims;
use crate::nn::{fc_forward, init, Activation, NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransformParams {
    /// `(G_l, g_l)`; `G_1` is `2n x n`, the rest `n x n`.
    pub layers: Vec<(Tensor, Tensor)>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transform {
    pub layers: Vec<(ParamId, ParamId)>,
    pub activation: Activation,
}

impl Transform {
    /// `G_l ~ truncated normal(0, 0.1)`, `g_l = 0.1`.
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        dims: &ModelDims,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.layers == 0 {
            return Err(Error::NoLayers);
        }
        let n = dims.latent;
        let layers = (0..dims.layers)
            .map(|l| {
                let rows = if l == 0 { 2 * n } else { n };
                let g = store.add(
                    format!("{prefix}.{l}.weight"),
                    init::truncated_normal(rng, &[rows, n], 0.0, 0.1),
                );
                let b = store.add(format!("{prefix}.{l}.bias"), Tensor::filled(&[n], 0.1));
                (g, b)
            })
            .collect();
        Ok(Self {
            layers,
            activation: dims.transform_activation,
        })
    }

    pub fn locate(store: &ParamStore, prefix: &str, layers: usize, activation: Activation) -> Result<Self> {
        if layers == 0 {
            return Err(Error::NoLayers);
        }
        let layers = (0..layers)
            .map(|l| {
                Ok((
                    super::find(store, &format!("{prefix}.{l}.weight"))?,
                    super::find(store, &format!("{prefix}.{l}.bias"))?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self { layers, activation })
    }

    pub fn ids(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(|(g, b)| [*g, *b]).collect()
    }

    pub fn forward(&self, tape: &mut Tape<'_>, z0: NodeId) -> Result<NodeId> {
        let mut z = z0;
        for (g, b) in &self.layers {
            let (gn, bn) = (tape.param(*g), tape.param(*b));
            let a = tape.affine(z, gn, bn)?;
            z = tape.activate(a, self.activation);
        }
        Ok(z)
    }

    pub fn params(&self, store: &ParamStore) -> TransformParams {
        TransformParams {
            layers: self
                .layers
                .iter()
                .map(|(g, b)| (store.value(*g).clone(), store.value(*b).clone()))
                .collect(),
            activation: self.activation,
        }
    }
}

/// Applies the layer stack to `z0` without a tape.
pub fn transform(z0: &Tensor, params: &TransformParams) -> Result<Tensor> {
    if params.layers.is_empty() {
        return Err(Error::NoLayers);
    }
    let mut z = z0.clone();
    for (g, b) in &params.layers {
        z = fc_forward(&z, g, b, params.activation).map_err(|e| Error::Shape(format!("transform layer: {e}")))?;
    }
    Ok(z)
}
