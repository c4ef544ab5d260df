use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Bernoulli keep mask. Kept units are scaled by `1 / keep_prob`
/// (inverted dropout) so the expectation of the output equals the input.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
    keep_prob: f64,
}

impl DropoutMask {
    pub fn ones(len: usize) -> Self {
        Self {
            keep: alloc::vec![true; len],
            keep_prob: 1.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(len: usize, keep_prob: f64, mode: Mode, rng: &mut R) -> Result<Self> {
        check_keep_prob(keep_prob)?;
        if mode == Mode::Eval {
            return Ok(Self::ones(len));
        }
        let keep = (0..len).map(|_| rng.random::<f64>() < keep_prob).collect();
        Ok(Self { keep, keep_prob })
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.keep_prob == 1.0 && self.keep.iter().all(|k| *k)
    }

    pub fn kept(&self, i: usize) -> bool {
        self.keep[i]
    }

    /// Per-unit multipliers `mask_i / keep_prob`.
    pub fn scales(&self) -> Vec<f64> {
        self.keep
            .iter()
            .map(|&k| if k { 1.0 / self.keep_prob } else { 0.0 })
            .collect()
    }
}

fn check_keep_prob(keep_prob: f64) -> Result<()> {
    if keep_prob > 0.0 && keep_prob <= 1.0 {
        Ok(())
    } else {
        Err(Error::KeepProb(keep_prob))
    }
}

/// Applies dropout to `x`, returning the output and the mask used.
pub fn dropout<R: Rng + ?Sized>(x: &Tensor, keep_prob: f64, mode: Mode, rng: &mut R) -> Result<(Tensor, DropoutMask)> {
    let mask = DropoutMask::sample(x.len(), keep_prob, mode, rng)?;
    if mask.is_identity() {
        return Ok((x.clone(), mask));
    }
    let data = x.data().iter().zip(mask.scales()).map(|(v, s)| v * s).collect();
    Ok((Tensor::new(x.shape().to_vec(), data)?, mask))
}
