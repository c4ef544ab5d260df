//! Factorization machine regression head.
//!
//! `y = w0 + sum_i w_i z_i + sum_{i<j} <v_i, v_j> z_i z_j`, evaluated in
//! `O(p k)` through
//! `sum_{i<j} <v_i, v_j> z_i z_j = 1/2 sum_f [(sum_i V_if z_i)^2 - sum_i V_if^2 z_i^2]`.

use alloc::format;
use alloc::string::String;

use rand::Rng;

use crate::nn::{init, NodeId, ParamId, ParamStore, Tape, Tensor};
use crate::{Error, Result};

pub const DEFAULT_RANK: usize = 8;

/// Plain FM parameters: bias `w0`, linear weights `w` (`p`), factors `v` (`p x k`).
#[derive(Debug, Clone, PartialEq)]
pub struct FMParams {
    pub w0: f64,
    pub w: Tensor,
    pub v: Tensor,
}

impl FMParams {
    pub fn new(w0: f64, w: Tensor, v: Tensor) -> Result<Self> {
        let p = w.len();
        if w.shape() != [p] || v.shape().len() != 2 || v.shape()[0] != p || v.shape()[1] == 0 {
            return Err(Error::Shape(format!("fm w {:?} v {:?}", w.shape(), v.shape())));
        }
        Ok(Self { w0, w, v })
    }

    /// `w = 0.001`, `V ~ truncated normal(0, 0.001)`, `w0 = 0`.
    pub fn init<R: Rng + ?Sized>(p: usize, rank: usize, rng: &mut R) -> Self {
        Self {
            w0: 0.0,
            w: Tensor::filled(&[p], 0.001),
            v: init::truncated_normal(rng, &[p, rank], 0.0, 0.001),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.len()
    }

    pub fn rank(&self) -> usize {
        self.v.shape()[1]
    }
}

fn check_input(z: &[f64], params: &FMParams) -> Result<()> {
    if z.len() != params.input_dim() {
        return Err(Error::Shape(format!(
            "fm input has {} entries, expected {}",
            z.len(),
            params.input_dim()
        )));
    }
    Ok(())
}

/// Linear-time forward.
pub fn fm_forward(z: &[f64], params: &FMParams) -> Result<f64> {
    check_input(z, params)?;
    let (y, _) = crate::nn::fm_kernel(z, params.w0, params.w.data(), params.v.data(), params.rank());
    Ok(y)
}

/// Literal double loop over all pairs `i < j`.
pub fn fm_forward_bruteforce(z: &[f64], params: &FMParams) -> Result<f64> {
    check_input(z, params)?;
    let k = params.rank();
    let v = params.v.data();
    let mut y = params.w0;
    for (i, zi) in z.iter().enumerate() {
        y += params.w.data()[i] * zi;
    }
    for i in 0..z.len() {
        for j in i + 1..z.len() {
            let dot: f64 = (0..k).map(|f| v[i * k + f] * v[j * k + f]).sum();
            y += dot * z[i] * z[j];
        }
    }
    Ok(y)
}

/// Handles to an FM's parameters inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FmLayer {
    pub w0: ParamId,
    pub w: ParamId,
    pub v: ParamId,
}

impl FmLayer {
    pub fn register(store: &mut ParamStore, prefix: &str, params: FMParams) -> Self {
        Self {
            w0: store.add(format!("{prefix}.w0"), Tensor::scalar(params.w0)),
            w: store.add(format!("{prefix}.w"), params.w),
            v: store.add(format!("{prefix}.v"), params.v),
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, z: NodeId) -> Result<NodeId> {
        let (w0, w, v) = (tape.param(self.w0), tape.param(self.w), tape.param(self.v));
        tape.fm(z, w0, w, v)
    }

    pub fn params(&self, store: &ParamStore) -> FMParams {
        FMParams {
            w0: store.value(self.w0).item(),
            w: store.value(self.w).clone(),
            v: store.value(self.v).clone(),
        }
    }

    pub fn ids(&self) -> [ParamId; 3] {
        [self.w0, self.w, self.v]
    }

    pub fn input_dim(&self, store: &ParamStore) -> usize {
        store.value(self.w).len()
    }

    pub fn describe(&self, store: &ParamStore) -> String {
        format!("fm(p={}, k={})", self.input_dim(store), store.value(self.v).shape()[1])
    }
}
