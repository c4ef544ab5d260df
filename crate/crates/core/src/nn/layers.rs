//! Forward kernels shared by the plain layer functions and the tape.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Text convolution pre-activations. `input` is `len x dim` row-major,
/// `filters` is `m x (window * dim)`. Output is `m x (len - window + 1)`.
pub(crate) fn conv_kernel(
    input: &[f64],
    len: usize,
    dim: usize,
    filters: &[f64],
    bias: &[f64],
    window: usize,
) -> Vec<f64> {
    let m = bias.len();
    let width = window * dim;
    let positions = len + 1 - window;
    let mut out = vec![0.0; m * positions];
    for j in 0..m {
        let k = &filters[j * width..(j + 1) * width];
        let row = &mut out[j * positions..(j + 1) * positions];
        for (s, o) in row.iter_mut().enumerate() {
            let win = &input[s * dim..s * dim + width];
            let mut acc = bias[j];
            for (a, b) in win.iter().zip(k) {
                acc += a * b;
            }
            *o = acc;
        }
    }
    out
}

/// Row-wise maximum of an `m x w` matrix; ties resolve to the first index.
pub(crate) fn max_pool_kernel(data: &[f64], m: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let mut out = Vec::with_capacity(m);
    let mut arg = Vec::with_capacity(m);
    for j in 0..m {
        let row = &data[j * w..(j + 1) * w];
        let mut best = 0;
        for (s, v) in row.iter().enumerate().skip(1) {
            if *v > row[best] {
                best = s;
            }
        }
        out.push(row[best]);
        arg.push(best);
    }
    (out, arg)
}

/// `x * W + b` for `x` of length `in`, `W` of shape `in x out`.
pub(crate) fn affine_kernel(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let cols = b.len();
    let mut out = b.to_vec();
    for (i, xi) in x.iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (o, wv) in out.iter_mut().zip(row) {
            *o += xi * wv;
        }
    }
    out
}

/// Factorization machine output and the per-factor sums `s_f = sum_i V_if z_i`.
pub(crate) fn fm_kernel(z: &[f64], w0: f64, w: &[f64], v: &[f64], rank: usize) -> (f64, Vec<f64>) {
    let mut sums = vec![0.0; rank];
    let mut sq = vec![0.0; rank];
    let mut linear = 0.0;
    for (i, zi) in z.iter().enumerate() {
        linear += w[i] * zi;
        let vi = &v[i * rank..(i + 1) * rank];
        for f in 0..rank {
            let t = vi[f] * zi;
            sums[f] += t;
            sq[f] += t * t;
        }
    }
    let pair: f64 = sums.iter().zip(&sq).map(|(s, q)| s * s - q).sum::<f64>() * 0.5;
    (w0 + linear + pair, sums)
}

fn expect_shape(name: &str, t: &Tensor, shape: &[usize]) -> Result<()> {
    if t.shape() == shape {
        Ok(())
    } else {
        Err(Error::Shape(format!("{name}: expected {shape:?}, got {:?}", t.shape())))
    }
}

/// Convolution over a `T x d` embedded text with `m` filters of shape
/// `t x d` (passed as an `m x t x d` tensor), followed by `act`.
pub fn conv_text_forward(input: &Tensor, filters: &Tensor, bias: &Tensor, act: Activation) -> Result<Tensor> {
    let [len, dim] = input.shape() else {
        return Err(Error::Shape(format!("conv input must be 2-d, got {:?}", input.shape())));
    };
    let [m, window, fdim] = filters.shape() else {
        return Err(Error::Shape(format!("filters must be 3-d, got {:?}", filters.shape())));
    };
    if fdim != dim {
        return Err(Error::Shape(format!("filter width {fdim} != embedding width {dim}")));
    }
    expect_shape("conv bias", bias, &[*m])?;
    if len < window {
        return Err(Error::SequenceTooShort {
            len: *len,
            window: *window,
        });
    }
    let mut out = conv_kernel(input.data(), *len, *dim, filters.data(), bias.data(), *window);
    out.iter_mut().for_each(|x| *x = act.apply(*x));
    Tensor::new(vec![*m, len - window + 1], out)
}

/// Max over each row of an `m x positions` feature map.
pub fn max_pool(features: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let [m, w] = features.shape() else {
        return Err(Error::Shape(format!(
            "max_pool input must be 2-d, got {:?}",
            features.shape()
        )));
    };
    if *w == 0 {
        return Err(Error::Empty("max_pool window list"));
    }
    let (out, arg) = max_pool_kernel(features.data(), *m, *w);
    Ok((Tensor::vector(out), arg))
}

/// Fully connected layer `act(W^T o + g)` with `W` of shape `m x n`.
pub fn fc_forward(o: &Tensor, w: &Tensor, g: &Tensor, act: Activation) -> Result<Tensor> {
    let [m, n] = w.shape() else {
        return Err(Error::Shape(format!("fc weight must be 2-d, got {:?}", w.shape())));
    };
    expect_shape("fc input", o, &[*m])?;
    expect_shape("fc bias", g, &[*n])?;
    let mut out = affine_kernel(o.data(), w.data(), g.data());
    out.iter_mut().for_each(|x| *x = act.apply(*x));
    Ok(Tensor::vector(out))
}

/// Absolute error `|r - r_hat|`.
pub fn l1_loss(predicted: f64, target: f64) -> f64 {
    libm::fabs(target - predicted)
}

/// Mean absolute error over a batch.
pub fn l1_loss_mean(pairs: &[(f64, f64)]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    pairs.iter().map(|(p, t)| l1_loss(*p, *t)).sum::<f64>() / pairs.len() as f64
}

/// Squared Euclidean distance.
pub fn l2_loss(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("l2 operands {} vs {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    l2_loss(a, b).map(libm::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init;
    use crate::rng;

    // index loops mirror the definition
    #[allow(clippy::needless_range_loop)]
    fn naive_conv(v: &Tensor, k: &Tensor, b: &Tensor) -> Vec<Vec<f64>> {
        let (len, dim) = (v.shape()[0], v.shape()[1]);
        let (m, t) = (k.shape()[0], k.shape()[1]);
        let mut out = vec![vec![0.0; len - t + 1]; m];
        for j in 0..m {
            for s in 0..=len - t {
                let mut acc = b.data()[j];
                for r in 0..t {
                    for c in 0..dim {
                        acc += v.at2(s + r, c) * k.data()[j * t * dim + r * dim + c];
                    }
                }
                out[j][s] = libm::tanh(acc);
            }
        }
        out
    }

    #[test]
    fn zero_filter_gives_act_of_bias() {
        let v = Tensor::filled(&[6, 4], 0.3);
        let k = Tensor::zeros(&[2, 3, 4]);
        let b = Tensor::vector(vec![0.25, -0.5]);
        let z = conv_text_forward(&v, &k, &b, Activation::Tanh).unwrap();
        assert_eq!(z.shape(), &[2, 4]);
        assert!(z.row(0).iter().all(|x| *x == libm::tanh(0.25)));
        assert!(z.row(1).iter().all(|x| *x == libm::tanh(-0.5)));
    }

    #[test]
    fn feature_count_is_len_minus_window_plus_one() {
        let v = Tensor::zeros(&[10, 2]);
        let z = conv_text_forward(&v, &Tensor::zeros(&[5, 3, 2]), &Tensor::zeros(&[5]), Activation::Tanh).unwrap();
        assert_eq!(z.shape(), &[5, 8]);
    }

    #[test]
    fn matches_naive_double_loop() {
        let mut r = rng::stream(5, "conv");
        for _ in 0..20 {
            let v = init::uniform(&mut r, &[5, 2], -1.0, 1.0);
            let k = init::uniform(&mut r, &[1, 3, 2], -1.0, 1.0);
            let b = init::uniform(&mut r, &[1], -1.0, 1.0);
            let z = conv_text_forward(&v, &k, &b, Activation::Tanh).unwrap();
            let oracle = naive_conv(&v, &k, &b);
            for (s, o) in oracle[0].iter().enumerate() {
                assert!((z.at2(0, s) - o).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn short_sequence_is_an_error() {
        let err = conv_text_forward(
            &Tensor::zeros(&[2, 3]),
            &Tensor::zeros(&[1, 3, 3]),
            &Tensor::zeros(&[1]),
            Activation::Tanh,
        );
        assert_eq!(err.unwrap_err(), Error::SequenceTooShort { len: 2, window: 3 });
    }

    #[test]
    fn max_pool_picks_first_max() {
        let f = Tensor::matrix(2, 3, vec![1.0, 3.0, 2.0, 4.0, 4.0, 4.0]).unwrap();
        let (o, arg) = max_pool(&f).unwrap();
        assert_eq!(o.data(), &[3.0, 4.0]);
        assert_eq!(arg, vec![1, 0]);
    }

    #[test]
    fn fc_zero_weight_and_zero_input() {
        let g = Tensor::vector(vec![0.1, -0.2, 0.3]);
        let o = Tensor::vector(vec![1.0, 2.0]);
        let x = fc_forward(&o, &Tensor::zeros(&[2, 3]), &g, Activation::Tanh).unwrap();
        assert_eq!(x.data(), &[libm::tanh(0.1), libm::tanh(-0.2), libm::tanh(0.3)]);
        let w = Tensor::filled(&[2, 3], 0.7);
        let x = fc_forward(&Tensor::zeros(&[2]), &w, &g, Activation::Tanh).unwrap();
        assert_eq!(x.data(), &[libm::tanh(0.1), libm::tanh(-0.2), libm::tanh(0.3)]);
    }

    #[test]
    fn fc_matches_naive_product() {
        let mut r = rng::stream(6, "fc");
        let o = init::uniform(&mut r, &[4], -1.0, 1.0);
        let w = init::uniform(&mut r, &[4, 3], -1.0, 1.0);
        let g = init::uniform(&mut r, &[3], -1.0, 1.0);
        let x = fc_forward(&o, &w, &g, Activation::Tanh).unwrap();
        for c in 0..3 {
            let mut acc = g.data()[c];
            for i in 0..4 {
                acc += w.at2(i, c) * o.data()[i];
            }
            assert!((x.data()[c] - libm::tanh(acc)).abs() < 1e-15);
        }
        assert!(fc_forward(&Tensor::zeros(&[3]), &w, &g, Activation::Tanh).is_err());
    }

    #[test]
    fn losses() {
        assert_eq!(l1_loss(3.0, 5.0), 2.0);
        assert_eq!(l2_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(l2_loss(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert!(l2_loss(&[1.0], &[1.0, 2.0]).is_err());
        assert_eq!(l1_loss_mean(&[(1.0, 2.0), (3.0, 6.0)]), 2.0);
    }

    #[test]
    fn location_invariance_of_pooled_features() {
        // a non-PAD segment placed at two interior offsets of a zero input
        let (len, dim, t) = (20, 3, 3);
        let mut r = rng::stream(8, "loc");
        let seg = init::uniform(&mut r, &[4, dim], -1.0, 1.0);
        let k = init::uniform(&mut r, &[5, t, dim], -1.0, 1.0);
        let b = init::uniform(&mut r, &[5], -0.5, 0.5);
        let place = |off: usize| {
            let mut v = Tensor::zeros(&[len, dim]);
            for i in 0..4 {
                v.row_mut(off + i).copy_from_slice(seg.row(i));
            }
            let z = conv_text_forward(&v, &k, &b, Activation::Tanh).unwrap();
            max_pool(&z).unwrap().0
        };
        assert_eq!(place(t - 1), place(len - 4 - (t - 1)));
        assert_eq!(place(5), place(9));
    }
}
