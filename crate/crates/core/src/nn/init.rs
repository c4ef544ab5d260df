//! Parameter initializers.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Tensor;

/// Normal draws with any sample beyond two standard deviations resampled.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], mean: f64, std: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| loop {
            let z: f64 = StandardNormal.sample(rng);
            if libm::fabs(z) <= 2.0 {
                break mean + std * z;
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], low: f64, high: f64) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(low..=high)).collect();
    Tensor::new(shape.to_vec(), data).expect("length matches shape")
}
