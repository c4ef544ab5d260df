use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::rng::Rng;
use crate::{Error, Result};

use super::ReviewRecord;

pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

/// Row indices of the three partitions, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Train/validation/test partition of a record list. The `*_ids` vectors
/// hold each record's row index in the source list.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<ReviewRecord>,
    pub validation: Vec<ReviewRecord>,
    pub test: Vec<ReviewRecord>,
    pub train_ids: Vec<usize>,
    pub validation_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub seed: u64,
}

fn partition_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let round = |r: f64| libm::floor(n as f64 * r + 0.5) as usize;
    let mut val = round(ratios[1]).max(1);
    let mut test = round(ratios[2]).max(1);
    while val + test > n - 1 {
        if val >= test {
            val -= 1;
        } else {
            test -= 1;
        }
    }
    let train = n - val - test;
    [train, val, test]
}

/// Random partition of `0..n` in the given proportions, deterministic in
/// `seed`. Each part gets at least one row.
pub fn split_indices(n: usize, ratios: [f64; 3], seed: u64) -> Result<SplitIndices> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || libm::fabs(ratios.iter().sum::<f64>() - 1.0) > 1e-9 {
        return Err(Error::BadRatios);
    }
    if n < 3 {
        return Err(Error::TooFewRecords(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let [n_train, n_val, _] = partition_sizes(n, ratios);
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..n_train + n_val].to_vec();
    let mut test = order[n_train + n_val..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices {
        train,
        validation,
        test,
        seed,
    })
}

pub fn split_dataset(records: &[ReviewRecord], ratios: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    let idx = split_indices(records.len(), ratios, seed)?;
    Ok(DatasetSplit::from_indices(records, idx))
}

impl DatasetSplit {
    pub fn from_indices(records: &[ReviewRecord], idx: SplitIndices) -> Self {
        let pick = |ids: &[usize]| ids.iter().map(|&i| records[i].clone()).collect();
        Self {
            train: pick(&idx.train),
            validation: pick(&idx.validation),
            test: pick(&idx.test),
            train_ids: idx.train,
            validation_ids: idx.validation,
            test_ids: idx.test,
            seed: idx.seed,
        }
    }
}
