//! Frozen word embeddings and the lookup that turns a token sequence into
//! a `T x d` matrix.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::corpus::{TokenSequence, Vocabulary, PAD};
use crate::nn::Tensor;
use crate::rng;
use crate::{Error, Result};

pub const DEFAULT_DIM: usize = 64;

/// `(|vocab| + 2) x d` table. Row 0 (PAD) is always zero. Tables are
/// frozen: no training path takes a mutable borrow of one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    matrix: Tensor,
    frozen: bool,
}

impl EmbeddingTable {
    /// Wraps a matrix, zeroing the PAD row.
    pub fn from_matrix(mut matrix: Tensor) -> Result<Self> {
        if matrix.shape().len() != 2 || matrix.rows() < 2 || matrix.shape()[1] == 0 {
            return Err(Error::Shape(format!("embedding matrix {:?}", matrix.shape())));
        }
        matrix.row_mut(PAD as usize).fill(0.0);
        Ok(Self { matrix, frozen: true })
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    pub fn row(&self, id: u32) -> &[f64] {
        self.matrix.row(id as usize)
    }
}

/// Uniform entries in `[-0.5/d, 0.5/d]`, deterministic in `seed`.
pub fn random_embeddings(vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    random_table(vocab.id_count(), dim, seed)
}

fn random_table(rows: usize, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let mut r = rng::stream(seed, "embeddings");
    let half = 0.5 / dim as f64;
    let data = (0..rows * dim).map(|_| r.random_range(-half..=half)).collect();
    EmbeddingTable::from_matrix(Tensor::matrix(rows, dim, data)?)
}

/// Builds a table from externally trained vectors. Tokens of `vocab` that
/// appear in `vectors` take the last vector given for them; all other rows
/// keep their seeded random initialization. Every vector must have `dim`
/// entries.
pub fn from_vectors<'a, I>(vocab: &Vocabulary, dim: usize, seed: u64, vectors: I) -> Result<EmbeddingTable>
where
    I: IntoIterator<Item = (&'a str, Vec<f64>)>,
{
    let mut table = random_table(vocab.id_count(), dim, seed)?;
    for (token, vector) in vectors {
        if vector.len() != dim {
            return Err(Error::Shape(format!(
                "embedding for {token:?} has {} values, expected {dim}",
                vector.len()
            )));
        }
        if vocab.contains(token) {
            let id = vocab.id(token) as usize;
            table.matrix.row_mut(id).copy_from_slice(&vector);
        }
    }
    table.matrix.row_mut(PAD as usize).fill(0.0);
    Ok(table)
}

/// Embedded matrix for `seq`: row `i` is `table[seq[i]]`.
pub fn lookup(table: &EmbeddingTable, seq: &TokenSequence) -> Result<Tensor> {
    let dim = table.dim();
    let mut data = Vec::with_capacity(seq.len() * dim);
    for &id in seq.ids() {
        if id as usize >= table.rows() {
            return Err(Error::TokenOutOfRange { id, rows: table.rows() });
        }
        data.extend_from_slice(table.row(id));
    }
    Tensor::matrix(seq.len(), dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::UNK;
    use alloc::string::String;
    use alloc::vec;
    use rand::Rng;

    fn vocab(n: usize) -> Vocabulary {
        Vocabulary::from_tokens((0..n).map(|i| format!("t{i}")).collect()).unwrap()
    }

    #[test]
    fn random_is_deterministic_with_zero_pad() {
        let v = vocab(3);
        let a = random_embeddings(&v, 4, 7).unwrap();
        let b = random_embeddings(&v, 4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matrix().shape(), &[5, 4]);
        assert!(a.row(PAD).iter().all(|x| *x == 0.0));
        assert!(a.matrix().max_abs() <= 0.125);
        assert!(a.is_frozen());
    }

    #[test]
    fn file_vectors_last_occurrence_wins() {
        let v = Vocabulary::from_tokens(vec![String::from("good"), String::from("bad")]).unwrap();
        let rows = vec![
            ("good", vec![1.0, 2.0]),
            ("zzz", vec![9.0, 9.0]),
            ("good", vec![3.0, 4.0]),
        ];
        let t = from_vectors(&v, 2, 1, rows).unwrap();
        assert_eq!(t.row(v.id("good")), &[3.0, 4.0]);
        let random = random_embeddings(&v, 2, 1).unwrap();
        assert_eq!(t.row(v.id("bad")), random.row(v.id("bad")));
    }

    #[test]
    fn empty_file_is_all_random() {
        let v = vocab(4);
        let t = from_vectors(&v, 3, 2, Vec::<(&str, Vec<f64>)>::new()).unwrap();
        assert_eq!(t, random_embeddings(&v, 3, 2).unwrap());
    }

    #[test]
    fn inconsistent_dimension_is_an_error() {
        let v = vocab(2);
        assert!(from_vectors(&v, 2, 0, vec![("t0", vec![1.0, 2.0, 3.0])]).is_err());
    }

    #[test]
    fn lookup_gathers_rows() {
        let v = vocab(6);
        let t = random_embeddings(&v, 4, 3).unwrap();
        assert!(lookup(&t, &TokenSequence::padding(5))
            .unwrap()
            .data()
            .iter()
            .all(|x| *x == 0.0));
        let unk = lookup(&t, &TokenSequence::new(vec![UNK, UNK])).unwrap();
        assert_eq!(unk.row(0), unk.row(1));
        let mut r = rng::stream(1, "seq");
        let ids: Vec<u32> = (0..20).map(|_| r.random_range(0..8)).collect();
        let m = lookup(&t, &TokenSequence::new(ids.clone())).unwrap();
        for (i, id) in ids.iter().enumerate() {
            assert_eq!(m.row(i), t.row(*id));
        }
        assert_eq!(
            lookup(&t, &TokenSequence::new(vec![8])).unwrap_err(),
            Error::TokenOutOfRange { id: 8, rows: 8 }
        );
    }
}
