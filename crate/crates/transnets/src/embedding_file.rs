//! Text embedding files: one `token v1 ... vd` row per line.

use std::path::Path;

use transnets_core::corpus::Vocabulary;
use transnets_core::embeddings::{from_vectors, EmbeddingTable};

use crate::dataset::read_file;
use crate::error::{Error, ErrorCode, Result};

pub type Rows = Vec<(String, Vec<f64>)>;

/// Parsed rows in file order and their common width. Every row must have
/// the same width.
pub fn parse_vectors(text: &str, source: &str) -> Result<(Option<usize>, Rows)> {
    let mut dim = None;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::new(ErrorCode::Parse, format!("{source}: line {}: {e}", n + 1)))?;
        match dim {
            None if values.is_empty() => {
                return Err(Error::new(
                    ErrorCode::Parse,
                    format!("{source}: line {}: no values", n + 1),
                ))
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::new(
                    ErrorCode::Parse,
                    format!(
                        "{source}: line {}: {} values, earlier rows have {d}",
                        n + 1,
                        values.len()
                    ),
                ))
            }
            Some(_) => {}
        }
        rows.push((token.to_string(), values));
    }
    Ok((dim, rows))
}

/// Table of width `dim` with file vectors for the tokens of `vocab`; the
/// last row wins for repeated tokens and missing tokens stay random.
pub fn load_embeddings(path: &Path, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let source = path.display().to_string();
    let (file_dim, rows) = parse_vectors(&read_file(path)?, &source)?;
    if let Some(d) = file_dim.filter(|&d| d != dim) {
        return Err(Error::new(
            ErrorCode::Config,
            format!("{source}: vectors have {d} values but embed_dim is {dim}"),
        ));
    }
    Ok(from_vectors(
        vocab,
        dim,
        seed,
        rows.iter().map(|(t, v)| (t.as_str(), v.clone())),
    )?)
}
