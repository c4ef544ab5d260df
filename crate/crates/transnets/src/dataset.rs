//! Prepared dataset directories: canonical records, split manifests,
//! vocabulary and a stats summary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use transnets_core::corpus::{split_indices, tokenize, DatasetSplit, ReviewRecord, SplitIndices, Vocabulary};

use crate::error::{Error, ErrorCode, Result};
use crate::records::{load_reviews, save_records, Format};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const SPLIT_FILE: &str = "split.json";
pub const STATS_FILE: &str = "stats.txt";
pub const PARTITION_FILES: [&str; 3] = ["train.idx", "validation.idx", "test.idx"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub records: usize,
}

/// Records of one dataset with their split and training vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<ReviewRecord>,
    pub split: DatasetSplit,
    pub vocab: Vocabulary,
    pub manifest: SplitManifest,
}

/// Counts in the layout of a dataset statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stats {
    pub users: usize,
    pub items: usize,
    pub reviews: usize,
}

impl Stats {
    pub fn of(records: &[ReviewRecord]) -> Self {
        let users: std::collections::BTreeSet<_> = records.iter().map(|r| r.user_id.as_str()).collect();
        let items: std::collections::BTreeSet<_> = records.iter().map(|r| r.item_id.as_str()).collect();
        Self {
            users: users.len(),
            items: items.len(),
            reviews: records.len(),
        }
    }
}

impl Dataset {
    /// Splits `records` and builds the vocabulary from the training part.
    pub fn build(records: Vec<ReviewRecord>, ratios: [f64; 3], seed: u64, vocab_size: usize) -> Result<Self> {
        let idx = split_indices(records.len(), ratios, seed)?;
        let split = DatasetSplit::from_indices(&records, idx);
        let vocab = Vocabulary::build(split.train.iter().map(|r| tokenize(&r.text)), vocab_size);
        let manifest = SplitManifest {
            seed,
            ratios,
            records: records.len(),
        };
        Ok(Self {
            records,
            split,
            vocab,
            manifest,
        })
    }

    pub fn stats(&self) -> Stats {
        Stats::of(&self.records)
    }

    /// Writes every dataset file into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path, dropped_empty: usize) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_records(&dir.join(RECORDS_FILE), &self.records)?;
        let parts = [&self.split.train_ids, &self.split.validation_ids, &self.split.test_ids];
        for (name, ids) in PARTITION_FILES.iter().zip(parts) {
            write_file(&dir.join(name), &index_lines(ids))?;
        }
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        write_file(&dir.join(SPLIT_FILE), &manifest)?;
        write_file(&dir.join(VOCAB_FILE), &vocab_lines(&self.vocab))?;
        write_file(&dir.join(STATS_FILE), &self.stats_text(dropped_empty))
    }

    fn stats_text(&self, dropped_empty: usize) -> String {
        let s = self.stats();
        let mut out = String::new();
        let _ = writeln!(out, "#Users\t#Items\t#Ratings & Reviews");
        let _ = writeln!(out, "{}\t{}\t{}", s.users, s.items, s.reviews);
        let _ = writeln!(out);
        let _ = writeln!(out, "train\t{}", self.split.train.len());
        let _ = writeln!(out, "validation\t{}", self.split.validation.len());
        let _ = writeln!(out, "test\t{}", self.split.test.len());
        let _ = writeln!(out, "vocabulary\t{}", self.vocab.len());
        let _ = writeln!(out, "dropped_empty\t{dropped_empty}");
        out
    }

    /// Reads a directory written by [`Dataset::write`].
    pub fn load(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::new(
                ErrorCode::Data,
                format!("{}: not a dataset directory", dir.display()),
            ));
        }
        let loaded = load_reviews(&dir.join(RECORDS_FILE), Format::Jsonl)?;
        let records = loaded.records;
        let manifest: SplitManifest = serde_json::from_str(&read_file(&dir.join(SPLIT_FILE))?)
            .map_err(|e| Error::new(ErrorCode::Parse, format!("{}: {e}", dir.join(SPLIT_FILE).display())))?;
        if manifest.records != records.len() {
            return Err(Error::new(
                ErrorCode::Data,
                format!(
                    "split manifest expects {} records, found {}",
                    manifest.records,
                    records.len()
                ),
            ));
        }
        let mut parts = Vec::with_capacity(3);
        for name in PARTITION_FILES {
            parts.push(read_indices(&dir.join(name), records.len())?);
        }
        let test = parts.pop().expect("three partitions");
        let validation = parts.pop().expect("three partitions");
        let train = parts.pop().expect("three partitions");
        let idx = SplitIndices {
            train,
            validation,
            test,
            seed: manifest.seed,
        };
        let split = DatasetSplit::from_indices(&records, idx);
        let vocab = read_vocab(&dir.join(VOCAB_FILE))?;
        Ok(Self {
            records,
            split,
            vocab,
            manifest,
        })
    }
}

fn index_lines(ids: &[usize]) -> String {
    ids.iter().map(|i| format!("{i}\n")).collect()
}

pub fn vocab_lines(vocab: &Vocabulary) -> String {
    vocab.tokens().iter().map(|t| format!("{t}\n")).collect()
}

/// Token on line `k` (1-based) has id `k + 1`.
pub fn parse_vocab(text: &str) -> Result<Vocabulary> {
    let tokens = text.lines().map(str::to_string).collect();
    Ok(Vocabulary::from_tokens(tokens)?)
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    parse_vocab(&read_file(path)?).map_err(|e| Error::new(e.code, format!("{}: {}", path.display(), e.message)))
}

fn read_indices(path: &Path, n: usize) -> Result<Vec<usize>> {
    let text = read_file(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            let i: usize = l.trim().parse().map_err(|_| {
                Error::new(
                    ErrorCode::Parse,
                    format!("{}: line {}: not an index", path.display(), k + 1),
                )
            })?;
            if i >= n {
                return Err(Error::new(
                    ErrorCode::Data,
                    format!(
                        "{}: line {}: index {i} out of range for {n} records",
                        path.display(),
                        k + 1
                    ),
                ));
            }
            Ok(i)
        })
        .collect()
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn dataset_paths(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = [RECORDS_FILE, SPLIT_FILE, VOCAB_FILE, STATS_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    out.extend(PARTITION_FILES.iter().map(|f| dir.join(f)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use transnets_core::corpus::DEFAULT_RATIOS;

    #[test]
    fn vocab_file_round_trip() {
        let v = Vocabulary::build([vec!["b", "a", "b", "c"]], 10);
        let back = parse_vocab(&vocab_lines(&v)).unwrap();
        assert_eq!(back, v);
        for t in v.tokens() {
            assert_eq!(back.id(t), v.id(t));
        }
    }

    #[test]
    fn first_line_is_id_two() {
        let v = parse_vocab("alpha\nbeta\n").unwrap();
        assert_eq!((v.id("alpha"), v.id("beta")), (2, 3));
    }

    #[test]
    fn vocabulary_ignores_heldout_text() {
        let records: Vec<_> = (0..10)
            .map(|i| ReviewRecord::new(format!("u{i}"), "x", 3.0, format!("common word{i}")))
            .collect();
        let d = Dataset::build(records, DEFAULT_RATIOS, 3, 100).unwrap();
        for r in d.split.validation.iter().chain(&d.split.test) {
            let own = r.text.split(' ').nth(1).unwrap();
            assert!(!d.vocab.contains(own), "{own} leaked into the vocabulary");
        }
    }

    #[test]
    fn stats_count_distinct_ids() {
        let r = |u: &str, i: &str| ReviewRecord::new(u, i, 1.0, "t");
        let s = Stats::of(&[r("a", "x"), r("a", "y"), r("b", "x")]);
        assert_eq!(
            s,
            Stats {
                users: 2,
                items: 2,
                reviews: 3
            }
        );
    }
}
