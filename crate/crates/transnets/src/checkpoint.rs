//! Binary checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "TNSN"  u32 version  [u8; 32] sha256 of the config JSON
//! str config JSON
//! u64 n, n x str                      vocabulary tokens in id order
//! tensor                              embedding table
//! u64 n, n x str                      user ids (empty for id-free models)
//! u64 n, n x str                      item ids
//! u64 n, n x (str name, tensor)       parameters
//! u64 n, n x group                    optimizer states
//! f64 best validation MSE, f64 test MSE at best, u64 batch
//! ```
//!
//! `str` is a u64 byte length followed by UTF-8, `tensor` is a u32 rank,
//! rank x u64 dims and the f64 values. A group is its name, u64 step,
//! three f64 Adam constants and u64 n x (str param, tensor m, tensor v).

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use transnets_core::corpus::Vocabulary;
use transnets_core::embeddings::EmbeddingTable;
use transnets_core::models::{IdIndex, Model};
use transnets_core::nn::{AdamConfig, AdamState, ParamStore, Tensor};
use transnets_core::training::{Checkpoint, Optimizers, TrainConfig};

use crate::error::{Error, ErrorCode, Result};

pub const MAGIC: &[u8; 4] = b"TNSN";
pub const VERSION: u32 = 1;

pub type ConfigDigest = [u8; 32];

/// Canonical JSON form of a training configuration.
pub fn config_json(config: &TrainConfig) -> String {
    serde_json::to_string(config).expect("config serializes")
}

pub fn config_digest(config: &TrainConfig) -> ConfigDigest {
    Sha256::digest(config_json(config).as_bytes()).into()
}

pub fn digest_hex(d: &ConfigDigest) -> String {
    d.iter().map(|b| format!("{b:02x}")).collect()
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn len(&mut self, n: usize) {
        self.u64(n as u64);
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.len(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }

    fn strs(&mut self, items: &[String]) {
        self.len(items.len());
        for s in items {
            self.str(s);
        }
    }

    fn tensor(&mut self, t: &Tensor) {
        self.u32(t.shape().len() as u32);
        for &d in t.shape() {
            self.len(d);
        }
        for &x in t.data() {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::new(ErrorCode::Checkpoint, msg)
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    /// A count of items each at least `min_bytes` long; rejects counts the
    /// remaining input cannot hold before anything is allocated.
    fn len(&mut self, min_bytes: usize) -> Result<usize> {
        let n = self.u64()?;
        let left = (self.buf.len() - self.pos) as u64;
        if n.saturating_mul(min_bytes.max(1) as u64) > left {
            return Err(corrupt(format!("length {n} exceeds the remaining {left} bytes")));
        }
        Ok(n as usize)
    }

    fn str(&mut self) -> Result<String> {
        let n = self.len(1)?;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| corrupt("string is not UTF-8"))
    }

    fn strs(&mut self) -> Result<Vec<String>> {
        let n = self.len(8)?;
        (0..n).map(|_| self.str()).collect()
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(corrupt(format!("tensor rank {rank}")));
        }
        let shape = (0..rank)
            .map(|_| Ok(self.u64()? as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .ok_or_else(|| corrupt("tensor size overflows"))?;
        if count.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(corrupt(format!("truncated tensor of {count} values")));
        }
        let data = (0..count).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        Tensor::new(shape, data).map_err(|e| corrupt(e.to_string()))
    }

    fn done(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(corrupt(format!("{} trailing bytes", self.buf.len() - self.pos)))
        }
    }
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let json = config_json(&ck.config);
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.0.extend_from_slice(&Sha256::digest(json.as_bytes()));
    w.str(&json);
    w.strs(ck.vocab.tokens());
    w.tensor(ck.table.matrix());
    let (users, items) = ck
        .model
        .id_spaces()
        .map_or((&[][..], &[][..]), |(u, i)| (u.ids(), i.ids()));
    w.strs(users);
    w.strs(items);
    w.len(ck.model.store.len());
    for (_, p) in ck.model.store.iter() {
        w.str(&p.name);
        w.tensor(&p.value);
    }
    w.len(ck.optimizers.groups.len());
    for (name, state) in &ck.optimizers.groups {
        w.str(name);
        w.u64(state.step);
        w.f64(state.config.beta1);
        w.f64(state.config.beta2);
        w.f64(state.config.eps);
        w.len(state.params.len());
        for (k, id) in state.params.iter().enumerate() {
            w.str(&ck.model.store.get(*id).name);
            w.tensor(&state.m[k]);
            w.tensor(&state.v[k]);
        }
    }
    w.f64(ck.best_val_mse);
    w.f64(ck.test_mse_at_best);
    w.u64(ck.batch as u64);
    w.0
}

/// Reads only the header, returning the stored config digest.
pub fn peek_digest(bytes: &[u8]) -> Result<ConfigDigest> {
    let mut r = Reader { buf: bytes, pos: 0 };
    read_header(&mut r)
}

fn read_header(r: &mut Reader<'_>) -> Result<ConfigDigest> {
    if r.take(4).map_err(|_| corrupt("file too short for a header"))? != MAGIC {
        return Err(corrupt("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(corrupt(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }
    r.array()
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let digest = read_header(&mut r)?;
    let json = r.str()?;
    let actual: ConfigDigest = Sha256::digest(json.as_bytes()).into();
    if actual != digest {
        return Err(corrupt("config digest does not match the stored config"));
    }
    let config: TrainConfig = serde_json::from_str(&json).map_err(|e| corrupt(format!("config: {e}")))?;
    let vocab = Vocabulary::from_tokens(r.strs()?).map_err(|e| corrupt(e.to_string()))?;
    let table = EmbeddingTable::from_matrix(r.tensor()?).map_err(|e| corrupt(e.to_string()))?;
    let users = IdIndex::from_ordered(r.strs()?);
    let items = IdIndex::from_ordered(r.strs()?);
    let mut store = ParamStore::new();
    for _ in 0..r.len(13)? {
        let name = r.str()?;
        if store.find(&name).is_some() {
            return Err(corrupt(format!("duplicate parameter {name}")));
        }
        store.add(name, r.tensor()?);
    }
    let model = Model::from_store(config.model, config.dims, store, users, items, config.seed)
        .map_err(|e| corrupt(e.to_string()))?;
    let mut groups = Vec::new();
    for _ in 0..r.len(40)? {
        let name = r.str()?;
        let step = r.u64()?;
        let adam = AdamConfig {
            beta1: r.f64()?,
            beta2: r.f64()?,
            eps: r.f64()?,
        };
        let n = r.len(12)?;
        let mut state = AdamState {
            params: Vec::with_capacity(n),
            m: Vec::with_capacity(n),
            v: Vec::with_capacity(n),
            step,
            config: adam,
        };
        for _ in 0..n {
            let pname = r.str()?;
            let id = model
                .store
                .find(&pname)
                .ok_or_else(|| corrupt(format!("optimizer group {name} names unknown parameter {pname}")))?;
            let (m, v) = (r.tensor()?, r.tensor()?);
            let shape = model.store.value(id).shape();
            if m.shape() != shape || v.shape() != shape {
                return Err(corrupt(format!("optimizer moments for {pname} have the wrong shape")));
            }
            state.params.push(id);
            state.m.push(m);
            state.v.push(v);
        }
        groups.push((name, state));
    }
    let best_val_mse = r.f64()?;
    let test_mse_at_best = r.f64()?;
    let batch = r.u64()? as usize;
    r.done()?;
    Ok(Checkpoint {
        config,
        model,
        optimizers: Optimizers { groups },
        vocab,
        table,
        best_val_mse,
        test_mse_at_best,
        batch,
    })
}

/// Writes through a temporary sibling file and renames it into place.
pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode(ck)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| Error::new(e.code, format!("{}: {}", path.display(), e.message)))
}
