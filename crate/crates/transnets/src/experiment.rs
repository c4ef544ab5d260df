//! Experiment configuration: training settings plus where data, outputs
//! and embeddings live.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use transnets_core::training::TrainConfig;

use crate::dataset::read_file;
use crate::error::{Error, ErrorCode, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// Seeded uniform vectors.
    #[default]
    Random,
    /// `token v1 ... vd` text file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    /// Directory written by `prepare`.
    pub data: PathBuf,
    /// Output directory for the checkpoint, log and reports.
    pub out: PathBuf,
    #[serde(default)]
    pub embeddings: EmbeddingSource,
}

impl ExperimentConfig {
    pub fn new(train: TrainConfig, data: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            train,
            data: data.into(),
            out: out.into(),
            embeddings: EmbeddingSource::Random,
        }
    }

    /// Builds a config from layers of JSON objects applied in order over
    /// `base`. Nested objects merge key by key; later layers win.
    pub fn layered(base: TrainConfig, layers: &[Value]) -> Result<Self> {
        let mut v = serde_json::to_value(&base).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.insert("data".into(), Value::String(String::new()));
            m.insert("out".into(), Value::String(String::new()));
        }
        for layer in layers {
            merge(&mut v, layer);
        }
        serde_json::from_value(v).map_err(|e| Error::new(ErrorCode::Config, e.to_string()))
    }

    pub fn read_layer(path: &Path) -> Result<Value> {
        let v: Value = serde_json::from_str(&read_file(path)?)
            .map_err(|e| Error::new(ErrorCode::Parse, format!("{}: {e}", path.display())))?;
        if !v.is_object() {
            return Err(Error::new(
                ErrorCode::Config,
                format!("{}: expected a JSON object", path.display()),
            ));
        }
        Ok(v)
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_value(Self::read_layer(path)?)
            .map_err(|e| Error::new(ErrorCode::Config, format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// Every problem found before any work starts.
    pub fn problems(&self) -> Vec<String> {
        let mut out = self.train.problems();
        if self.data.as_os_str().is_empty() {
            out.push("data directory is not set".into());
        } else if !self.data.is_dir() {
            out.push(format!("data directory {} does not exist", self.data.display()));
        }
        if self.out.as_os_str().is_empty() {
            out.push("output directory is not set".into());
        }
        if let EmbeddingSource::File(p) = &self.embeddings {
            if !p.is_file() {
                out.push(format!("embedding file {} does not exist", p.display()));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::new(ErrorCode::Config, problems.join("; ")))
        }
    }
}

fn merge(target: &mut Value, layer: &Value) {
    match (target, layer) {
        (Value::Object(t), Value::Object(l)) => {
            for (k, v) in l {
                merge(t.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (t, l) => *t = l.clone(),
    }
}

/// Parses `a..b` (inclusive) or a single depth.
pub fn parse_layers(s: &str) -> Result<Vec<usize>> {
    let bad = || {
        Error::new(
            ErrorCode::Config,
            format!("layers {s:?}: expected N or A..B with 1 <= A <= B"),
        )
    };
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|_| bad());
    let out: Vec<usize> = match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b.trim_start_matches('='))?);
            if a == 0 || a > b {
                return Err(bad());
            }
            (a..=b).collect()
        }
        None => vec![parse(s)?],
    };
    if out.contains(&0) {
        return Err(bad());
    }
    Ok(out)
}

/// Builds a JSON object from `(dotted.key, value)` pairs, skipping `None`.
pub fn flag_layer(pairs: Vec<(&str, Option<Value>)>) -> Value {
    let mut root = Map::new();
    for (key, value) in pairs {
        let Some(value) = value else { continue };
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().expect("non-empty key");
        let mut node = &mut root;
        for p in parts {
            node = node
                .entry(p.to_string())
                .or_insert_with(|| Value::Object(Map::new()))
                .as_object_mut()
                .expect("flag keys nest objects only");
        }
        node.insert(last.to_string(), value);
    }
    Value::Object(root)
}
