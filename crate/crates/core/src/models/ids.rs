use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

/// Dense row index over a set of string ids, sorted for determinism.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdIndex {
    ids: Vec<String>,
    rows: BTreeMap<String, usize>,
}

impl IdIndex {
    pub fn from_ids<'a, I: IntoIterator<Item = &'a str>>(ids: I) -> Self {
        let set: BTreeSet<&str> = ids.into_iter().collect();
        Self::from_ordered(set.into_iter().map(String::from).collect())
    }

    /// Keeps the given order; duplicates keep their first row.
    pub fn from_ordered(ids: Vec<String>) -> Self {
        let mut rows = BTreeMap::new();
        for (i, id) in ids.iter().enumerate() {
            rows.entry(id.clone()).or_insert(i);
        }
        Self { ids, rows }
    }

    pub fn row(&self, id: &str) -> Option<usize> {
        self.rows.get(id).copied()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}
