//! Named parameter storage shared by the projector and the language model,
//! plus the binding layer that puts parameters onto an autodiff tape.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use sha2::{Digest, Sha256};

use crate::graph::{Graph, NodeId};
use crate::tensor::Matrix;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct ParamId(usize);

pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Matrix>,
    index: BTreeMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            names: Vec::new(),
            values: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, value: Matrix) -> ParamId {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name: {name}"
        );
        let idx = self.values.len();
        self.names.push(name.to_string());
        self.values.push(value);
        self.index.insert(name.to_string(), idx);
        ParamId(idx)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.values.len()).map(ParamId)
    }

    /// Parameters whose name starts with `prefix` (e.g. "lm." or "projector.").
    pub fn ids_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.names
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.starts_with(prefix))
            .map(|(i, _)| ParamId(i))
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|m| m.data.len()).sum()
    }

    /// Content digest over names, shapes, and raw values; detects any drift
    /// in supposedly frozen parameter groups.
    pub fn checksum_of<'a>(&self, ids: impl Iterator<Item = ParamId>) -> String {
        let mut hasher = Sha256::new();
        for id in ids {
            let m = self.value(id);
            hasher.update(self.name(id).as_bytes());
            hasher.update([0u8]);
            hasher.update((m.rows as u64).to_le_bytes());
            hasher.update((m.cols as u64).to_le_bytes());
            for v in &m.data {
                hasher.update(v.to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            for nibble in [b >> 4, b & 0xf] {
                out.push(char::from_digit(nibble as u32, 16).unwrap());
            }
        }
        out
    }

    pub fn checksum(&self) -> String {
        self.checksum_of(self.ids())
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        ParamSet::new()
    }
}

/// A graph under construction plus the parameter bindings made so far.
/// Each parameter becomes exactly one leaf, so reuse (tied embeddings)
/// accumulates gradients into a single node.
pub struct Tape<'p> {
    pub g: Graph,
    params: &'p ParamSet,
    bound: BTreeMap<ParamId, NodeId>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Tape {
            g: Graph::new(),
            params,
            bound: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&node) = self.bound.get(&id) {
            return node;
        }
        let node = self.g.leaf(self.params.value(id).clone());
        self.bound.insert(id, node);
        node
    }

    pub fn input(&mut self, value: Matrix) -> NodeId {
        self.g.leaf(value)
    }

    /// All (parameter, node) bindings, for gradient collection.
    pub fn bindings(&self) -> impl Iterator<Item = (ParamId, NodeId)> + '_ {
        self.bound.iter().map(|(&p, &n)| (p, n))
    }
}
