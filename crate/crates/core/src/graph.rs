//! Memory-product graph with auxiliary wait vertices.
//!
//! Standard nodes are pairs `(base node, memory state)` with id
//! `node * memory_size + memory`. Every move between standard nodes whose
//! base pair is prolongable is split as `u -> w -> w ... -> v` where `w` is a
//! wait vertex private to that move: the first edge carries the traversal
//! time, the self-loop one unit of waiting and the exit edge length zero.
//! Wait vertex ids follow the standard ones.

use std::ops::Range;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::ServiceSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AugmentedNode {
    Standard { node: usize, memory: usize },
    /// Wait vertex on the move between two standard augmented nodes.
    Wait { from: usize, to: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Successor {
    pub target: usize,
    pub length: u64,
}

/// Position of the exit edge in a wait vertex's successor list.
pub const WAIT_EXIT_SLOT: usize = 0;
/// Position of the self-loop in a wait vertex's successor list.
pub const WAIT_LOOP_SLOT: usize = 1;

#[derive(Clone, Debug)]
pub struct AugmentedGraph {
    nodes: Vec<AugmentedNode>,
    offsets: Vec<usize>,
    edges: Vec<Successor>,
    base_count: usize,
    memory_size: usize,
    max_length: u64,
}

impl AugmentedGraph {
    pub fn build(spec: &ServiceSpec, memory_size: usize) -> Result<Self> {
        if memory_size == 0 {
            return Err(Error::invalid("memory size must be at least 1"));
        }
        let n = spec.node_count();
        let standard = n * memory_size;
        let mut nodes: Vec<AugmentedNode> = (0..standard)
            .map(|id| AugmentedNode::Standard {
                node: id / memory_size,
                memory: id % memory_size,
            })
            .collect();

        // Wait ids are handed out in (source, target) order, so each
        // successor list below is already sorted by target id.
        let mut lists: Vec<Vec<Successor>> = Vec::with_capacity(standard);
        for from in 0..standard {
            let u = from / memory_size;
            let mut direct = Vec::new();
            let mut waits = Vec::new();
            for to in 0..standard {
                let v = to / memory_size;
                let length = spec.time(u, v);
                if spec.is_prolongable(u, v) {
                    let w = nodes.len();
                    nodes.push(AugmentedNode::Wait { from, to });
                    waits.push(Successor { target: w, length });
                } else {
                    direct.push(Successor { target: to, length });
                }
            }
            direct.extend(waits);
            lists.push(direct);
        }

        let mut offsets = Vec::with_capacity(nodes.len() + 1);
        let mut edges = Vec::new();
        offsets.push(0);
        for list in &lists {
            edges.extend_from_slice(list);
            offsets.push(edges.len());
        }
        for (id, node) in nodes.iter().enumerate().skip(standard) {
            let AugmentedNode::Wait { to, .. } = *node else {
                unreachable!()
            };
            edges.push(Successor { target: to, length: 0 });
            edges.push(Successor { target: id, length: 1 });
            offsets.push(edges.len());
        }
        let max_length = edges.iter().map(|e| e.length).max().unwrap_or(0);

        Ok(Self {
            nodes,
            offsets,
            edges,
            base_count: n,
            memory_size,
            max_length,
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn standard_count(&self) -> usize {
        self.base_count * self.memory_size
    }

    #[inline]
    pub fn base_count(&self) -> usize {
        self.base_count
    }

    #[inline]
    pub fn memory_size(&self) -> usize {
        self.memory_size
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Largest edge length in the graph.
    #[inline]
    pub fn max_length(&self) -> u64 {
        self.max_length
    }

    pub fn node(&self, id: usize) -> Result<AugmentedNode> {
        self.nodes.get(id).copied().ok_or(Error::NodeOutOfRange(id))
    }

    #[inline]
    pub fn is_standard(&self, id: usize) -> bool {
        id < self.standard_count()
    }

    #[inline]
    pub fn standard_id(&self, node: usize, memory: usize) -> usize {
        debug_assert!(node < self.base_count && memory < self.memory_size);
        node * self.memory_size + memory
    }

    /// Base node of a standard id, without bounds checks.
    #[inline]
    pub fn base_of(&self, id: usize) -> usize {
        debug_assert!(self.is_standard(id));
        id / self.memory_size
    }

    /// Projects `(v, m)` to `v`; wait vertices have no base node.
    pub fn deaugmentify(&self, id: usize) -> Result<usize> {
        match self.node(id)? {
            AugmentedNode::Standard { node, .. } => Ok(node),
            AugmentedNode::Wait { .. } => Err(Error::WaitVertex(id)),
        }
    }

    /// Successor list of `id`, sorted by target id.
    pub fn successors(&self, id: usize) -> Result<&[Successor]> {
        if id >= self.node_count() {
            return Err(Error::NodeOutOfRange(id));
        }
        Ok(self.edges(id))
    }

    #[inline]
    pub fn edges(&self, id: usize) -> &[Successor] {
        &self.edges[self.edge_range(id)]
    }

    /// Global slot range of `id`'s outgoing edges; parameter and probability
    /// vectors are indexed by these slots.
    #[inline]
    pub fn edge_range(&self, id: usize) -> Range<usize> {
        self.offsets[id]..self.offsets[id + 1]
    }

    #[inline]
    pub fn edge(&self, slot: usize) -> Successor {
        self.edges[slot]
    }

    /// Length of the (unique) edge `from -> to`, if present.
    pub fn edge_between(&self, from: usize, to: usize) -> Option<Successor> {
        let list = self.edges(from);
        list.binary_search_by_key(&to, |s| s.target)
            .ok()
            .map(|i| list[i])
    }

    /// Hex digest of the graph's shape and edge lengths.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.base_count as u64).to_le_bytes());
        h.update((self.memory_size as u64).to_le_bytes());
        for &o in &self.offsets {
            h.update((o as u64).to_le_bytes());
        }
        for e in &self.edges {
            h.update((e.target as u64).to_le_bytes());
            h.update(e.length.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
