//! Strategy parameters, softmax strategies and successor sampling.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AugmentedGraph, WAIT_LOOP_SLOT};

/// Bounds of the log-uniform initialization: each logit is `ln U(lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for InitBounds {
    fn default() -> Self {
        Self { lo: 1e-3, hi: 1.0 }
    }
}

/// Unconstrained logits, one per edge slot of an [`AugmentedGraph`].
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyParams {
    pub logits: Vec<f64>,
    pub seed: u64,
}

impl StrategyParams {
    pub fn init<R: Rng>(graph: &AugmentedGraph, bounds: InitBounds, seed: u64, rng: &mut R) -> Result<Self> {
        if !(bounds.lo > 0.0 && bounds.lo < bounds.hi && bounds.hi.is_finite()) {
            return Err(Error::invalid(format!(
                "log-uniform bounds must satisfy 0 < lo < hi, got ({}, {})",
                bounds.lo, bounds.hi
            )));
        }
        let logits = (0..graph.edge_count())
            .map(|_| rng.gen_range(bounds.lo..bounds.hi).ln())
            .collect();
        Ok(Self { logits, seed })
    }

    /// Seeded initialization on the stream `rng::stream(seed, [])`.
    pub fn init_seeded(graph: &AugmentedGraph, bounds: InitBounds, seed: u64) -> Result<Self> {
        Self::init(graph, bounds, seed, &mut crate::rng::stream(seed, &[]))
    }

    pub fn zeros(graph: &AugmentedGraph) -> Self {
        Self {
            logits: vec![0.0; graph.edge_count()],
            seed: 0,
        }
    }

    pub fn check_shape(&self, graph: &AugmentedGraph) -> Result<()> {
        if self.logits.len() != graph.edge_count() {
            return Err(Error::Mismatch(format!(
                "{} logits for a graph with {} edges",
                self.logits.len(),
                graph.edge_count()
            )));
        }
        Ok(())
    }
}

/// Per-node successor distributions with prefix sums for sampling.
#[derive(Clone, Debug)]
pub struct RfmStrategy {
    probs: Vec<f64>,
    /// For node `n` the entries `prefix[offset(n) + n ..= offset(n + 1) + n]`
    /// hold `0, p_0, p_0 + p_1, ...`.
    prefix: Vec<f64>,
}

impl RfmStrategy {
    /// Softmax of every node's logits, with max-subtraction.
    pub fn from_params(params: &StrategyParams, graph: &AugmentedGraph) -> Result<Self> {
        params.check_shape(graph)?;
        let mut probs = vec![0.0; graph.edge_count()];
        for id in 0..graph.node_count() {
            let r = graph.edge_range(id);
            softmax_into(&params.logits[r.clone()], &mut probs[r]);
        }
        Ok(Self::with_prefix(probs, graph))
    }

    /// Explicit probabilities aligned with the graph's edge slots.
    pub fn from_probs(graph: &AugmentedGraph, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != graph.edge_count() {
            return Err(Error::Mismatch(format!(
                "{} probabilities for a graph with {} edges",
                probs.len(),
                graph.edge_count()
            )));
        }
        for id in 0..graph.node_count() {
            let row = &probs[graph.edge_range(id)];
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::invalid(format!("probabilities of node {id} leave [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("probabilities of node {id} sum to {sum}")));
            }
        }
        Ok(Self::with_prefix(probs, graph))
    }

    fn with_prefix(probs: Vec<f64>, graph: &AugmentedGraph) -> Self {
        let mut prefix = Vec::with_capacity(probs.len() + graph.node_count());
        for id in 0..graph.node_count() {
            let mut acc = 0.0;
            prefix.push(acc);
            for &p in &probs[graph.edge_range(id)] {
                acc += p;
                prefix.push(acc);
            }
        }
        Self { probs, prefix }
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn node_probs(&self, graph: &AugmentedGraph, id: usize) -> &[f64] {
        &self.probs[graph.edge_range(id)]
    }

    #[inline]
    pub fn prefix_sums(&self, graph: &AugmentedGraph, id: usize) -> &[f64] {
        let r = graph.edge_range(id);
        &self.prefix[r.start + id..=r.end + id]
    }

    /// Least successor index `i` with `prefix[i + 1] > r`, by binary search.
    pub fn pick_successor(&self, graph: &AugmentedGraph, id: usize, r: f64) -> usize {
        let prefix = self.prefix_sums(graph, id);
        let q = prefix.len() - 1;
        let i = prefix[1..].partition_point(|&s| s <= r);
        if i < q {
            i
        } else {
            // r landed above a total that rounded below 1
            self.last_positive(graph, id)
        }
    }

    /// Same choice as [`pick_successor`](Self::pick_successor) by linear scan.
    pub fn pick_successor_linear(&self, graph: &AugmentedGraph, id: usize, r: f64) -> usize {
        let mut acc = 0.0;
        for (i, &p) in self.node_probs(graph, id).iter().enumerate() {
            acc += p;
            if acc > r {
                return i;
            }
        }
        self.last_positive(graph, id)
    }

    fn last_positive(&self, graph: &AugmentedGraph, id: usize) -> usize {
        self.node_probs(graph, id)
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(0)
    }

    /// Probability of the self-loop on wait vertex `id`.
    pub fn loop_probability(&self, graph: &AugmentedGraph, id: usize) -> f64 {
        self.node_probs(graph, id)[WAIT_LOOP_SLOT]
    }

    /// Next standard node and the wait on the move, drawn from the strategy.
    pub fn get_random_successor<R: Rng>(
        &self,
        graph: &AugmentedGraph,
        from: usize,
        rng: &mut R,
    ) -> Result<(usize, u64)> {
        if from >= graph.node_count() {
            return Err(Error::NodeOutOfRange(from));
        }
        if !graph.is_standard(from) {
            return Err(Error::WaitVertex(from));
        }
        let r: f64 = rng.gen();
        let slot = self.pick_successor(graph, from, r);
        let next = graph.edges(from)[slot].target;
        if graph.is_standard(next) {
            return Ok((next, 0));
        }
        let p = self.loop_probability(graph, next);
        if p >= 1.0 {
            return Err(Error::invalid(format!("wait vertex {next} never exits")));
        }
        let exit = graph.edges(next)[crate::graph::WAIT_EXIT_SLOT].target;
        // r' in (0, 1]
        let r2 = 1.0 - rng.gen::<f64>();
        Ok((exit, geometric_wait(p, r2)))
    }
}

/// `floor(ln r / ln p)` for `r in (0, 1]`: the number of self-loops taken on
/// a wait vertex whose loop probability is `p`.
pub fn geometric_wait(p: f64, r: f64) -> u64 {
    debug_assert!(r > 0.0 && r <= 1.0 && (0.0..1.0).contains(&p));
    if p <= 0.0 || r >= 1.0 {
        return 0;
    }
    (r.ln() / p.ln()).floor() as u64
}

pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// On-disk strategy: logits keyed by augmented node id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyCheckpoint {
    pub memory_size: usize,
    pub graph_hash: String,
    pub logits: BTreeMap<usize, Vec<f64>>,
}

impl StrategyCheckpoint {
    pub fn from_params(params: &StrategyParams, graph: &AugmentedGraph) -> Self {
        let logits = (0..graph.node_count())
            .map(|id| (id, params.logits[graph.edge_range(id)].to_vec()))
            .collect();
        Self {
            memory_size: graph.memory_size(),
            graph_hash: graph.fingerprint(),
            logits,
        }
    }

    pub fn to_params(&self, graph: &AugmentedGraph) -> Result<StrategyParams> {
        if self.memory_size != graph.memory_size() || self.graph_hash != graph.fingerprint() {
            return Err(Error::Mismatch("checkpoint was written for a different graph".into()));
        }
        let mut logits = Vec::with_capacity(graph.edge_count());
        for id in 0..graph.node_count() {
            let row = self
                .logits
                .get(&id)
                .ok_or_else(|| Error::Mismatch(format!("no logits for node {id}")))?;
            if row.len() != graph.edges(id).len() {
                return Err(Error::Mismatch(format!("node {id} has {} logits", row.len())));
            }
            logits.extend_from_slice(row);
        }
        Ok(StrategyParams { logits, seed: 0 })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        crate::instances::parse_with_path(text)
    }
}
