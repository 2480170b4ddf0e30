//! Exact optimal periodic schedules for tiny instances.
//!
//! Two independent methods: exhaustive enumeration of generating cycles, and
//! a maximum-ratio cycle search in the product of the graph with saturating
//! clock profiles.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::determinizer::eval_schedule;
use crate::error::{Error, Result};
use crate::model::{deaffinize, ServiceSpec};

pub const BRUTE_MAX_NODES: usize = 4;
pub const BRUTE_MAX_K: u64 = 20;
/// Default cap on product-graph vertices.
pub const PRODUCT_MAX_VERTICES: usize = 200_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleCycle {
    pub value: f64,
    /// Base nodes, first equal to last.
    pub nodes: Vec<usize>,
    pub times: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BruteForceResult {
    pub best: Option<OracleCycle>,
    /// The budget ran out before the search space was exhausted.
    pub truncated: bool,
    pub evaluated: u64,
}

impl BruteForceResult {
    pub fn value(&self) -> Option<f64> {
        self.best.as_ref().map(|c| c.value)
    }
}

/// Every generating cycle of at most `max_cycle_len` vertices, waits in
/// `0..=max_wait` on prolongable moves.
pub fn brute_force_optimal_cycle(spec: &ServiceSpec, max_cycle_len: usize, max_wait: u64) -> Result<BruteForceResult> {
    brute_force_with_budget(spec, max_cycle_len, max_wait, u64::MAX)
}

/// As [`brute_force_optimal_cycle`], stopping after `budget` evaluations.
pub fn brute_force_with_budget(
    spec: &ServiceSpec,
    max_cycle_len: usize,
    max_wait: u64,
    budget: u64,
) -> Result<BruteForceResult> {
    if spec.node_count() > BRUTE_MAX_NODES || spec.k_max() > BRUTE_MAX_K {
        return Err(Error::SizeCap(format!(
            "exhaustive search takes at most {BRUTE_MAX_NODES} nodes with k <= {BRUTE_MAX_K}"
        )));
    }
    if max_cycle_len == 0 {
        return Err(Error::invalid("cycle length bound must be at least 1"));
    }
    let mut search = Search {
        spec,
        max_len: max_cycle_len,
        max_wait,
        budget,
        nodes: Vec::with_capacity(max_cycle_len + 1),
        times: Vec::with_capacity(max_cycle_len),
        best: None,
        truncated: false,
        evaluated: 0,
    };
    // Anchoring at the smallest node of the cycle removes most rotations.
    for start in 0..spec.node_count() {
        search.nodes.push(start);
        search.extend();
        search.nodes.pop();
        if search.truncated {
            break;
        }
    }
    Ok(BruteForceResult {
        best: search.best,
        truncated: search.truncated,
        evaluated: search.evaluated,
    })
}

struct Search<'a> {
    spec: &'a ServiceSpec,
    max_len: usize,
    max_wait: u64,
    budget: u64,
    nodes: Vec<usize>,
    times: Vec<u64>,
    best: Option<OracleCycle>,
    truncated: bool,
    evaluated: u64,
}

impl Search<'_> {
    fn extend(&mut self) {
        if self.truncated || self.times.len() == self.max_len {
            return;
        }
        let start = self.nodes[0];
        let from = *self.nodes.last().expect("non-empty walk");
        for to in start..self.spec.node_count() {
            let base = self.spec.time(from, to);
            let waits = if self.spec.is_prolongable(from, to) { self.max_wait } else { 0 };
            for w in 0..=waits {
                self.nodes.push(to);
                self.times.push(base + w);
                if to == start {
                    self.evaluate();
                }
                self.extend();
                self.nodes.pop();
                self.times.pop();
                if self.truncated {
                    return;
                }
            }
        }
    }

    fn evaluate(&mut self) {
        if self.evaluated >= self.budget {
            self.truncated = true;
            return;
        }
        self.evaluated += 1;
        let len = self.times.len();
        let value = eval_schedule(self.spec, &self.nodes, &self.times, 0, len).expect("well-formed cycle");
        if self.best.as_ref().map_or(true, |b| value > b.value) {
            self.best = Some(OracleCycle {
                value,
                nodes: self.nodes.clone(),
                times: self.times.clone(),
            });
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductGraphResult {
    pub value: f64,
    pub cycle: OracleCycle,
    pub vertices: usize,
    pub edges: usize,
    pub iterations: usize,
    /// Final width of the ratio bracket.
    pub bracket: f64,
}

struct ProductEdge {
    to: usize,
    weight: f64,
    duration: u64,
}

struct ProductGraph {
    /// (base node, clock profile)
    states: Vec<(usize, Vec<u64>)>,
    adj: Vec<Vec<ProductEdge>>,
}

fn build_product(spec: &ServiceSpec, wait_cap: u64, max_vertices: usize) -> Result<ProductGraph> {
    let q = deaffinize(spec).base;
    let n = spec.node_count();
    let ks: Vec<u64> = spec.payoffs.iter().map(|p| p.k).collect();
    let mut index: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    let mut states = Vec::new();
    let mut queue = VecDeque::new();
    for v in 0..n {
        let s = (v, ks.clone());
        index.insert(s.clone(), states.len());
        queue.push_back(states.len());
        states.push(s);
    }
    let mut adj: Vec<Vec<ProductEdge>> = Vec::new();
    while let Some(id) = queue.pop_front() {
        let (v, f) = states[id].clone();
        let mut out = Vec::new();
        for u in 0..n {
            let waits = if spec.is_prolongable(v, u) { wait_cap } else { 0 };
            for w in 0..=waits {
                let dur = spec.time(v, u) + w;
                let g: Vec<u64> = (0..n)
                    .map(|s| {
                        let base = if s == v { 0 } else { f[s] };
                        (base + dur).min(ks[s])
                    })
                    .collect();
                let weight = q.payoffs[u].value(g[u]);
                let key = (u, g);
                let to = match index.get(&key) {
                    Some(&t) => t,
                    None => {
                        if states.len() >= max_vertices {
                            return Err(Error::SizeCap(format!(
                                "product graph exceeds {max_vertices} vertices"
                            )));
                        }
                        let t = states.len();
                        index.insert(key.clone(), t);
                        states.push(key);
                        queue.push_back(t);
                        t
                    }
                };
                out.push(ProductEdge { to, weight, duration: dur });
            }
        }
        if adj.len() <= id {
            adj.resize_with(id + 1, Vec::new);
        }
        adj[id] = out;
    }
    adj.resize_with(states.len(), Vec::new);
    Ok(ProductGraph { states, adj })
}

/// Cycle (as edge list `(from, edge index)`) with positive total weight
/// `sum(w - lambda * dur)`, if one exists.
fn positive_cycle(pg: &ProductGraph, lambda: f64) -> Option<Vec<(usize, usize)>> {
    let nv = pg.states.len();
    let mut dist = vec![0.0f64; nv];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nv];
    for _pass in 0..=nv {
        let mut changed = false;
        for v in 0..nv {
            for (ei, e) in pg.adj[v].iter().enumerate() {
                let cand = dist[v] + e.weight - lambda * e.duration as f64;
                if cand > dist[e.to] + 1e-12 * (1.0 + dist[e.to].abs()) {
                    dist[e.to] = cand;
                    parent[e.to] = Some((v, ei));
                    changed = true;
                }
            }
        }
        if !changed {
            return None;
        }
        if let Some(c) = parent_cycle(&parent) {
            return Some(c);
        }
    }
    parent_cycle(&parent)
}

fn parent_cycle(parent: &[Option<(usize, usize)>]) -> Option<Vec<(usize, usize)>> {
    let nv = parent.len();
    // 0 = unseen, 1 = on current path, 2 = done
    let mut color = vec![0u8; nv];
    for s in 0..nv {
        let mut path = Vec::new();
        let mut v = s;
        while color[v] == 0 {
            color[v] = 1;
            path.push(v);
            match parent[v] {
                Some((p, _)) => v = p,
                None => break,
            }
        }
        if color[v] == 1 && parent[v].is_some() {
            // v lies on a cycle of parent pointers
            let mut cycle = Vec::new();
            let mut x = v;
            loop {
                let (p, e) = parent[x].expect("cycle member has a parent");
                cycle.push((p, e));
                x = p;
                if x == v {
                    break;
                }
            }
            cycle.reverse();
            return Some(cycle);
        }
        for p in path {
            color[p] = 2;
        }
    }
    None
}

fn cycle_ratio(pg: &ProductGraph, cycle: &[(usize, usize)]) -> f64 {
    let (w, d) = cycle.iter().fold((0.0, 0u64), |(w, d), &(v, e)| {
        let edge = &pg.adj[v][e];
        (w + edge.weight, d + edge.duration)
    });
    w / d as f64
}

/// Best mean payoff over periodic schedules whose waits are at most
/// `wait_cap`, via binary search on the payoff-per-time ratio.
pub fn product_graph_value(spec: &ServiceSpec, wait_cap: u64) -> Result<ProductGraphResult> {
    product_graph_value_capped(spec, wait_cap, PRODUCT_MAX_VERTICES)
}

pub fn product_graph_value_capped(spec: &ServiceSpec, wait_cap: u64, max_vertices: usize) -> Result<ProductGraphResult> {
    let clock_space = spec
        .payoffs
        .iter()
        .try_fold(spec.node_count() as u64, |acc, p| acc.checked_mul(p.k));
    if clock_space.map_or(true, |s| s > 64 * max_vertices as u64) {
        return Err(Error::SizeCap(format!(
            "clock profile space is too large for a product graph of {max_vertices} vertices"
        )));
    }
    let pg = build_product(spec, wait_cap, max_vertices)?;
    let (mut wmin, mut wmax) = (0.0f64, 0.0f64);
    for e in pg.adj.iter().flatten() {
        wmin = wmin.min(e.weight);
        wmax = wmax.max(e.weight);
    }
    let mut best = positive_cycle(&pg, wmin - 1.0).expect("every cycle is positive below the minimum ratio");
    let mut lo = cycle_ratio(&pg, &best);
    let mut hi = wmax;
    let mut iterations = 0;
    while hi - lo >= 1e-10 && iterations < 100 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match positive_cycle(&pg, mid) {
            Some(c) if cycle_ratio(&pg, &c) > mid => {
                lo = cycle_ratio(&pg, &c);
                best = c;
            }
            _ => hi = mid,
        }
    }
    let ratio = cycle_ratio(&pg, &best);
    let shift = spec.compulsory_slope_sum();
    let mut nodes: Vec<usize> = best.iter().map(|&(v, _)| pg.states[v].0).collect();
    nodes.push(nodes[0]);
    let times = best.iter().map(|&(v, e)| pg.adj[v][e].duration).collect();
    Ok(ProductGraphResult {
        value: ratio + shift,
        cycle: OracleCycle {
            value: ratio + shift,
            nodes,
            times,
        },
        vertices: pg.states.len(),
        edges: pg.adj.iter().map(Vec::len).sum(),
        iterations,
        bracket: hi - lo,
    })
}
