//! Exact value of an RFM strategy.
//!
//! The strategy induces a Markov chain on the augmented graph. Each bottom
//! strongly connected component `B` is an ergodic RFM schedule whose mean
//! payoff is
//!
//! ```text
//! mp(B) = sum over standard u in B of I(u) * S(u) + sum_{v in C} c_v
//! ```
//!
//! computed on de-affinized (eventually constant) payoffs `Q`. `I(u)` is the
//! visit rate per time unit from the invariant distribution and `S(u)` the
//! expected payoff collected at the next visit of `u`'s base node, obtained
//! from a time-expanded first-passage sweep truncated at `k_u - 1`.

use crate::error::{Error, Result};
use crate::graph::AugmentedGraph;
use crate::linalg::Lu;
use crate::model::{deaffinize, PayoffFunction, ServiceSpec};
use crate::strategy::RfmStrategy;

/// Ticks between stored sweep states; the reverse sweep replays one
/// segment at a time from these.
pub(crate) const SEGMENT: u64 = 512;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    /// Edges with probability `<= prob_threshold` are ignored when
    /// decomposing the chain.
    pub prob_threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { prob_threshold: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BsccDecomposition {
    /// Components with sorted members, ordered by smallest member.
    pub sccs: Vec<Vec<usize>>,
    pub bottom: Vec<bool>,
}

impl BsccDecomposition {
    pub fn bottoms(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.sccs
            .iter()
            .zip(&self.bottom)
            .filter(|(_, &b)| b)
            .map(|(s, _)| s)
    }
}

/// Tarjan's algorithm on the edges with probability above the threshold.
pub fn bscc_decompose(strategy: &RfmStrategy, graph: &AugmentedGraph, threshold: f64) -> BsccDecomposition {
    let n = graph.node_count();
    let probs = strategy.probs();
    let live = |slot: usize| probs[slot] > threshold;

    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp_of = vec![UNSEEN; n];
    let mut sccs: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;
    // (node, next slot to examine)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, graph.edge_range(root).start));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut slot)) = call.last_mut() {
            let end = graph.edge_range(v).end;
            let mut descended = false;
            while *slot < end {
                let s = *slot;
                *slot += 1;
                if !live(s) {
                    continue;
                }
                let w = graph.edge(s).target;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, graph.edge_range(w).start));
                    descended = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if descended {
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp_of[w] = sccs.len();
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                sccs.push(comp);
            }
        }
    }

    let mut bottom = vec![true; sccs.len()];
    for v in 0..n {
        for s in graph.edge_range(v) {
            if live(s) && comp_of[graph.edge(s).target] != comp_of[v] {
                bottom[comp_of[v]] = false;
            }
        }
    }
    let mut paired: Vec<(Vec<usize>, bool)> = sccs
        .into_iter()
        .zip(bottom)
        .map(|(mut c, b)| {
            c.sort_unstable();
            (c, b)
        })
        .collect();
    paired.sort_by_key(|(c, _)| c[0]);
    let (sccs, bottom) = paired.into_iter().unzip();
    BsccDecomposition { sccs, bottom }
}

/// Invariant distribution of the chain restricted to a bottom component.
#[derive(Clone, Debug)]
pub struct Stationary {
    pub nodes: Vec<usize>,
    pub x: Vec<f64>,
    /// `max_j |(x^T P - x^T)_j|`.
    pub residual: f64,
    pub(crate) lu: Lu,
    pub(crate) local: Vec<usize>,
}

const NOT_IN_B: usize = usize::MAX;

/// Solves `X_u = sum_v X_v * sigma(v)(u)` with `sum X = 1` by dense LU, the
/// first stationarity row replaced by the normalization row.
pub fn invariant_distribution(strategy: &RfmStrategy, graph: &AugmentedGraph, nodes: &[usize]) -> Result<Stationary> {
    let m = nodes.len();
    if m == 0 {
        return Err(Error::invalid("empty component"));
    }
    let mut local = vec![NOT_IN_B; graph.node_count()];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = i;
    }
    let probs = strategy.probs();
    let mut a = vec![0.0; m * m];
    for j in 1..m {
        a[j * m + j] = -1.0;
    }
    a[..m].iter_mut().for_each(|x| *x = 1.0);
    for (i, &v) in nodes.iter().enumerate() {
        for s in graph.edge_range(v) {
            let p = probs[s];
            if p == 0.0 {
                continue;
            }
            let j = local[graph.edge(s).target];
            if j == NOT_IN_B {
                return Err(Error::invalid(format!("component is not bottom: node {v} leaves it")));
            }
            if j != 0 {
                a[j * m + i] += p;
            }
        }
    }
    let lu = Lu::factor(a.clone(), m)?;
    let mut rhs = vec![0.0; m];
    rhs[0] = 1.0;
    let mut x = lu.solve(&rhs);
    let mut residual = stationarity_residual(strategy, graph, nodes, &local, &x);
    if residual > 1e-10 {
        // one step of iterative refinement
        let r: Vec<f64> = (0..m)
            .map(|j| rhs[j] - (0..m).map(|i| a[j * m + i] * x[i]).sum::<f64>())
            .collect();
        let d = lu.solve(&r);
        x.iter_mut().zip(d).for_each(|(xi, di)| *xi += di);
        residual = stationarity_residual(strategy, graph, nodes, &local, &x);
    }
    Ok(Stationary {
        nodes: nodes.to_vec(),
        x,
        residual,
        lu,
        local,
    })
}

fn stationarity_residual(
    strategy: &RfmStrategy,
    graph: &AugmentedGraph,
    nodes: &[usize],
    local: &[usize],
    x: &[f64],
) -> f64 {
    let mut y: Vec<f64> = x.iter().map(|v| -v).collect();
    for (i, &v) in nodes.iter().enumerate() {
        for s in graph.edge_range(v) {
            let j = local[graph.edge(s).target];
            if j != NOT_IN_B {
                y[j] += x[i] * strategy.probs()[s];
            }
        }
    }
    y.iter().fold(0.0f64, |m, r| m.max(r.abs()))
}

#[derive(Clone, Debug)]
pub struct Rates {
    /// `h` on every edge slot of the graph (zero outside the component).
    pub edge_flow: Vec<f64>,
    /// Mean edge-traverse time `T`.
    pub mean_time: f64,
    /// `I(u) = x_u / T`, aligned with the component's nodes.
    pub rates: Vec<f64>,
}

pub fn visit_rates(x: &[f64], strategy: &RfmStrategy, graph: &AugmentedGraph, nodes: &[usize]) -> Result<Rates> {
    let mut edge_flow = vec![0.0; graph.edge_count()];
    let mut mean_time = 0.0;
    for (i, &v) in nodes.iter().enumerate() {
        let mut out = 0.0;
        for s in graph.edge_range(v) {
            let h = x[i] * strategy.probs()[s];
            edge_flow[s] = h;
            out += strategy.probs()[s] * graph.edge(s).length as f64;
        }
        mean_time += x[i] * out;
    }
    if !(mean_time > 0.0) {
        return Err(Error::invalid("mean edge-traverse time is not positive"));
    }
    let rates = x.iter().map(|xi| xi / mean_time).collect();
    Ok(Rates {
        edge_flow,
        mean_time,
        rates,
    })
}

/// First-return-time distribution of a standard node to its base node.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstPassage {
    pub source: usize,
    pub horizon: u64,
    /// `probs[t]` for `t = 0..=horizon`; `probs[0]` is always zero.
    pub probs: Vec<f64>,
    /// `1 - sum(probs)`, clamped at zero.
    pub tail: f64,
    /// Mass the sweep pushed beyond the horizon (absorbed or not).
    pub overflow: f64,
}

impl FirstPassage {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

pub(crate) struct PassageRun {
    pub(crate) probs: Vec<f64>,
    pub(crate) overflow: f64,
    pub(crate) snapshots: Vec<Vec<f64>>,
}

/// Time-expanded forward sweep state.
pub(crate) struct Sweep<'a> {
    probs: &'a [f64],
    graph: &'a AugmentedGraph,
    target: usize,
    horizon: u64,
    depth: usize,
    n: usize,
}

impl<'a> Sweep<'a> {
    pub(crate) fn new(strategy: &'a RfmStrategy, graph: &'a AugmentedGraph, target: usize, horizon: u64) -> Self {
        Self {
            probs: strategy.probs(),
            graph,
            target,
            horizon,
            depth: graph.max_length() as usize + 1,
            n: graph.node_count(),
        }
    }

    #[inline]
    fn is_target(&self, y: usize) -> bool {
        self.graph.is_standard(y) && self.graph.base_of(y) == self.target
    }

    #[inline]
    fn row(&self, t: u64) -> usize {
        (t % self.depth as u64) as usize * self.n
    }

    /// Propagates the mass sitting at tick `t`. Wait vertices go first so
    /// that zero-length exits land on standard nodes within the same tick.
    /// The tick's row is left in place for the caller to read and clear.
    fn tick(&self, t: u64, ring: &mut [f64], absorbed: &mut [f64], overflow: &mut f64) {
        let std = self.graph.standard_count();
        let row = self.row(t);
        let mut spread = |v: usize, ring: &mut [f64]| {
            let mass = ring[row + v];
            if mass == 0.0 {
                return;
            }
            for s in self.graph.edge_range(v) {
                let p = self.probs[s];
                if p == 0.0 {
                    continue;
                }
                let e = self.graph.edge(s);
                let at = t + e.length;
                let m = mass * p;
                if at > self.horizon {
                    *overflow += m;
                } else if self.is_target(e.target) {
                    absorbed[at as usize] += m;
                } else {
                    ring[self.row(at) + e.target] += m;
                }
            }
        };
        for w in std..self.n {
            spread(w, ring);
        }
        for u in 0..std {
            if t > 0 && self.is_target(u) {
                continue;
            }
            spread(u, ring);
        }
    }

    pub(crate) fn forward(&self, source: usize, keep_snapshots: bool) -> PassageRun {
        let mut ring = vec![0.0; self.depth * self.n];
        let mut absorbed = vec![0.0; self.horizon as usize + 1];
        let mut overflow = 0.0;
        let mut snapshots = Vec::new();
        ring[source] = 1.0;
        for t in 0..=self.horizon {
            if keep_snapshots && t % SEGMENT == 0 {
                snapshots.push(ring.clone());
            }
            self.tick(t, &mut ring, &mut absorbed, &mut overflow);
            let r = self.row(t);
            ring[r..r + self.n].iter_mut().for_each(|x| *x = 0.0);
        }
        // mass still queued was scheduled inside the horizon but never
        // propagated; there is none once the last tick has run
        PassageRun {
            probs: absorbed,
            overflow,
            snapshots,
        }
    }

    /// Re-runs ticks `t0..=t1` from the stored state, returning the mass
    /// processed at every node in each tick.
    fn replay(&self, snapshot: &[f64], t0: u64, t1: u64) -> Vec<f64> {
        let mut ring = snapshot.to_vec();
        let mut scratch = vec![0.0; self.horizon as usize + 1];
        let mut sink = 0.0;
        let mut hist = vec![0.0; (t1 - t0 + 1) as usize * self.n];
        for t in t0..=t1 {
            self.tick(t, &mut ring, &mut scratch, &mut sink);
            let r = self.row(t);
            let h = (t - t0) as usize * self.n;
            hist[h..h + self.n].copy_from_slice(&ring[r..r + self.n]);
            ring[r..r + self.n].iter_mut().for_each(|x| *x = 0.0);
        }
        hist
    }

    /// Accumulates `d loss / d probs` into `grad` given the loss gradient
    /// with respect to the absorbed masses `run.probs`.
    pub(crate) fn adjoint(&self, run: &PassageRun, d_absorbed: &[f64], grad: &mut [f64]) {
        let std = self.graph.standard_count();
        let mut adj = vec![0.0; self.depth * self.n];
        let segments = run.snapshots.len() as u64;
        for k in (0..segments).rev() {
            let t0 = k * SEGMENT;
            let t1 = (t0 + SEGMENT - 1).min(self.horizon);
            let hist = self.replay(&run.snapshots[k as usize], t0, t1);
            for t in (t0..=t1).rev() {
                let row = self.row(t);
                let h = (t - t0) as usize * self.n;
                let mut visit = |v: usize, adj: &mut [f64]| {
                    let mass = hist[h + v];
                    let mut acc = 0.0;
                    for s in self.graph.edge_range(v) {
                        let e = self.graph.edge(s);
                        let at = t + e.length;
                        let a = if at > self.horizon {
                            0.0
                        } else if self.is_target(e.target) {
                            d_absorbed[at as usize]
                        } else {
                            adj[self.row(at) + e.target]
                        };
                        acc += self.probs[s] * a;
                        if mass != 0.0 {
                            grad[s] += mass * a;
                        }
                    }
                    adj[row + v] = acc;
                };
                for u in 0..std {
                    if t > 0 && self.is_target(u) {
                        adj[row + u] = 0.0;
                        continue;
                    }
                    visit(u, &mut adj);
                }
                for w in std..self.n {
                    visit(w, &mut adj);
                }
            }
        }
    }
}

/// Distribution of the first time after which the chain started at the
/// standard node `source` stands on any augmented copy of its base node.
pub fn first_passage_distribution(
    strategy: &RfmStrategy,
    graph: &AugmentedGraph,
    source: usize,
    horizon: u64,
) -> Result<FirstPassage> {
    if horizon == 0 {
        return Err(Error::invalid("first-passage horizon must be at least 1"));
    }
    if source >= graph.node_count() {
        return Err(Error::NodeOutOfRange(source));
    }
    if !graph.is_standard(source) {
        return Err(Error::WaitVertex(source));
    }
    let sweep = Sweep::new(strategy, graph, graph.base_of(source), horizon);
    let run = sweep.forward(source, false);
    Ok(passage_from_run(source, horizon, &run))
}

fn passage_from_run(source: usize, horizon: u64, run: &PassageRun) -> FirstPassage {
    let total: f64 = run.probs.iter().sum();
    FirstPassage {
        source,
        horizon,
        tail: (1.0 - total).max(0.0),
        probs: run.probs.clone(),
        overflow: run.overflow,
    }
}

/// `S(u) = sum_{t < k} P[u ->_t u] Q(t) + tail * Q(k)` for an eventually
/// constant `Q`.
pub fn node_return_payoff(fp: &FirstPassage, q: &PayoffFunction) -> f64 {
    debug_assert!(q.is_eventually_constant());
    let mut s = fp.tail * q.d;
    for (t, &p) in fp.probs.iter().enumerate().skip(1) {
        if p != 0.0 {
            s += p * q.value(t as u64);
        }
    }
    s
}

/// Contribution of one standard node of a component.
#[derive(Clone, Debug)]
pub struct StandardTerm {
    pub node: usize,
    /// Visit rate `I(u)` per time unit.
    pub rate: f64,
    /// Expected return payoff `S(u)` in de-affinized terms.
    pub return_payoff: f64,
    /// First-passage data; `None` when `k_u = 1`.
    pub passage: Option<FirstPassage>,
}

#[derive(Clone, Debug)]
pub struct BsccAnalysis {
    pub nodes: Vec<usize>,
    pub x: Vec<f64>,
    pub residual: f64,
    pub rates: Rates,
    pub terms: Vec<StandardTerm>,
    /// Mean payoff `MP^C(B)`.
    pub mp: f64,
}

#[derive(Clone, Debug)]
pub struct StrategyValue {
    pub value: f64,
    /// Index into `bsccs` of the optimal component (lowest on ties).
    pub best: usize,
    pub bsccs: Vec<BsccAnalysis>,
    pub decomposition: BsccDecomposition,
}

impl StrategyValue {
    pub fn per_bscc(&self) -> Vec<f64> {
        self.bsccs.iter().map(|b| b.mp).collect()
    }
}

/// Records kept for the reverse sweep.
pub(crate) struct BsccRecord {
    pub(crate) stationary: Stationary,
    pub(crate) runs: Vec<Option<PassageRun>>,
}

pub(crate) fn analyze_bscc(
    strategy: &RfmStrategy,
    graph: &AugmentedGraph,
    q: &ServiceSpec,
    shift: f64,
    nodes: &[usize],
    record: bool,
) -> Result<(BsccAnalysis, Option<BsccRecord>)> {
    let stationary = invariant_distribution(strategy, graph, nodes)?;
    let rates = visit_rates(&stationary.x, strategy, graph, nodes)?;
    let mut terms = Vec::new();
    let mut runs = Vec::new();
    let mut weighted = 0.0;
    for (i, &v) in nodes.iter().enumerate() {
        if !graph.is_standard(v) {
            continue;
        }
        let payoff = &q.payoffs[graph.base_of(v)];
        let horizon = payoff.k - 1;
        let (passage, run) = if horizon == 0 {
            (None, None)
        } else {
            let sweep = Sweep::new(strategy, graph, graph.base_of(v), horizon);
            let run = sweep.forward(v, record);
            let fp = passage_from_run(v, horizon, &run);
            (Some(fp), record.then_some(run))
        };
        let return_payoff = match &passage {
            Some(fp) => node_return_payoff(fp, payoff),
            None => payoff.d,
        };
        weighted += stationary.x[i] * return_payoff;
        terms.push(StandardTerm {
            node: v,
            rate: rates.rates[i],
            return_payoff,
            passage,
        });
        runs.push(run);
    }
    let mp = weighted / rates.mean_time + shift;
    let analysis = BsccAnalysis {
        nodes: nodes.to_vec(),
        x: stationary.x.clone(),
        residual: stationary.residual,
        rates,
        terms,
        mp,
    };
    let rec = record.then_some(BsccRecord { stationary, runs });
    Ok((analysis, rec))
}

pub(crate) fn evaluate(
    strategy: &RfmStrategy,
    graph: &AugmentedGraph,
    spec: &ServiceSpec,
    options: EvalOptions,
    record: bool,
) -> Result<(StrategyValue, Vec<BsccRecord>)> {
    if graph.base_count() != spec.node_count() {
        return Err(Error::Mismatch("graph and specification differ in node count".into()));
    }
    let deaff = deaffinize(spec);
    let decomposition = bscc_decompose(strategy, graph, options.prob_threshold);
    let mut bsccs = Vec::new();
    let mut records = Vec::new();
    for nodes in decomposition.bottoms() {
        let (a, r) = analyze_bscc(strategy, graph, &deaff.base, deaff.shift, nodes, record)?;
        bsccs.push(a);
        records.extend(r);
    }
    let mut best = 0;
    for (i, b) in bsccs.iter().enumerate() {
        if b.mp > bsccs[best].mp {
            best = i;
        }
    }
    let value = bsccs
        .get(best)
        .map(|b| b.mp)
        .ok_or_else(|| Error::invalid("chain has no bottom component"))?;
    Ok((
        StrategyValue {
            value,
            best,
            bsccs,
            decomposition,
        },
        records,
    ))
}

/// `Val(sigma)`: the best mean payoff over the chain's bottom components.
pub fn strategy_value(strategy: &RfmStrategy, graph: &AugmentedGraph, spec: &ServiceSpec) -> Result<StrategyValue> {
    strategy_value_with(strategy, graph, spec, EvalOptions::default())
}

pub fn strategy_value_with(
    strategy: &RfmStrategy,
    graph: &AugmentedGraph,
    spec: &ServiceSpec,
    options: EvalOptions,
) -> Result<StrategyValue> {
    evaluate(strategy, graph, spec, options, false).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{WAIT_EXIT_SLOT, WAIT_LOOP_SLOT};
    use crate::instances;
    use crate::model::Prolongable;
    use crate::strategy::StrategyParams;

    /// Explicit probabilities: `choose(node) -> row`.
    fn strategy_from(graph: &AugmentedGraph, mut choose: impl FnMut(usize) -> Vec<f64>) -> RfmStrategy {
        let mut probs = Vec::new();
        for id in 0..graph.node_count() {
            let row = choose(id);
            assert_eq!(row.len(), graph.edges(id).len());
            probs.extend(row);
        }
        RfmStrategy::from_probs(graph, probs).unwrap()
    }

    fn fig1_direct() -> ServiceSpec {
        let mut s = instances::fig1_instance();
        s = ServiceSpec::new(s.names.clone(), vec![vec![1, 1], vec![1, 2]], s.payoffs.clone(), Prolongable::Pairs(vec![]), s.compulsory.clone()).unwrap();
        s
    }

    /// Fig. 1(b) on the graph without wait vertices: v stays w.p. 0.916.
    fn fig1b_direct(g: &AugmentedGraph) -> RfmStrategy {
        strategy_from(g, |id| if id == 0 { vec![0.916, 0.084] } else { vec![1.0, 0.0] })
    }

    #[test]
    fn tarjan_single_component() {
        let g = AugmentedGraph::build(&instances::fig1_instance(), 2).unwrap();
        let s = RfmStrategy::from_params(&StrategyParams::zeros(&g), &g).unwrap();
        let d = bscc_decompose(&s, &g, 0.0);
        assert_eq!(d.sccs.len(), 1);
        assert!(d.bottom[0]);
        assert_eq!(d.sccs[0].len(), g.node_count());
    }

    #[test]
    fn tarjan_chain_and_disjoint_cycles() {
        let g = AugmentedGraph::build(&fig1_direct(), 1).unwrap();
        // v -> u with prob 1, u loops
        let s = strategy_from(&g, |id| if id == 0 { vec![0.0, 1.0] } else { vec![0.0, 1.0] });
        let d = bscc_decompose(&s, &g, 0.0);
        assert_eq!(d.bottoms().cloned().collect::<Vec<_>>(), vec![vec![1]]);
        // both loop: two bottom components
        let s = strategy_from(&g, |id| if id == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] });
        let d = bscc_decompose(&s, &g, 0.0);
        assert_eq!(d.bottoms().count(), 2);
    }

    #[test]
    fn fig1b_invariant_distribution() {
        let g = AugmentedGraph::build(&fig1_direct(), 1).unwrap();
        let s = fig1b_direct(&g);
        let st = invariant_distribution(&s, &g, &[0, 1]).unwrap();
        assert!((st.x[0] - 1.0 / 1.084).abs() < 1e-12);
        assert!((st.x[1] - 0.084 / 1.084).abs() < 1e-12);
        assert!(st.residual <= 1e-10);
        let r = visit_rates(&st.x, &s, &g, &[0, 1]).unwrap();
        assert!((r.mean_time - 1.0).abs() < 1e-12);
        assert!((r.rates[0] - st.x[0]).abs() < 1e-12);
    }

    #[test]
    fn trivial_distributions() {
        let g = AugmentedGraph::build(&fig1_direct(), 1).unwrap();
        let s = strategy_from(&g, |id| if id == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] });
        assert_eq!(invariant_distribution(&s, &g, &[0]).unwrap().x, vec![1.0]);
        let s = strategy_from(&g, |id| if id == 0 { vec![0.0, 1.0] } else { vec![1.0, 0.0] });
        let st = invariant_distribution(&s, &g, &[0, 1]).unwrap();
        assert!((st.x[0] - 0.5).abs() < 1e-15 && (st.x[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_long_self_loop_rate() {
        let spec = ServiceSpec::new(
            vec!["a".into()],
            vec![vec![5]],
            vec![PayoffFunction::constant(2.0)],
            Prolongable::Pairs(vec![]),
            vec![false],
        )
        .unwrap();
        let g = AugmentedGraph::build(&spec, 1).unwrap();
        let s = strategy_from(&g, |_| vec![1.0]);
        let r = visit_rates(&[1.0], &s, &g, &[0]).unwrap();
        assert_eq!(r.mean_time, 5.0);
        assert_eq!(r.rates, vec![0.2]);
        assert!((strategy_value(&s, &g, &spec).unwrap().value - 0.4).abs() < 1e-15);
    }

    #[test]
    fn wait_loops_inflate_mean_time() {
        // one node, prolongable self-move of length 1, loop probability p:
        // expected time per standard visit is 1 + p / (1 - p)
        let spec = ServiceSpec::new(vec!["a".into()], vec![vec![1]], vec![PayoffFunction::constant(1.0)], Prolongable::All, vec![false]).unwrap();
        let g = AugmentedGraph::build(&spec, 1).unwrap();
        for p in [0.0, 0.3, 0.75] {
            let s = strategy_from(&g, |id| if id == 0 { vec![1.0] } else { let mut r = vec![0.0; 2]; r[WAIT_LOOP_SLOT] = p; r[WAIT_EXIT_SLOT] = 1.0 - p; r });
            let v = strategy_value(&s, &g, &spec).unwrap();
            let b = &v.bsccs[0];
            let per_visit = b.rates.mean_time / b.x[0];
            assert!((per_visit - (1.0 + p / (1.0 - p))).abs() < 1e-12);
            assert!((v.value - (1.0 - p)).abs() < 1e-12);
        }
    }

    #[test]
    fn fig1b_first_passage_from_u() {
        let g = AugmentedGraph::build(&fig1_direct(), 1).unwrap();
        let s = fig1b_direct(&g);
        let fp = first_passage_distribution(&s, &g, 1, 30).unwrap();
        assert_eq!(fp.probs[1], 0.0);
        for t in 2..=30 {
            let expected = 0.084 * 0.916f64.powi(t as i32 - 2);
            assert!((fp.probs[t] - expected).abs() < 1e-15, "t = {t}");
        }
        assert!((fp.total() + fp.overflow - 1.0).abs() < 1e-12);
        assert!(first_passage_distribution(&s, &g, 1, 0).is_err());
    }

    #[test]
    fn deterministic_two_cycle_passage() {
        let spec = ServiceSpec::new(
            vec!["a".into(), "b".into()],
            vec![vec![1, 3], vec![4, 1]],
            vec![PayoffFunction::constant(0.0); 2],
            Prolongable::Pairs(vec![]),
            vec![false; 2],
        )
        .unwrap();
        let g = AugmentedGraph::build(&spec, 1).unwrap();
        let s = strategy_from(&g, |id| if id == 0 { vec![0.0, 1.0] } else { vec![1.0, 0.0] });
        let fp = first_passage_distribution(&s, &g, 0, 12).unwrap();
        for t in 0..=12 {
            assert_eq!(fp.probs[t], if t == 7 { 1.0 } else { 0.0 });
        }
        assert_eq!(fp.tail, 0.0);
    }

    #[test]
    fn fig1b_return_payoffs() {
        let spec = fig1_direct();
        let g = AugmentedGraph::build(&spec, 1).unwrap();
        let s = fig1b_direct(&g);
        let fp_u = first_passage_distribution(&s, &g, 1, 9).unwrap();
        let su = node_return_payoff(&fp_u, &spec.payoffs[1]);
        assert!((su - 10.0 * 0.916f64.powi(8)).abs() < 1e-12);
        assert!((su - 4.95637).abs() < 1e-5);
        let v = strategy_value(&s, &g, &spec).unwrap();
        let term_v = v.bsccs[0].terms.iter().find(|t| t.node == 0).unwrap();
        assert_eq!(term_v.return_payoff, 1.0);
        assert!((v.value - 1.307).abs() < 1e-3);
    }

    #[test]
    fn exact_finite_sum_when_no_tail() {
        let fp = FirstPassage { source: 0, horizon: 3, probs: vec![0.0, 0.25, 0.75, 0.0], tail: 0.0, overflow: 0.0 };
        let q = PayoffFunction::new(vec![4.0, 8.0, 100.0], -3.0, 0.0);
        assert_eq!(node_return_payoff(&fp, &q), 0.25 * 4.0 + 0.75 * 8.0);
    }

    #[test]
    fn unreachable_compulsory_penalty() {
        let mut spec = fig1_direct();
        spec.payoffs[1] = PayoffFunction::new(vec![0.0; 9], 10.0, -5.0);
        spec.compulsory[1] = true;
        let g = AugmentedGraph::build(&spec, 1).unwrap();
        let s = strategy_from(&g, |id| if id == 0 { vec![1.0, 0.0] } else { vec![1.0, 0.0] });
        let v = strategy_value(&s, &g, &spec).unwrap();
        assert!((v.value - (1.0 - 5.0)).abs() < 1e-12);
    }

    #[test]
    fn constant_payoffs_give_unit_value() {
        let spec = ServiceSpec::new(
            (0..3).map(|i| i.to_string()).collect(),
            vec![vec![1; 3]; 3],
            vec![PayoffFunction::constant(1.0); 3],
            Prolongable::Pairs(vec![]),
            vec![false; 3],
        )
        .unwrap();
        let g = AugmentedGraph::build(&spec, 2).unwrap();
        for seed in 0..5 {
            let p = StrategyParams::init_seeded(&g, Default::default(), seed).unwrap();
            let s = RfmStrategy::from_params(&p, &g).unwrap();
            assert!((strategy_value(&s, &g, &spec).unwrap().value - 1.0).abs() < 1e-12);
        }
    }
}
