//! Shared fixtures and independent reference computations for the
//! integration tests.

#![allow(dead_code)]

use ihrrp::graph::{WAIT_EXIT_SLOT, WAIT_LOOP_SLOT};
use ihrrp::model::Prolongable;
use ihrrp::{rng, AugmentedGraph, AugmentedNode, PayoffFunction, RfmStrategy, ServiceSpec};
use rand::Rng;

/// Strategy on `graph` given per standard node a map from target standard
/// node to probability; wait vertices exit immediately.
pub fn strategy_to_targets(graph: &AugmentedGraph, row: impl Fn(usize) -> Vec<(usize, f64)>) -> RfmStrategy {
    let mut probs = Vec::new();
    for id in 0..graph.node_count() {
        let edges = graph.edges(id);
        if graph.is_standard(id) {
            let wanted = row(id);
            for e in edges {
                let target = match graph.node(e.target).unwrap() {
                    AugmentedNode::Standard { .. } => e.target,
                    AugmentedNode::Wait { to, .. } => to,
                };
                probs.push(wanted.iter().filter(|(t, _)| *t == target).map(|(_, p)| p).sum());
            }
        } else {
            let mut r = vec![0.0; edges.len()];
            r[WAIT_EXIT_SLOT] = 1.0;
            probs.extend(r);
        }
    }
    RfmStrategy::from_probs(graph, probs).unwrap()
}

/// The randomized two-node strategy: stay on `v` w.p. 0.916, else go to `u`,
/// and always return from `u` to `v`.
pub fn fig1b_strategy(graph: &AugmentedGraph) -> RfmStrategy {
    assert_eq!(graph.memory_size(), 1);
    strategy_to_targets(graph, |id| if id == 0 { vec![(0, 0.916), (1, 0.084)] } else { vec![(0, 1.0)] })
}

/// Random instance with `nodes` base nodes, clocks up to `k_max`, traversal
/// times in `1..=max_time` and each ordered pair prolongable with `p_wait`.
pub fn random_spec(seed: u64, nodes: usize, k_max: u64, max_time: u64, p_wait: f64) -> ServiceSpec {
    let mut r = rng::stream(seed, &[0x7e57]);
    let time = (0..nodes)
        .map(|_| (0..nodes).map(|_| r.gen_range(1..=max_time)).collect())
        .collect();
    let mut payoffs = Vec::new();
    let mut compulsory = Vec::new();
    for _ in 0..nodes {
        let k = r.gen_range(1..=k_max);
        let prefix = (1..k).map(|_| r.gen_range(0.0..4.0)).collect();
        let comp = r.gen_bool(0.4);
        let c = if comp { -r.gen_range(0.05..1.0) } else { 0.0 };
        payoffs.push(PayoffFunction::new(prefix, r.gen_range(0.0..6.0), c));
        compulsory.push(comp);
    }
    let pairs = (0..nodes)
        .flat_map(|u| (0..nodes).map(move |v| (u, v)))
        .filter(|_| r.gen_bool(p_wait))
        .collect();
    ServiceSpec::new(
        (0..nodes).map(|i| format!("n{i}")).collect(),
        time,
        payoffs,
        Prolongable::Pairs(pairs),
        compulsory,
    )
    .unwrap()
}

/// Long-run average from a direct simulation of the strategy, with a
/// batch-means standard error.
#[derive(Clone, Copy, Debug)]
pub struct MonteCarlo {
    pub mean: f64,
    pub std_error: f64,
}

/// Simulates `horizon` time units from `start`, scoring `P_u(t)` on each
/// return to base node `u` after `t` units; compulsory nodes never reached
/// cost `c_u` per unit. Uses its own successor sampling, independent of the
/// library's walk code.
pub fn simulate(spec: &ServiceSpec, graph: &AugmentedGraph, strategy: &RfmStrategy, start: usize, horizon: u64, batches: usize, seed: u64) -> MonteCarlo {
    let mut r = rng::stream(seed, &[0x5eed]);
    let n = spec.node_count();
    let mut last: Vec<Option<u64>> = vec![None; n];
    let batch_len = horizon / batches as u64;
    let mut batch_payoff = vec![0.0; batches];
    let mut batch_time = vec![0u64; batches];
    let mut clock = 0u64;
    let mut at = start;
    last[graph.base_of(at)] = Some(0);
    let draw = |r: &mut rng::StreamRng, probs: &[f64]| -> usize {
        let x: f64 = r.gen();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if x < acc {
                return i;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap()
    };
    while clock < horizon {
        let edges = graph.edges(at);
        let e = edges[draw(&mut r, strategy.node_probs(graph, at))];
        let mut dt = e.length;
        let mut next = e.target;
        while !graph.is_standard(next) {
            let w = next;
            let probs = strategy.node_probs(graph, w);
            let slot = draw(&mut r, probs);
            let edge = graph.edges(w)[slot];
            dt += edge.length;
            if slot == WAIT_LOOP_SLOT {
                continue;
            }
            next = edge.target;
        }
        let old = clock;
        clock += dt;
        let u = graph.base_of(next);
        let gain = match last[u] {
            Some(l) => spec.payoffs[u].value(clock - l),
            None => 0.0,
        };
        last[u] = Some(clock);
        let b = ((old / batch_len.max(1)) as usize).min(batches - 1);
        batch_payoff[b] += gain;
        batch_time[b] += dt;
        at = next;
    }
    let penalty: f64 = (0..n).filter(|&u| spec.compulsory[u] && last[u].is_none()).map(|u| spec.payoffs[u].c).sum();
    let means: Vec<f64> = batch_payoff
        .iter()
        .zip(&batch_time)
        .map(|(p, &t)| p / t as f64 + penalty)
        .collect();
    let total: f64 = batch_payoff.iter().sum::<f64>() / clock as f64 + penalty;
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    MonteCarlo {
        mean: total,
        std_error: (var / batches as f64).sqrt(),
    }
}

/// One line of the acceptance report, then the assertion.
pub fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("[acceptance {id}] {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}
