//! Reverse-mode derivative of the strategy value with respect to the logits.
//!
//! The forward pass is the evaluator itself, run with recording switched on,
//! so the taped value equals [`strategy_value`](crate::evaluator::strategy_value)
//! exactly. The backward pass differentiates the optimal bottom component
//! with its membership held fixed:
//!
//! * `mp = N / T + shift` with `N = sum x_u S_u` and `T = sum x_n tau_n`;
//! * the stationary system `M x = e_0` through its transpose, `M^T lambda = dmp/dx`;
//! * each first-passage sweep through a reverse sweep over time ticks;
//! * the per-node softmax.

use crate::error::Result;
use crate::evaluator::{evaluate, BsccRecord, EvalOptions, StrategyValue, Sweep};
use crate::graph::AugmentedGraph;
use crate::model::{deaffinize, ServiceSpec};
use crate::strategy::{RfmStrategy, StrategyParams};

pub struct GradientTape<'g> {
    graph: &'g AugmentedGraph,
    strategy: RfmStrategy,
    result: StrategyValue,
    records: Vec<BsccRecord>,
    q: ServiceSpec,
}

impl<'g> GradientTape<'g> {
    /// Runs the forward evaluation, keeping what the backward pass needs.
    pub fn record(params: &StrategyParams, graph: &'g AugmentedGraph, spec: &ServiceSpec) -> Result<Self> {
        let strategy = RfmStrategy::from_params(params, graph)?;
        let (result, records) = evaluate(&strategy, graph, spec, EvalOptions::default(), true)?;
        Ok(Self {
            graph,
            strategy,
            result,
            records,
            q: deaffinize(spec).base,
        })
    }

    pub fn value(&self) -> f64 {
        self.result.value
    }

    pub fn strategy_value(&self) -> &StrategyValue {
        &self.result
    }

    pub fn strategy(&self) -> &RfmStrategy {
        &self.strategy
    }

    /// `dVal / dp` for every edge slot.
    pub fn gradient_probs(&self) -> Vec<f64> {
        let g = self.graph;
        let probs = self.strategy.probs();
        let best = &self.result.bsccs[self.result.best];
        let rec = &self.records[self.result.best];
        let st = &rec.stationary;
        let mut gp = vec![0.0; g.edge_count()];

        let t = best.rates.mean_time;
        let numer: f64 = best
            .terms
            .iter()
            .map(|term| st.x[st.local[term.node]] * term.return_payoff)
            .sum();
        let k = numer / (t * t);

        let mut gx = vec![0.0; best.nodes.len()];
        for (i, &v) in best.nodes.iter().enumerate() {
            let mut tau = 0.0;
            for s in g.edge_range(v) {
                let len = g.edge(s).length as f64;
                tau += probs[s] * len;
                gp[s] -= k * st.x[i] * len;
            }
            gx[i] -= k * tau;
        }

        for (term, run) in best.terms.iter().zip(&rec.runs) {
            let i = st.local[term.node];
            gx[i] += term.return_payoff / t;
            if let Some(run) = run {
                let g_s = st.x[i] / t;
                let payoff = &self.q.payoffs[g.base_of(term.node)];
                let horizon = payoff.k - 1;
                let mut d_absorbed = vec![0.0; horizon as usize + 1];
                for (tick, d) in d_absorbed.iter_mut().enumerate().skip(1) {
                    *d = g_s * (payoff.value(tick as u64) - payoff.d);
                }
                Sweep::new(&self.strategy, g, g.base_of(term.node), horizon).adjoint(run, &d_absorbed, &mut gp);
            }
        }

        let lambda = st.lu.solve_transpose(&gx);
        for (i, &v) in best.nodes.iter().enumerate() {
            for s in g.edge_range(v) {
                let j = st.local[g.edge(s).target];
                if j != 0 && j < lambda.len() {
                    gp[s] -= lambda[j] * st.x[i];
                }
            }
        }
        gp
    }

    /// `dVal / dtheta` for every logit.
    pub fn gradient(&self) -> Vec<f64> {
        let gp = self.gradient_probs();
        let probs = self.strategy.probs();
        let mut out = vec![0.0; gp.len()];
        for v in 0..self.graph.node_count() {
            let r = self.graph.edge_range(v);
            let dot: f64 = r.clone().map(|s| probs[s] * gp[s]).sum();
            for s in r {
                out[s] = probs[s] * (gp[s] - dot);
            }
        }
        out
    }
}

pub fn value_and_gradient(params: &StrategyParams, graph: &AugmentedGraph, spec: &ServiceSpec) -> Result<(f64, Vec<f64>)> {
    let tape = GradientTape::record(params, graph, spec)?;
    Ok((tape.value(), tape.gradient()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::strategy_value;
    use crate::instances;
    use crate::model::{PayoffFunction, Prolongable};
    use crate::rng;
    use crate::strategy::InitBounds;
    use rand::Rng;

    fn value_at(params: &StrategyParams, g: &AugmentedGraph, spec: &ServiceSpec) -> f64 {
        let s = RfmStrategy::from_params(params, g).unwrap();
        strategy_value(&s, g, spec).unwrap().value
    }

    /// Central differences, step 1e-5.
    fn finite_difference(params: &StrategyParams, g: &AugmentedGraph, spec: &ServiceSpec) -> Vec<f64> {
        let h = 1e-5;
        (0..params.logits.len())
            .map(|i| {
                let mut up = params.clone();
                up.logits[i] += h;
                let mut dn = params.clone();
                dn.logits[i] -= h;
                (value_at(&up, g, spec) - value_at(&dn, g, spec)) / (2.0 * h)
            })
            .collect()
    }

    fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    fn random_spec(seed: u64) -> ServiceSpec {
        let mut rng = rng::stream(seed, &[77]);
        let n = rng.gen_range(2..=3);
        let time = (0..n).map(|_| (0..n).map(|_| rng.gen_range(1..=3)).collect()).collect();
        let mut payoffs = Vec::new();
        let mut compulsory = Vec::new();
        for _ in 0..n {
            let k = rng.gen_range(1..=12);
            let prefix = (1..k).map(|_| rng.gen_range(0.0..5.0)).collect();
            let comp = rng.gen_bool(0.5);
            let c = if comp { -rng.gen_range(0.0..1.0) } else { 0.0 };
            payoffs.push(PayoffFunction::new(prefix, rng.gen_range(0.0..5.0), c));
            compulsory.push(comp);
        }
        let pairs = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).filter(|_| rng.gen_bool(0.3)).collect();
        ServiceSpec::new((0..n).map(|i| i.to_string()).collect(), time, payoffs, Prolongable::Pairs(pairs), compulsory).unwrap()
    }

    #[test]
    fn tape_value_matches_evaluator_exactly() {
        let spec = instances::fig1_instance();
        let g = AugmentedGraph::build(&spec, 2).unwrap();
        let p = StrategyParams::init_seeded(&g, InitBounds::default(), 3).unwrap();
        let tape = GradientTape::record(&p, &g, &spec).unwrap();
        assert_eq!(tape.value(), value_at(&p, &g, &spec));
    }

    #[test]
    fn matches_finite_differences_on_fig1() {
        let spec = instances::fig1_instance();
        for memory in [1, 2] {
            let g = AugmentedGraph::build(&spec, memory).unwrap();
            let p = StrategyParams::init_seeded(&g, InitBounds::default(), 10 + memory as u64).unwrap();
            let (_, grad) = value_and_gradient(&p, &g, &spec).unwrap();
            let fd = finite_difference(&p, &g, &spec);
            assert!(max_rel_error(&grad, &fd) <= 1e-3, "memory {memory}");
        }
    }

    #[test]
    fn matches_finite_differences_on_random_instances() {
        for seed in 0..3 {
            let spec = random_spec(seed);
            let g = AugmentedGraph::build(&spec, 1 + seed as usize % 2).unwrap();
            let p = StrategyParams::init_seeded(&g, InitBounds::default(), seed).unwrap();
            let (_, grad) = value_and_gradient(&p, &g, &spec).unwrap();
            let fd = finite_difference(&p, &g, &spec);
            assert!(max_rel_error(&grad, &fd) <= 1e-3, "seed {seed}");
        }
    }

    #[test]
    fn long_horizon_uses_segment_replay() {
        // horizon beyond one checkpoint segment
        let spec = ServiceSpec::new(
            vec!["a".into(), "b".into()],
            vec![vec![1, 2], vec![2, 1]],
            vec![
                PayoffFunction::new((1..1200).map(|t| (t as f64).sqrt()).collect(), 40.0, 0.0),
                PayoffFunction::new(vec![1.0, 2.0], 3.0, 0.0),
            ],
            Prolongable::Pairs(vec![(0, 1)]),
            vec![false; 2],
        )
        .unwrap();
        let g = AugmentedGraph::build(&spec, 1).unwrap();
        let p = StrategyParams::init_seeded(&g, InitBounds::default(), 4).unwrap();
        let (_, grad) = value_and_gradient(&p, &g, &spec).unwrap();
        let fd = finite_difference(&p, &g, &spec);
        assert!(max_rel_error(&grad, &fd) <= 1e-3);
    }

    #[test]
    fn shift_direction_has_zero_derivative() {
        let spec = random_spec(5);
        let g = AugmentedGraph::build(&spec, 2).unwrap();
        let p = StrategyParams::init_seeded(&g, InitBounds::default(), 5).unwrap();
        let (_, grad) = value_and_gradient(&p, &g, &spec).unwrap();
        for v in 0..g.node_count() {
            let s: f64 = grad[g.edge_range(v)].iter().sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_problem_has_zero_gradient() {
        let spec = ServiceSpec::new(
            (0..3).map(|i| i.to_string()).collect(),
            vec![vec![1; 3]; 3],
            vec![PayoffFunction::constant(1.0); 3],
            Prolongable::Pairs(vec![]),
            vec![false; 3],
        )
        .unwrap();
        let g = AugmentedGraph::build(&spec, 2).unwrap();
        let p = StrategyParams::init_seeded(&g, InitBounds::default(), 1).unwrap();
        let (v, grad) = value_and_gradient(&p, &g, &spec).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(grad.iter().all(|x| x.abs() <= 1e-8));
    }
}
