//! Adam ascent on the strategy logits and the optimization loop.

use std::time::Instant;

use crate::determinizer::{sample_periodic_schedule, PeriodicSchedule, SampleConfig};
use crate::error::{Error, Result};
use crate::gradient::GradientTape;
use crate::graph::AugmentedGraph;
use crate::model::{validate_spec, ServiceSpec};
use crate::rng;
use crate::strategy::{InitBounds, StrategyParams};

const INIT_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(config: AdamConfig, len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
            config,
        }
    }
}

/// One bias-corrected Adam step along `+grad`.
pub fn adam_step(state: &mut AdamState, params: &mut StrategyParams, grad: &[f64]) -> Result<()> {
    if grad.len() != params.logits.len() || state.m.len() != grad.len() {
        return Err(Error::Mismatch(format!(
            "gradient has {} entries, parameters {}, moments {}",
            grad.len(),
            params.logits.len(),
            state.m.len()
        )));
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.step += 1;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    for i in 0..grad.len() {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params.logits[i] += lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeConfig {
    pub memory_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// Stream label distinguishing independent restarts under one seed.
    pub restart: u64,
    pub adam: AdamConfig,
    pub init: InitBounds,
    pub determinize_each_step: bool,
    pub sample: SampleConfig,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            memory_size: 1,
            steps: 50,
            seed: 0,
            restart: 0,
            adam: AdamConfig::default(),
            init: InitBounds::default(),
            determinize_each_step: false,
            sample: SampleConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub rfm_value: f64,
    pub periodic_value: Option<f64>,
    /// Wall time of value, gradient and update, excluding determinization.
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizationTrace {
    pub restart: u64,
    pub memory_size: usize,
    pub steps: Vec<StepRecord>,
    pub best_params: StrategyParams,
    pub best_value: f64,
    pub best_step: usize,
    pub best_schedule: Option<PeriodicSchedule>,
}

impl OptimizationTrace {
    pub fn best_periodic(&self) -> Option<f64> {
        self.best_schedule.as_ref().map(|s| s.value)
    }

    pub fn mean_step_seconds(&self) -> f64 {
        self.steps.iter().map(|s| s.seconds).sum::<f64>() / self.steps.len() as f64
    }
}

/// Softmax, value, gradient and Adam step, `steps` times; keeps the
/// parameters of the best evaluated strategy.
pub fn optimize(spec: &ServiceSpec, config: &OptimizeConfig) -> Result<OptimizationTrace> {
    if config.steps == 0 {
        return Err(Error::invalid("step budget must be at least 1"));
    }
    validate_spec(spec).into_result()?;
    let graph = AugmentedGraph::build(spec, config.memory_size)?;
    let mut init_rng = rng::stream(config.seed, &[INIT_STREAM, config.restart]);
    let mut params = StrategyParams::init(&graph, config.init, config.seed, &mut init_rng)?;
    let mut adam = AdamState::new(config.adam, params.logits.len());
    let mut sample_rng = rng::stream(config.seed, &[SAMPLE_STREAM, config.restart]);

    let mut records = Vec::with_capacity(config.steps);
    let mut best_params = params.clone();
    let mut best_value = f64::NEG_INFINITY;
    let mut best_step = 0;
    let mut best_schedule: Option<PeriodicSchedule> = None;

    for step in 0..config.steps {
        let started = Instant::now();
        let tape = GradientTape::record(&params, &graph, spec)?;
        let value = tape.value();
        let grad = tape.gradient();
        let evaluated = params.clone();
        adam_step(&mut adam, &mut params, &grad)?;
        let seconds = started.elapsed().as_secs_f64();

        let periodic = if config.determinize_each_step {
            match sample_periodic_schedule(tape.strategy(), &graph, spec, &config.sample, &mut sample_rng) {
                Ok(s) => Some(s),
                Err(Error::NoCycleFound) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let periodic_value = periodic.as_ref().map(|s| s.value);
        if let Some(s) = periodic {
            if best_schedule.as_ref().map_or(true, |b| s.value > b.value) {
                best_schedule = Some(s);
            }
        }
        if value > best_value {
            best_value = value;
            best_params = evaluated;
            best_step = step;
        }
        records.push(StepRecord {
            step,
            rfm_value: value,
            periodic_value,
            seconds,
        });
    }

    Ok(OptimizationTrace {
        restart: config.restart,
        memory_size: config.memory_size,
        steps: records,
        best_params,
        best_value,
        best_step,
        best_schedule,
    })
}
