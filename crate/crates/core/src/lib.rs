//! Schedules for the infinite-horizon recurrent routing problem.
//!
//! An agent repeatedly services the nodes of a graph and is paid, at every
//! visit, according to the time elapsed since its previous visit to the same
//! node. This crate synthesizes randomized finite-memory (RFM) strategies by
//! gradient ascent on their exact long-run value, samples deterministic
//! periodic schedules out of them, and ships exact oracles for tiny instances.
//!
//! Module map:
//!
//! * [`model`] - service specifications and eventually-affine payoffs
//! * [`graph`] - memory-product graph with auxiliary wait vertices
//! * [`strategy`] - logits, softmax strategies and successor sampling
//! * [`evaluator`] - BSCC analysis and the exact strategy value
//! * [`gradient`] - reverse-mode derivative of the strategy value
//! * [`optimizer`] - Adam and the optimization loop
//! * [`determinizer`] - periodic schedule sampling and evaluation
//! * [`oracle`] - brute-force and product-graph optimal cycles
//! * [`instances`] - benchmark families and the instance JSON format
//! * [`harness`] - multi-restart experiments and their CSV output

pub mod determinizer;
pub mod error;
pub mod evaluator;
pub mod gradient;
pub mod graph;
pub mod harness;
pub mod instances;
mod linalg;
pub mod model;
pub mod optimizer;
pub mod oracle;
pub mod rng;
pub mod strategy;

pub use determinizer::{eval_schedule, sample_periodic_schedule, PeriodicSchedule, SampleConfig};
pub use error::{Error, Result};
pub use evaluator::{strategy_value, StrategyValue};
pub use gradient::{value_and_gradient, GradientTape};
pub use graph::{AugmentedGraph, AugmentedNode};
pub use model::{deaffinize, validate_spec, PayoffFunction, ServiceSpec};
pub use optimizer::{optimize, AdamConfig, OptimizeConfig, OptimizationTrace};
pub use strategy::{RfmStrategy, StrategyParams};
