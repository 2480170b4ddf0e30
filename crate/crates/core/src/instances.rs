//! Benchmark families and the instance JSON format.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::{validate_spec, PayoffFunction, Prolongable, ServiceSpec};
use crate::rng;

const GRID_SIDE: i64 = 12;
const GRID_DEPOT: (i64, i64) = (6, 6);
const GRID_STREAM: u64 = 0x6772_6964;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridOptions {
    /// Allow waiting on every move; otherwise no move is prolongable.
    pub waits: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self { waits: true }
    }
}

/// Depot plus `k` long-maintenance and `3k` short-service nodes on a 12x12
/// grid, traversal time 10 per Manhattan step (at least 10).
pub fn generate_grid_instance(k: usize, seed: u64, options: &GridOptions) -> Result<ServiceSpec> {
    if k == 0 {
        return Err(Error::invalid("grid family needs k >= 1"));
    }
    let mut rng = rng::stream(seed, &[GRID_STREAM, k as u64]);
    let n = 1 + 4 * k;
    let mut names = vec!["depot".to_string()];
    let mut payoffs = vec![PayoffFunction::new(vec![0.0; 479], 0.0, -100.0)];
    let mut compulsory = vec![true];
    let mut positions = vec![GRID_DEPOT];

    let long = PayoffFunction::new(
        (1..7800u64).map(|t| if t < 6000 { 0.0 } else { 6000.0 }).collect(),
        6000.0,
        -1.0,
    );
    let short = PayoffFunction::new(
        (1..41u64).map(|t| if t >= 20 { 1.0 } else { 0.0 }).collect(),
        0.0,
        0.0,
    );
    for i in 0..k {
        names.push(format!("long{i}"));
        payoffs.push(long.clone());
        compulsory.push(true);
    }
    for i in 0..3 * k {
        names.push(format!("short{i}"));
        payoffs.push(short.clone());
        compulsory.push(false);
    }
    for _ in 1..n {
        positions.push((rng.gen_range(0..GRID_SIDE), rng.gen_range(0..GRID_SIDE)));
    }

    let time = positions
        .iter()
        .map(|&(xu, yu)| {
            positions
                .iter()
                .map(|&(xv, yv)| (10 * ((xu - xv).abs() + (yu - yv).abs())).max(10) as u64)
                .collect()
        })
        .collect();
    let prolongable = if options.waits {
        Prolongable::All
    } else {
        Prolongable::Pairs(Vec::new())
    };
    Ok(ServiceSpec::new(names, time, payoffs, prolongable, compulsory)?
        .with_positions(positions.into_iter().map(Some).collect())
        .with_meta("family", json!("grid"))
        .with_meta("k", json!(k))
        .with_meta("seed", json!(seed))
        .with_meta("depot", json!(0))
        .with_meta("ideal_bound", json!(1.15 * k as f64)))
}

/// Two-node example: `v` pays 1 on every visit, `u` pays 10 once it has been
/// left alone for 10 time units.
pub fn fig1_instance() -> ServiceSpec {
    ServiceSpec::new(
        vec!["v".into(), "u".into()],
        vec![vec![1, 1], vec![1, 2]],
        vec![
            PayoffFunction::constant(1.0),
            PayoffFunction::new(vec![0.0; 9], 10.0, 0.0),
        ],
        Prolongable::All,
        vec![false, false],
    )
    .expect("fixed instance is well formed")
    .with_meta("family", json!("fig1"))
}

/// Deadline-constrained perpetual routing instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CruavInstance {
    pub names: Vec<String>,
    pub times: Vec<Vec<u64>>,
    pub deadlines: Vec<u64>,
}

/// Encodes a cyclic-routing instance: every node is compulsory, pays
/// `i / |S|` when revisited within its deadline and is penalized steeply after.
pub fn cruav_reduction(cruav: &CruavInstance, kappa: f64) -> Result<ServiceSpec> {
    let n = cruav.names.len();
    if cruav.deadlines.len() != n {
        return Err(Error::invalid("one deadline per node is required"));
    }
    if cruav.deadlines.iter().any(|&d| d == 0) {
        return Err(Error::invalid("deadlines must be at least 1"));
    }
    if !(kappa > 0.0) {
        return Err(Error::invalid("kappa must be positive"));
    }
    let rho = 1.0 + n as f64 * cruav.deadlines.iter().map(|&d| d as f64).product::<f64>();
    let k_max = cruav.deadlines.iter().max().copied().unwrap_or(0) + 1;
    let c = -(kappa + 2.0 * k_max as f64 * rho);
    let payoffs = cruav
        .deadlines
        .iter()
        .map(|&d| PayoffFunction::new((1..=d).map(|i| i as f64 / n as f64).collect(), 0.0, c))
        .collect();
    let spec = ServiceSpec::new(
        cruav.names.clone(),
        cruav.times.clone(),
        payoffs,
        Prolongable::Pairs(Vec::new()),
        vec![true; n],
    )?
    .with_meta("family", json!("cruav"))
    .with_meta("kappa", json!(kappa));
    validate_spec(&spec).into_result()?;
    Ok(spec)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    nodes: Vec<NodeRecord>,
    time: Vec<Vec<u64>>,
    prolongable: ProlongableRecord,
    #[serde(default)]
    meta: BTreeMap<String, serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: String,
    payoff: PayoffRecord,
    compulsory: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pos: Option<[i64; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayoffRecord {
    prefix: Vec<f64>,
    k: u64,
    d: f64,
    c: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ProlongableRecord {
    Keyword(String),
    Pairs(Vec<[usize; 2]>),
}

/// Deserializes `text`, reporting failures with the JSON path of the
/// offending field.
pub fn parse_with_path<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn to_json(spec: &ServiceSpec) -> Result<String> {
    let file = InstanceFile {
        nodes: (0..spec.node_count())
            .map(|i| {
                let p = &spec.payoffs[i];
                NodeRecord {
                    id: spec.names[i].clone(),
                    payoff: PayoffRecord {
                        prefix: p.prefix.clone(),
                        k: p.k,
                        d: p.d,
                        c: p.c,
                    },
                    compulsory: spec.compulsory[i],
                    pos: spec.positions[i].map(|(x, y)| [x, y]),
                }
            })
            .collect(),
        time: spec.time_rows(),
        prolongable: match &spec.prolongable {
            Prolongable::All => ProlongableRecord::Keyword("all".into()),
            Prolongable::Pairs(pairs) => ProlongableRecord::Pairs(pairs.iter().map(|&(u, v)| [u, v]).collect()),
        },
        meta: spec.meta.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses and validates an instance.
pub fn from_json(text: &str) -> Result<ServiceSpec> {
    let file: InstanceFile = parse_with_path(text)?;
    let prolongable = match file.prolongable {
        ProlongableRecord::Keyword(k) if k == "all" => Prolongable::All,
        ProlongableRecord::Keyword(k) => {
            return Err(Error::Parse {
                path: "prolongable".into(),
                message: format!("expected \"all\" or a list of pairs, found \"{k}\""),
            })
        }
        ProlongableRecord::Pairs(pairs) => Prolongable::Pairs(pairs.into_iter().map(|[u, v]| (u, v)).collect()),
    };
    let positions = file.nodes.iter().map(|n| n.pos.map(|[x, y]| (x, y))).collect();
    let mut names = Vec::new();
    let mut payoffs = Vec::new();
    let mut compulsory = Vec::new();
    for node in file.nodes {
        names.push(node.id);
        payoffs.push(PayoffFunction {
            prefix: node.payoff.prefix,
            k: node.payoff.k,
            d: node.payoff.d,
            c: node.payoff.c,
        });
        compulsory.push(node.compulsory);
    }
    let mut spec = ServiceSpec::new(names, file.time, payoffs, prolongable, compulsory)?.with_positions(positions);
    spec.meta = file.meta;
    validate_spec(&spec).into_result()?;
    Ok(spec)
}

pub fn read_instance(path: &Path) -> Result<ServiceSpec> {
    from_json(&std::fs::read_to_string(path)?)
}

pub fn write_instance(spec: &ServiceSpec, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(spec)? + "\n")?;
    Ok(())
}
