//! Service specifications and eventually-affine payoff functions.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Payoff received at a node when it is revisited after `t` time units.
///
/// Values for `t < k` are listed explicitly; from `k` on the function is
/// affine: `P(k + i) = d + i * c`.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffFunction {
    /// `P(1) ..= P(k - 1)`.
    pub prefix: Vec<f64>,
    pub k: u64,
    pub d: f64,
    pub c: f64,
}

impl PayoffFunction {
    pub fn new(prefix: Vec<f64>, d: f64, c: f64) -> Self {
        let k = prefix.len() as u64 + 1;
        Self { prefix, k, d, c }
    }

    /// `P(t) = value` for every `t >= 1`.
    pub fn constant(value: f64) -> Self {
        Self::new(Vec::new(), value, 0.0)
    }

    /// Checked evaluation; `t = 0` is not a revisit time.
    pub fn payoff_at(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::invalid("payoff is undefined at t = 0"));
        }
        if t < self.k && self.prefix.len() as u64 != self.k - 1 {
            return Err(Error::InvalidSpec(format!(
                "payoff prefix has {} entries, expected {}",
                self.prefix.len(),
                self.k - 1
            )));
        }
        Ok(self.value(t))
    }

    /// Unchecked evaluation for hot loops. `t >= 1` on a validated function.
    #[inline]
    pub fn value(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        if t < self.k {
            self.prefix[(t - 1) as usize]
        } else {
            self.d + (t - self.k) as f64 * self.c
        }
    }

    /// True when the function is constant from `k` on.
    pub fn is_eventually_constant(&self) -> bool {
        self.c == 0.0
    }
}

/// Which ordered pairs of nodes allow waiting on the move between them.
#[derive(Clone, Debug, PartialEq)]
pub enum Prolongable {
    All,
    Pairs(Vec<(usize, usize)>),
}

/// A complete routing instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ServiceSpec {
    pub names: Vec<String>,
    /// Row-major `n x n` traversal times in time units.
    time: Vec<u64>,
    pub payoffs: Vec<PayoffFunction>,
    pub prolongable: Prolongable,
    pub compulsory: Vec<bool>,
    pub positions: Vec<Option<(i64, i64)>>,
    pub meta: BTreeMap<String, serde_json::Value>,
    prolongable_mask: Vec<bool>,
}

impl ServiceSpec {
    /// Builds a specification. Shapes must agree; value-level problems are
    /// left to [`validate_spec`].
    pub fn new(
        names: Vec<String>,
        time: Vec<Vec<u64>>,
        payoffs: Vec<PayoffFunction>,
        prolongable: Prolongable,
        compulsory: Vec<bool>,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidSpec("specification has no nodes".into()));
        }
        if time.len() != n || time.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidSpec(format!("time matrix must be {n}x{n}")));
        }
        if payoffs.len() != n || compulsory.len() != n {
            return Err(Error::InvalidSpec(format!(
                "expected {n} payoffs and compulsory flags"
            )));
        }
        let mut mask = vec![false; n * n];
        match &prolongable {
            Prolongable::All => mask.iter_mut().for_each(|m| *m = true),
            Prolongable::Pairs(pairs) => {
                for &(u, v) in pairs {
                    if u >= n || v >= n {
                        return Err(Error::InvalidSpec(format!(
                            "prolongable pair ({u}, {v}) is out of range"
                        )));
                    }
                    mask[u * n + v] = true;
                }
            }
        }
        Ok(Self {
            names,
            time: time.into_iter().flatten().collect(),
            payoffs,
            prolongable,
            compulsory,
            positions: vec![None; n],
            meta: BTreeMap::new(),
            prolongable_mask: mask,
        })
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    #[inline]
    pub fn time(&self, from: usize, to: usize) -> u64 {
        self.time[from * self.node_count() + to]
    }

    pub fn time_rows(&self) -> Vec<Vec<u64>> {
        self.time
            .chunks(self.node_count())
            .map(|row| row.to_vec())
            .collect()
    }

    #[inline]
    pub fn is_prolongable(&self, from: usize, to: usize) -> bool {
        self.prolongable_mask[from * self.node_count() + to]
    }

    pub fn k_max(&self) -> u64 {
        self.payoffs.iter().map(|p| p.k).max().unwrap_or(1)
    }

    /// `sum of c_v over compulsory v`, the de-affinization shift.
    pub fn compulsory_slope_sum(&self) -> f64 {
        self.payoffs
            .iter()
            .zip(&self.compulsory)
            .filter(|(_, &c)| c)
            .map(|(p, _)| p.c)
            .sum()
    }

    /// Index of the node named in `meta.depot`, if any.
    pub fn depot(&self) -> Option<usize> {
        self.meta
            .get("depot")
            .and_then(|v| v.as_u64())
            .map(|d| d as usize)
            .filter(|&d| d < self.node_count())
    }

    pub fn with_positions(mut self, positions: Vec<Option<(i64, i64)>>) -> Self {
        assert_eq!(positions.len(), self.node_count());
        self.positions = positions;
        self
    }

    pub fn with_meta(mut self, key: &str, value: serde_json::Value) -> Self {
        self.meta.insert(key.to_string(), value);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonPositiveTime { from: usize, to: usize },
    PrefixLength { node: usize, expected: u64, found: usize },
    ZeroThreshold { node: usize },
    NonFinitePayoff { node: usize },
    SlopeOffCompulsory { node: usize, c: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveTime { from, to } => {
                write!(f, "non-positive traversal time on ({from}, {to})")
            }
            Violation::PrefixLength { node, expected, found } => write!(
                f,
                "wrong prefix length at node {node}: expected {expected}, found {found}"
            ),
            Violation::ZeroThreshold { node } => write!(f, "payoff threshold k is zero at node {node}"),
            Violation::NonFinitePayoff { node } => write!(f, "non-finite payoff value at node {node}"),
            Violation::SlopeOffCompulsory { node, c } => {
                write!(f, "nonzero slope off compulsory set at node {node} (c = {c})")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            return Ok(());
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        Err(Error::InvalidSpec(msgs.join("; ")))
    }
}

pub fn validate_spec(spec: &ServiceSpec) -> ValidationReport {
    let n = spec.node_count();
    let mut violations = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if spec.time(from, to) == 0 {
                violations.push(Violation::NonPositiveTime { from, to });
            }
        }
    }
    for (node, p) in spec.payoffs.iter().enumerate() {
        if p.k == 0 {
            violations.push(Violation::ZeroThreshold { node });
        } else if p.prefix.len() as u64 != p.k - 1 {
            violations.push(Violation::PrefixLength {
                node,
                expected: p.k - 1,
                found: p.prefix.len(),
            });
        }
        if !p.d.is_finite() || !p.c.is_finite() || p.prefix.iter().any(|x| !x.is_finite()) {
            violations.push(Violation::NonFinitePayoff { node });
        }
        if !spec.compulsory[node] && p.c != 0.0 {
            violations.push(Violation::SlopeOffCompulsory { node, c: p.c });
        }
    }
    ValidationReport { violations }
}

/// A specification whose payoffs are eventually constant, plus the constant
/// that restores the original mean payoff.
#[derive(Clone, Debug)]
pub struct DeaffinizedSpec {
    pub base: ServiceSpec,
    pub shift: f64,
}

/// `Q_v(t) = P_v(t) - t * c_v`; mean payoffs satisfy `MP^C[P] = MP[Q] + shift`.
pub fn deaffinize(spec: &ServiceSpec) -> DeaffinizedSpec {
    let payoffs = spec
        .payoffs
        .iter()
        .map(|p| {
            let prefix = p
                .prefix
                .iter()
                .enumerate()
                .map(|(i, &v)| v - (i as f64 + 1.0) * p.c)
                .collect();
            PayoffFunction {
                prefix,
                k: p.k,
                d: p.d - p.k as f64 * p.c,
                c: 0.0,
            }
        })
        .collect();
    DeaffinizedSpec {
        base: ServiceSpec {
            payoffs,
            ..spec.clone()
        },
        shift: spec.compulsory_slope_sum(),
    }
}
