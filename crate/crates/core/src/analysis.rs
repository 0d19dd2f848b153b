//! Static congestion analysis over deterministic forwarding tables.
//!
//! The load of a directed link is the number of flows of a communication
//! pattern whose forwarding path traverses it — a static proxy for
//! congestion risk, independent of timing or bandwidth. Maxima are taken
//! over switch-to-switch links only: the load of a leaf-to-node access link
//! is forced by the pattern, not by routing, so access links get their own
//! histogram instead.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::dmodc::{self, DmodcError, RouteMode};
use crate::dmodk;
use crate::tables::PortsView;
use crate::topology::{Fabric, LinkDir, PortTarget};
use crate::verify::{trace_path, TraceFailure};

/// A named communication pattern family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PatternKind {
    /// Every ordered pair of distinct nodes.
    AllToAll,
    /// Node `i` sends to node `(i + k) mod n`.
    Shift(u64),
    /// A seeded fixed-point-free permutation of the nodes.
    Perm(u64),
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternKind::AllToAll => write!(f, "all2all"),
            PatternKind::Shift(k) => write!(f, "shift:{k}"),
            PatternKind::Perm(seed) => write!(f, "perm:{seed}"),
        }
    }
}

impl FromStr for PatternKind {
    type Err = PatternError;

    /// Accepts `all2all`, `shift:K`, or `perm:SEED`.
    fn from_str(s: &str) -> Result<Self, PatternError> {
        if s == "all2all" {
            return Ok(PatternKind::AllToAll);
        }
        if let Some(k) = s.strip_prefix("shift:") {
            if let Ok(k) = k.parse() {
                return Ok(PatternKind::Shift(k));
            }
        }
        if let Some(seed) = s.strip_prefix("perm:") {
            if let Ok(seed) = seed.parse() {
                return Ok(PatternKind::Perm(seed));
            }
        }
        Err(PatternError::Unrecognised(s.to_string()))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("shift {k} is a multiple of the node count {n}: every flow would be a self-flow")]
    EmptyShift { k: u64, n: usize },
    #[error("a fixed-point-free permutation needs at least two nodes")]
    TooFewNodes,
    #[error("unrecognised pattern `{0}`; expected all2all, shift:K or perm:SEED")]
    Unrecognised(String),
}

/// A concrete pattern: the family it came from and its `(src, dst)` flows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub kind: PatternKind,
    pub flows: Vec<(usize, usize)>,
}

/// Expands a pattern family over `n` nodes. Self-flows never occur: shifts
/// that would only produce them are rejected, and permutations are redrawn
/// from the seeded generator until free of fixed points.
pub fn make_pattern(kind: PatternKind, n: usize) -> Result<Pattern, PatternError> {
    let flows = match kind {
        PatternKind::AllToAll => {
            let mut flows = Vec::with_capacity(n.saturating_sub(1) * n);
            for src in 0..n {
                for dst in 0..n {
                    if src != dst {
                        flows.push((src, dst));
                    }
                }
            }
            flows
        }
        PatternKind::Shift(k) => {
            if n == 0 || k % n as u64 == 0 {
                return Err(PatternError::EmptyShift { k, n });
            }
            let stride = (k % n as u64) as usize;
            (0..n).map(|src| (src, (src + stride) % n)).collect()
        }
        PatternKind::Perm(seed) => {
            if n < 2 {
                return Err(PatternError::TooFewNodes);
            }
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..n).collect();
            loop {
                perm.shuffle(&mut rng);
                if perm.iter().enumerate().all(|(i, &p)| i != p) {
                    break;
                }
            }
            perm.into_iter().enumerate().collect()
        }
    };
    Ok(Pattern { kind, flows })
}

/// Per-link flow counts for one pattern.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadReport {
    /// Egress flow count per switch port (including leaf-to-node ports).
    pub port_loads: Vec<Vec<u64>>,
    /// Largest load on any directed switch-to-switch link.
    pub max_load: u64,
    /// Total flow-hops over directed switch-to-switch links.
    pub total_load: u64,
    /// Number of directed switch-to-switch links.
    pub num_links: u64,
    /// Load → number of switch-to-switch links carrying it (zeros included).
    pub histogram: BTreeMap<u64, u64>,
    /// Load → number of leaf-to-node access links carrying it.
    pub access_histogram: BTreeMap<u64, u64>,
    /// Lower bound on the achievable max load: the busiest leaf's outbound
    /// inter-leaf flows divided by its up cables, rounded up. Any routing
    /// must put at least this much on some uplink.
    pub theoretical_floor: u64,
}

impl LoadReport {
    pub fn mean_load(&self) -> f64 {
        if self.num_links == 0 {
            0.0
        } else {
            self.total_load as f64 / self.num_links as f64
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Route(#[from] DmodcError),
    #[error("flow {src} -> {dst} cannot be traced: {failure}")]
    Trace {
        src: usize,
        dst: usize,
        failure: TraceFailure,
    },
}

/// Traces every flow through `view` and aggregates per-link loads. Fails on
/// the first flow that cannot be delivered (hole, loop, wrong node).
pub fn link_loads(
    f: &Fabric,
    view: &impl PortsView,
    flows: &[(usize, usize)],
) -> Result<LoadReport, AnalysisError> {
    let mut port_loads: Vec<Vec<u64>> = f
        .topo
        .switches
        .iter()
        .map(|sw| vec![0; sw.ports.len()])
        .collect();
    for &(src, dst) in flows {
        let trace = trace_path(f, view, src, dst).map_err(|failure| AnalysisError::Trace {
            src,
            dst,
            failure,
        })?;
        for (&s, &p) in trace.switches.iter().zip(&trace.ports) {
            port_loads[s][p as usize] += 1;
        }
    }

    let mut max_load = 0u64;
    let mut total_load = 0u64;
    let mut num_links = 0u64;
    let mut histogram = BTreeMap::new();
    let mut access_histogram = BTreeMap::new();
    for (s, sw) in f.topo.switches.iter().enumerate() {
        for (p, target) in sw.ports.iter().enumerate() {
            let load = port_loads[s][p];
            match target {
                PortTarget::Switch { .. } => {
                    max_load = max_load.max(load);
                    total_load += load;
                    num_links += 1;
                    *histogram.entry(load).or_insert(0) += 1;
                }
                PortTarget::Node { .. } => {
                    *access_histogram.entry(load).or_insert(0) += 1;
                }
                PortTarget::Free => debug_assert_eq!(load, 0),
            }
        }
    }

    // Busiest-leaf cut: flows leaving a leaf's subtree must share its
    // up cables.
    let mut theoretical_floor = 0u64;
    for &leaf in &f.leaf_switches {
        let crossing = flows
            .iter()
            .filter(|&&(src, dst)| f.topo.nodes[src].leaf == leaf && f.topo.nodes[dst].leaf != leaf)
            .count() as u64;
        if crossing == 0 {
            continue;
        }
        let cables: u64 = f.groups.groups[leaf]
            .iter()
            .filter(|g| g.dir == LinkDir::Up)
            .map(|g| g.ports.len() as u64)
            .sum();
        let bound = if cables == 0 {
            u64::MAX
        } else {
            crossing.div_ceil(cables)
        };
        theoretical_floor = theoretical_floor.max(bound);
    }

    Ok(LoadReport {
        port_loads,
        max_load,
        total_load,
        num_links,
        histogram,
        access_histogram,
        theoretical_floor,
    })
}

/// The two table engines the toolkit can compare.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineKind {
    Dmodc,
    Dmodk,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineKind::Dmodc => write!(f, "dmodc"),
            EngineKind::Dmodk => write!(f, "dmodk"),
        }
    }
}

/// One comparison row. `loads` is `None` when the engine cannot run on this
/// fabric (the closed-form engine refuses non-pristine topologies).
#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub engine: EngineKind,
    pub pattern: PatternKind,
    pub loads: Option<(u64, f64)>,
}

/// Routes the fabric with both engines and reports (max, mean) load per
/// pattern and engine. On a pristine generated PGFT the two engines produce
/// identical tables, so their rows must agree; on anything else the
/// closed-form rows are `None`.
pub fn compare_engines(
    f: &Fabric,
    patterns: &[PatternKind],
) -> Result<Vec<CompareRow>, AnalysisError> {
    let pre = dmodc::preprocess(f)?;
    let dmodc_tables = dmodc::build_tables(f, &pre, RouteMode::UpDownStrict)?.tables;
    let dmodk_tables = dmodk::certify(&f.topo)
        .ok()
        .and_then(|meta| dmodk::build_tables(f, &meta).ok());

    let mut rows = Vec::with_capacity(patterns.len() * 2);
    for &kind in patterns {
        let pattern = make_pattern(kind, f.topo.num_nodes())?;
        let report = link_loads(f, &dmodc_tables, &pattern.flows)?;
        rows.push(CompareRow {
            engine: EngineKind::Dmodc,
            pattern: kind,
            loads: Some((report.max_load, report.mean_load())),
        });
        let loads = match &dmodk_tables {
            Some(t) => {
                let report = link_loads(f, t, &pattern.flows)?;
                Some((report.max_load, report.mean_load()))
            }
            None => None,
        };
        rows.push(CompareRow {
            engine: EngineKind::Dmodk,
            pattern: kind,
            loads,
        });
    }
    Ok(rows)
}
