//! Forwarding-table verification: reachability, holes, loops, path shape.
//!
//! Verification is engine-agnostic: it walks dense forwarding entries
//! ([`PortsView`]) over a topology and never consults costs or dividers.
//! A fabric is usable when every ordered node pair reaches its destination
//! (no *holes*), no walk exceeds the loop budget, and every path climbs
//! first and descends after (*up\*/down\** shape) — the classical sufficient
//! condition for deadlock freedom in fat-trees.

use std::collections::BTreeSet;

use serde_json::json;
use thiserror::Error;

use crate::dmodc::{CostMatrix, INF};
use crate::tables::{PortsView, NO_ROUTE};
use crate::topology::{Fabric, Guid, PortTarget};

/// Cost-level reachability: are all ordered leaf pairs connected?
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityReport {
    pub valid: bool,
    /// `(from, to)` leaf GUID pairs with infinite cost.
    pub unreachable: Vec<(Guid, Guid)>,
}

/// Checks that every leaf can reach every other leaf according to the
/// preprocessed cost matrix (finite cost at the source leaf towards the
/// target leaf).
pub fn check_validity(f: &Fabric, costs: &CostMatrix) -> ValidityReport {
    let mut unreachable = Vec::new();
    for (to_ord, &to_switch) in f.leaf_switches.iter().enumerate() {
        for &from_switch in &f.leaf_switches {
            if from_switch == to_switch {
                continue;
            }
            if costs.get(from_switch, to_ord as u32) == INF {
                unreachable.push((
                    f.topo.switches[from_switch].guid,
                    f.topo.switches[to_switch].guid,
                ));
            }
        }
    }
    unreachable.sort();
    ValidityReport {
        valid: unreachable.is_empty(),
        unreachable,
    }
}

/// A traced forwarding path: the switches visited and the out-port taken at
/// each, including the terminal hop onto the destination node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub switches: Vec<usize>,
    pub ports: Vec<u16>,
}

impl Trace {
    /// Path length in visited switches.
    pub fn len(&self) -> usize {
        self.switches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.switches.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceFailure {
    #[error("routing hole at switch {switch} for destination {d}")]
    Hole { switch: Guid, d: usize },
    #[error("entry at switch {switch} for destination {d} uses dangling port {port}")]
    Dangling { switch: Guid, d: usize, port: u16 },
    #[error("entry at switch {switch} for destination {d} delivers to the wrong node")]
    WrongNode { switch: Guid, d: usize, port: u16 },
    #[error("no delivery within {budget} switches for destination {d}: loop suspected")]
    Budget { d: usize, budget: usize },
}

/// Walks the tables from `src`'s leaf towards node `dst`. The budget is
/// `2·height + 2` visited switches — comfortably above any legal up*/down*
/// path, so exceeding it means a loop.
pub fn trace_path(
    f: &Fabric,
    view: &impl PortsView,
    src: usize,
    dst: usize,
) -> Result<Trace, TraceFailure> {
    let budget = 2 * f.ranks.height() as usize + 2;
    let mut trace = Trace {
        switches: Vec::with_capacity(8),
        ports: Vec::with_capacity(8),
    };
    let mut s = f.topo.nodes[src].leaf;
    loop {
        if trace.len() == budget {
            return Err(TraceFailure::Budget { d: dst, budget });
        }
        let guid = f.topo.switches[s].guid;
        let port = view.port(s, dst);
        if port == NO_ROUTE {
            return Err(TraceFailure::Hole {
                switch: guid,
                d: dst,
            });
        }
        trace.switches.push(s);
        trace.ports.push(port);
        match f.topo.switches[s].ports.get(port as usize) {
            Some(&PortTarget::Switch { peer, .. }) => s = peer,
            Some(&PortTarget::Node { node }) if node == dst => return Ok(trace),
            Some(&PortTarget::Node { .. }) => {
                return Err(TraceFailure::WrongNode {
                    switch: guid,
                    d: dst,
                    port,
                })
            }
            Some(&PortTarget::Free) | None => {
                return Err(TraceFailure::Dangling {
                    switch: guid,
                    d: dst,
                    port,
                })
            }
        }
    }
}

/// True iff the rank sequence climbs (by one) for a while and then only
/// descends — i.e. has no valley.
pub fn is_updown_rank_sequence(ranks: &[u16]) -> bool {
    let mut descending = false;
    for w in ranks.windows(2) {
        if w[1] > w[0] {
            if descending {
                return false;
            }
        } else {
            descending = true;
        }
    }
    true
}

/// Checks the up*/down* shape of a traced path. Paths through unranked
/// switches cannot be classified and count as violations.
pub fn check_updown(f: &Fabric, trace: &Trace) -> bool {
    let mut ranks = Vec::with_capacity(trace.len());
    for &s in &trace.switches {
        match f.ranks.rank[s] {
            Some(r) => ranks.push(r),
            None => return false,
        }
    }
    is_updown_rank_sequence(&ranks)
}

/// One failed source/destination pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub src: usize,
    pub dst: usize,
    pub reason: String,
}

/// Outcome of the exhaustive all-pairs trace sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepReport {
    /// Distinct `(switch, destination)` holes, sorted.
    pub holes: Vec<(Guid, usize)>,
    /// Per-pair failures other than holes (wrong delivery, loops, shape).
    pub violations: Vec<Violation>,
    /// Longest successful path, in visited switches.
    pub max_path_len: usize,
}

impl SweepReport {
    /// No holes and no violations.
    pub fn clean(&self) -> bool {
        self.holes.is_empty() && self.violations.is_empty()
    }

    /// The canonical JSON report.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "valid": self.clean(),
            "holes": self.holes.iter().map(|(g, d)| json!({
                "switch": g.to_string(),
                "d": d,
            })).collect::<Vec<_>>(),
            "violations": self.violations.iter().map(|v| json!({
                "src": v.src,
                "dst": v.dst,
                "reason": v.reason,
            })).collect::<Vec<_>>(),
            "max_path_len": self.max_path_len,
        })
    }
}

fn sweep_from(
    f: &Fabric,
    view: &impl PortsView,
    src: usize,
    holes: &mut BTreeSet<(Guid, usize)>,
    violations: &mut Vec<Violation>,
    max_len: &mut usize,
) {
    for dst in 0..f.topo.num_nodes() {
        if dst == src {
            continue;
        }
        match trace_path(f, view, src, dst) {
            Ok(trace) => {
                *max_len = (*max_len).max(trace.len());
                if !check_updown(f, &trace) {
                    violations.push(Violation {
                        src,
                        dst,
                        reason: "path is not up*/down*".to_string(),
                    });
                }
            }
            Err(TraceFailure::Hole { switch, d }) => {
                holes.insert((switch, d));
            }
            Err(e) => violations.push(Violation {
                src,
                dst,
                reason: e.to_string(),
            }),
        }
    }
}

/// Traces every ordered node pair. Results are aggregated per source in
/// ascending order, so the report is deterministic (and identical whether or
/// not the sweep runs threaded).
pub fn sweep(f: &Fabric, view: &(impl PortsView + Sync)) -> SweepReport {
    let mut holes = BTreeSet::new();
    let mut violations = Vec::new();
    let mut max_len = 0usize;

    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        type Partial = (BTreeSet<(Guid, usize)>, Vec<Violation>, usize);
        let partials: Vec<Partial> = (0..f.topo.num_nodes())
            .into_par_iter()
            .map(|src| {
                let mut h = BTreeSet::new();
                let mut v = Vec::new();
                let mut m = 0usize;
                sweep_from(f, view, src, &mut h, &mut v, &mut m);
                (h, v, m)
            })
            .collect();
        for (h, mut v, m) in partials {
            holes.extend(h);
            violations.append(&mut v);
            max_len = max_len.max(m);
        }
    }
    #[cfg(not(feature = "parallel"))]
    for src in 0..f.topo.num_nodes() {
        sweep_from(f, view, src, &mut holes, &mut violations, &mut max_len);
    }

    SweepReport {
        holes: holes.into_iter().collect(),
        violations,
        max_path_len: max_len,
    }
}
