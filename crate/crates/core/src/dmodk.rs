//! Classical closed-form routing for pristine PGFTs.
//!
//! On a complete PGFT no graph state is needed at all: a switch's level and
//! label determine every forwarding entry. Destinations below the switch
//! descend into the unique subtree containing them; all others go up with
//!
//! ```text
//! p = ⌊d / ∏_{k≤l} w_k⌋ mod (w_{l+1}·p_{l+1})
//! ```
//!
//! decomposed as `group = p mod w_{l+1}` (upper switches in GUID order) and
//! `cable = ⌊p / w_{l+1}⌋`. The divisor strides over the destinations kept
//! on one port by the levels below; the decomposition interleaves groups
//! first and parallel cables second, which makes the selection coincide,
//! port for port, with the deterministic engine's formula on complete PGFTs
//! — that engine generalises this one to degraded topologies.
//!
//! The engine refuses anything that is not certifiably a generated PGFT:
//! the topology must carry its generator descriptor and match a fresh
//! rebuild exactly.

use thiserror::Error;

use crate::tables::{RoutingTables, SwitchTable, NO_ROUTE};
use crate::topology::{build_pgft, Fabric, LinkDir, PgftError, PgftMeta, PortGroup, Topology};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DmodkError {
    #[error(
        "topology carries no generator descriptor; closed-form routing needs a generated PGFT"
    )]
    NotGenerated,
    #[error("topology does not match its generator descriptor (degraded or hand-edited)")]
    Mismatch,
    #[error("generator descriptor no longer buildable: {0}")]
    Generator(#[from] PgftError),
    #[error("topology and label metadata disagree: {0}")]
    Inconsistent(&'static str),
}

/// Certifies that `topo` is exactly the PGFT its annotation describes and
/// returns the label metadata to route it with. Degradation strips the
/// annotation and hand edits fail the structural comparison, so stale
/// closed-form routing cannot happen silently.
pub fn certify(topo: &Topology) -> Result<PgftMeta, DmodkError> {
    let spec = topo.pgft.as_ref().ok_or(DmodkError::NotGenerated)?;
    let (fresh, meta) = build_pgft(spec)?;
    if &fresh != topo {
        return Err(DmodkError::Mismatch);
    }
    Ok(meta)
}

/// Builds forwarding tables for a certified PGFT from labels alone. The
/// output (deterministic ports and alternatives) is identical to what the
/// deterministic engine computes on the same fabric.
pub fn build_tables(f: &Fabric, meta: &PgftMeta) -> Result<RoutingTables, DmodkError> {
    let num_switches = f.topo.num_switches();
    let num_nodes = f.topo.num_nodes();
    let num_leaves = f.num_leaves();
    if meta.level.len() != num_switches {
        return Err(DmodkError::Inconsistent("switch count differs"));
    }
    let spec = &meta.spec;
    let m1 = spec.m[0] as usize;

    let mut per_switch = Vec::with_capacity(num_switches);
    for s in 0..num_switches {
        let l = meta.level[s] as usize;
        let lo = meta.dest_lo[s];
        let hi = lo + meta.dest_span[s];
        let divisor = meta.cum_w[l];
        let child_span = meta.dest_span[s] / spec.m[l - 1] as usize;
        let ups: Vec<&PortGroup> = f.groups.groups[s]
            .iter()
            .filter(|g| g.dir == LinkDir::Up)
            .collect();
        let downs: Vec<&PortGroup> = f.groups.groups[s]
            .iter()
            .filter(|g| g.dir == LinkDir::Down)
            .collect();
        if l < spec.h && ups.len() != spec.w[l] as usize {
            return Err(DmodkError::Inconsistent("upper group count differs"));
        }
        if l > 1 && downs.len() != spec.m[l - 1] as usize {
            return Err(DmodkError::Inconsistent("lower group count differs"));
        }

        // Alternatives per leaf: the unique child group for descendants, all
        // upper ports for everyone else, nothing for the switch's own leaf.
        let mut alt_offsets = Vec::with_capacity(num_leaves + 1);
        let mut alt_pool: Vec<u16> = Vec::new();
        let all_up_ports: Vec<u16> = ups.iter().flat_map(|g| g.ports.iter().copied()).collect();
        for leaf in 0..num_leaves {
            alt_offsets.push(alt_pool.len() as u32);
            let first_dest = leaf * m1;
            if f.leaf_switches[leaf] == s {
                continue;
            }
            if (lo..hi).contains(&first_dest) {
                let child = (first_dest - lo) / child_span;
                alt_pool.extend_from_slice(&downs[child].ports);
            } else {
                alt_pool.extend_from_slice(&all_up_ports);
            }
        }
        alt_offsets.push(alt_pool.len() as u32);

        let mut ports = vec![NO_ROUTE; num_nodes];
        for (d, port) in ports.iter_mut().enumerate() {
            if (lo..hi).contains(&d) {
                if l == 1 {
                    *port = f.topo.nodes[d].leaf_port;
                } else {
                    let child = (d - lo) / child_span;
                    let cable = (d as u64 / divisor) % spec.p[l - 1];
                    *port = downs[child].ports[cable as usize];
                }
            } else {
                let flat = (d as u64 / divisor) % (spec.w[l] * spec.p[l]);
                let group = (flat % spec.w[l]) as usize;
                let cable = (flat / spec.w[l]) as usize;
                *port = ups[group].ports[cable];
            }
        }
        per_switch.push(SwitchTable {
            ports,
            alt_offsets,
            alt_pool,
        });
    }
    Ok(RoutingTables {
        num_nodes,
        num_leaves,
        per_switch,
    })
}
