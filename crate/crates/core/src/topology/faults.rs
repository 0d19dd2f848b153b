//! Seeded degradation: random removal of switches and cables.
//!
//! Removal draws from a deterministic generator, so a (topology, fault spec)
//! pair always produces the same degraded topology. Terminal nodes are never
//! detached: only non-leaf switches and switch-to-switch cables are eligible.
//!
//! With `preserve_leaf_connectivity`, every candidate removal is trialled and
//! kept only if all leaf pairs still reach each other along up-then-down
//! paths (the reachability notion routing actually uses). Rejected
//! candidates leave the eligible pool permanently — removing more elements
//! never restores connectivity — so the draw either reaches the requested
//! count or fails with the achieved one. The trial check walks the whole
//! graph per candidate, which is fine for the moderate sizes degradation
//! studies use.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use super::{compute_ranks, Guid, PortTarget, Topology};

/// How much to remove: an absolute count or a fraction of the eligible pool
/// (rounded to the nearest integer). Fractions are resolved against the pool
/// at the start of the respective phase; switches are removed before cables,
/// so the cable pool excludes cables already gone with a switch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Amount {
    Count(u64),
    Fraction(f64),
}

impl Default for Amount {
    fn default() -> Self {
        Amount::Count(0)
    }
}

impl Amount {
    fn resolve(&self, available: usize) -> Result<u64, FaultError> {
        match *self {
            Amount::Count(n) => Ok(n),
            Amount::Fraction(f) => {
                if !(0.0..=1.0).contains(&f) {
                    return Err(FaultError::BadFraction(f));
                }
                Ok((f * available as f64).round() as u64)
            }
        }
    }
}

impl FromStr for Amount {
    type Err = String;

    /// `"3"` is a count; anything with a decimal point (`"0.1"`) a fraction.
    fn from_str(s: &str) -> Result<Self, String> {
        if s.contains('.') {
            s.parse::<f64>()
                .map(Amount::Fraction)
                .map_err(|_| format!("bad fraction `{s}`"))
        } else {
            s.parse::<u64>()
                .map(Amount::Count)
                .map_err(|_| format!("bad count `{s}`"))
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FaultSpec {
    pub remove_switches: Amount,
    pub remove_links: Amount,
    pub seed: u64,
    pub preserve_leaf_connectivity: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum FaultError {
    #[error("fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("cannot remove {requested} {what}: only {available} eligible")]
    NotEnough {
        what: &'static str,
        requested: u64,
        available: u64,
    },
    #[error(
        "could not remove {requested} {what} while preserving leaf connectivity; removed {achieved}"
    )]
    Unsatisfiable {
        what: &'static str,
        requested: u64,
        achieved: u64,
    },
}

/// One removed element, in removal order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Removed {
    Switch(Guid),
    Link { a: (Guid, u16), b: (Guid, u16) },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RemovalLog {
    pub entries: Vec<Removed>,
}

impl fmt::Display for RemovalLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            match e {
                Removed::Switch(g) => writeln!(f, "switch {g}")?,
                Removed::Link { a, b } => writeln!(f, "link {}:{} {}:{}", a.0, a.1, b.0, b.1)?,
            }
        }
        Ok(())
    }
}

/// True iff every leaf pair is joined by an up-then-down path. Used as the
/// acceptance check for trial removals; independent of the routing engine.
fn leaves_updown_connected(topo: &Topology) -> bool {
    let ranks = match compute_ranks(topo) {
        Ok(r) => r,
        Err(_) => return false,
    };
    let leaves = topo.leaf_switches();
    let n = topo.num_switches();
    for &start in &leaves {
        // State: (switch, already descending). A path may climb, then sink.
        let mut seen = vec![[false; 2]; n];
        let mut queue = std::collections::VecDeque::new();
        seen[start][0] = true;
        queue.push_back((start, false));
        let mut reached = 1usize;
        while let Some((s, descending)) = queue.pop_front() {
            let rs = ranks.rank[s].expect("reachable switches are ranked");
            for port in &topo.switches[s].ports {
                if let PortTarget::Switch { peer, .. } = *port {
                    let rp = ranks.rank[peer].expect("linked switches are ranked");
                    let goes_up = rp > rs;
                    if goes_up && descending {
                        continue;
                    }
                    let next_desc = !goes_up;
                    if !seen[peer][next_desc as usize] {
                        seen[peer][next_desc as usize] = true;
                        if topo.leaf[peer] && !seen[peer][(!next_desc) as usize] {
                            reached += 1;
                        }
                        queue.push_back((peer, next_desc));
                    }
                }
            }
        }
        if reached < leaves.len() {
            return false;
        }
    }
    true
}

fn unlink_switch(topo: &mut Topology, s: usize) {
    let ports = std::mem::take(&mut topo.switches[s].ports);
    for port in &ports {
        if let PortTarget::Switch { peer, peer_port } = *port {
            topo.switches[peer].ports[peer_port as usize] = PortTarget::Free;
        }
    }
}

fn unlink_cable(topo: &mut Topology, s: usize, p: u16) {
    if let PortTarget::Switch { peer, peer_port } = topo.switches[s].ports[p as usize] {
        topo.switches[s].ports[p as usize] = PortTarget::Free;
        topo.switches[peer].ports[peer_port as usize] = PortTarget::Free;
    }
}

/// Applies `spec` to a copy of `topo`, returning the degraded topology and
/// the removal log. The generator annotation is dropped as soon as anything
/// was actually removed, so degraded files are never mistaken for pristine
/// generated PGFTs.
pub fn inject_faults(
    topo: &Topology,
    spec: &FaultSpec,
) -> Result<(Topology, RemovalLog), FaultError> {
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut work = topo.clone();
    let mut removed_flag = vec![false; topo.num_switches()];
    let mut log = RemovalLog::default();

    // Phase 1: switches (non-leaf only; removing a leaf would strand nodes).
    let mut pool: Vec<usize> = (0..topo.num_switches())
        .filter(|&s| !topo.leaf[s])
        .collect();
    let want_switches = spec.remove_switches.resolve(pool.len())?;
    if want_switches > pool.len() as u64 {
        return Err(FaultError::NotEnough {
            what: "switches",
            requested: want_switches,
            available: pool.len() as u64,
        });
    }
    let mut achieved = 0u64;
    while achieved < want_switches {
        if pool.is_empty() {
            return Err(FaultError::Unsatisfiable {
                what: "switches",
                requested: want_switches,
                achieved,
            });
        }
        let pick = pool.swap_remove(rng.gen_range(0..pool.len()));
        if spec.preserve_leaf_connectivity {
            let mut trial = work.clone();
            unlink_switch(&mut trial, pick);
            if !leaves_updown_connected(&trial) {
                continue; // permanently out of the pool
            }
            work = trial;
        } else {
            unlink_switch(&mut work, pick);
        }
        removed_flag[pick] = true;
        log.entries.push(Removed::Switch(topo.switches[pick].guid));
        achieved += 1;
    }

    // Phase 2: individual cables, drawn from what survived phase 1.
    let mut cables: Vec<(usize, u16)> = Vec::new();
    for (s, sw) in work.switches.iter().enumerate() {
        for (p, port) in sw.ports.iter().enumerate() {
            if let PortTarget::Switch { peer, peer_port } = *port {
                if (s, p as u16) < (peer, peer_port) {
                    cables.push((s, p as u16));
                }
            }
        }
    }
    let want_links = spec.remove_links.resolve(cables.len())?;
    if want_links > cables.len() as u64 {
        return Err(FaultError::NotEnough {
            what: "links",
            requested: want_links,
            available: cables.len() as u64,
        });
    }
    let mut achieved = 0u64;
    while achieved < want_links {
        if cables.is_empty() {
            return Err(FaultError::Unsatisfiable {
                what: "links",
                requested: want_links,
                achieved,
            });
        }
        let (s, p) = cables.swap_remove(rng.gen_range(0..cables.len()));
        let (peer, peer_port) = match work.switches[s].ports[p as usize] {
            PortTarget::Switch { peer, peer_port } => (peer, peer_port),
            _ => unreachable!("cable list was built from live ports"),
        };
        if spec.preserve_leaf_connectivity {
            let mut trial = work.clone();
            unlink_cable(&mut trial, s, p);
            if !leaves_updown_connected(&trial) {
                continue;
            }
            work = trial;
        } else {
            unlink_cable(&mut work, s, p);
        }
        log.entries.push(Removed::Link {
            a: (work.switches[s].guid, p),
            b: (work.switches[peer].guid, peer_port),
        });
        achieved += 1;
    }

    // Rebuild without the removed switches; surviving elements keep their
    // GUIDs and port numbers (trailing unwired ports are trimmed so the
    // result round-trips through the file format unchanged).
    let mut new_index = vec![usize::MAX; topo.num_switches()];
    let mut switches = Vec::new();
    let mut leaf = Vec::new();
    for (s, mut sw) in work.switches.into_iter().enumerate() {
        if removed_flag[s] {
            continue;
        }
        new_index[s] = switches.len();
        while sw.ports.last() == Some(&PortTarget::Free) {
            sw.ports.pop();
        }
        switches.push(sw);
        leaf.push(work.leaf[s]);
    }
    for sw in &mut switches {
        for port in &mut sw.ports {
            if let PortTarget::Switch { peer, .. } = port {
                *peer = new_index[*peer];
            }
        }
    }
    let mut nodes = work.nodes;
    for n in &mut nodes {
        n.leaf = new_index[n.leaf];
    }
    let pgft = if log.entries.is_empty() {
        work.pgft
    } else {
        None
    };
    Ok((Topology::from_parts(switches, nodes, leaf, pgft), log))
}
