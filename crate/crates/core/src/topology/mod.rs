//! Fabric topology model: switches, terminal nodes, links, levels.
//!
//! A topology is a port-level multigraph. Switches are stored sorted by GUID,
//! terminal nodes sorted by their dense destination id `d`; both orders are
//! relied upon throughout the crate (iteration order == GUID order).
//!
//! Levelling is recovered from the graph itself: leaf switches (those with
//! attached nodes) anchor rank 0 and every other switch takes its BFS hop
//! distance to the nearest leaf. Adjacent switches must end up exactly one
//! rank apart, otherwise the graph is not a levelled fat-tree and routing is
//! refused.

mod faults;
mod file;
mod pgft;

pub use faults::{inject_faults, Amount, FaultError, FaultSpec, RemovalLog, Removed};
pub use file::{parse_topology, serialize_topology, ParseError, ParseErrorKind};
pub use pgft::{build_pgft, PgftError, PgftMeta, PgftSpec};

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// Globally unique identifier of a switch or node port. Rendered in lowercase
/// hexadecimal without a prefix, as in fabric management tooling.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Guid(pub u64);

impl fmt::Display for Guid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:x}", self.0)
    }
}

impl fmt::Debug for Guid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Guid({:x})", self.0)
    }
}

impl std::str::FromStr for Guid {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        u64::from_str_radix(s, 16).map(Guid)
    }
}

/// What sits on the far side of a switch port.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PortTarget {
    /// Unwired (or un-wired by degradation). Port numbers stay stable when a
    /// link is removed, so forwarding-table port indices never shift.
    Free,
    /// Another switch, with the peer's local port number.
    Switch { peer: usize, peer_port: u16 },
    /// A terminal node (index into [`Topology::nodes`]).
    Node { node: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Switch {
    pub guid: Guid,
    /// Dense port array; index == local port number.
    pub ports: Vec<PortTarget>,
}

impl Switch {
    pub fn has_node_port(&self) -> bool {
        self.ports
            .iter()
            .any(|p| matches!(p, PortTarget::Node { .. }))
    }
}

/// A terminal (compute) node, attached to exactly one leaf switch port.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub guid: Guid,
    /// Dense destination id; `topology.nodes[d].dest == d`.
    pub dest: usize,
    /// Index of the leaf switch this node hangs off.
    pub leaf: usize,
    /// Local port number on that leaf.
    pub leaf_port: u16,
}

/// Port-level fabric graph plus optional generator metadata.
#[derive(Clone, Debug)]
pub struct Topology {
    /// Sorted by ascending GUID.
    pub switches: Vec<Switch>,
    /// Sorted by ascending destination id (dense `0..nodes.len()`).
    pub nodes: Vec<Node>,
    /// Leaf anchors, fixed at construction time: `leaf[s]` is true iff switch
    /// `s` had attached nodes when the topology was built or parsed.
    pub leaf: Vec<bool>,
    /// Generator descriptor when this topology is a pristine generated PGFT.
    /// Cleared by degradation so that closed-form engines refuse stale input.
    pub pgft: Option<PgftSpec>,
    guid_index: HashMap<Guid, usize>,
}

impl PartialEq for Topology {
    fn eq(&self, other: &Self) -> bool {
        self.switches == other.switches
            && self.nodes == other.nodes
            && self.leaf == other.leaf
            && self.pgft == other.pgft
    }
}

impl Eq for Topology {}

impl Topology {
    /// Assembles a topology from parts, rebuilding the GUID lookup table.
    /// Callers must uphold the ordering invariants (switches by GUID, nodes
    /// dense by `dest`); the named constructors in this module all do.
    pub(crate) fn from_parts(
        switches: Vec<Switch>,
        nodes: Vec<Node>,
        leaf: Vec<bool>,
        pgft: Option<PgftSpec>,
    ) -> Self {
        let guid_index = switches
            .iter()
            .enumerate()
            .map(|(i, s)| (s.guid, i))
            .collect();
        Topology {
            switches,
            nodes,
            leaf,
            pgft,
            guid_index,
        }
    }

    pub fn switch_index(&self, guid: Guid) -> Option<usize> {
        self.guid_index.get(&guid).copied()
    }

    pub fn num_switches(&self) -> usize {
        self.switches.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Indices of leaf switches, ascending (== ascending GUID).
    pub fn leaf_switches(&self) -> Vec<usize> {
        (0..self.switches.len()).filter(|&s| self.leaf[s]).collect()
    }

    /// Directed switch-to-switch link count (each cable counted once per
    /// direction, parallel cables separately).
    pub fn directed_switch_links(&self) -> u64 {
        self.switches
            .iter()
            .flat_map(|sw| sw.ports.iter())
            .filter(|p| matches!(p, PortTarget::Switch { .. }))
            .count() as u64
    }
}

/// Rank assignment recovered from leaf anchors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ranks {
    /// `rank[s]` is `None` for switches unreachable from every leaf; such
    /// switches are excluded from routing.
    pub rank: Vec<Option<u16>>,
    pub max_rank: u16,
    /// Switches with `rank == None`, ascending.
    pub isolated: Vec<usize>,
}

impl Ranks {
    /// Number of populated levels (`max_rank + 1`), the `h` of path-length
    /// bounds.
    pub fn height(&self) -> u16 {
        self.max_rank + 1
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("topology has no leaf switches (no attached nodes)")]
    NoLeaves,
    #[error("link between {a} and {b} joins two rank-{rank} switches; not a levelled fat-tree")]
    SameRankLink { a: Guid, b: Guid, rank: u16 },
}

/// Assigns every switch its hop distance to the nearest leaf (multi-source
/// BFS from all leaf anchors) and checks the levelling invariant: adjacent
/// switches differ by exactly one rank.
pub fn compute_ranks(topo: &Topology) -> Result<Ranks, TopologyError> {
    let n = topo.switches.len();
    let mut rank: Vec<Option<u16>> = vec![None; n];
    let mut queue = VecDeque::new();
    for (s, is_leaf) in topo.leaf.iter().enumerate() {
        if *is_leaf {
            rank[s] = Some(0);
            queue.push_back(s);
        }
    }
    if queue.is_empty() {
        return Err(TopologyError::NoLeaves);
    }
    while let Some(s) = queue.pop_front() {
        let r = rank[s].expect("queued switches are ranked");
        for port in &topo.switches[s].ports {
            if let PortTarget::Switch { peer, .. } = *port {
                if rank[peer].is_none() {
                    rank[peer] = Some(r + 1);
                    queue.push_back(peer);
                }
            }
        }
    }
    // Levelling check: every cable must join consecutive ranks.
    for (s, sw) in topo.switches.iter().enumerate() {
        for port in &sw.ports {
            if let PortTarget::Switch { peer, .. } = *port {
                if let (Some(a), Some(b)) = (rank[s], rank[peer]) {
                    if a == b {
                        return Err(TopologyError::SameRankLink {
                            a: sw.guid.min(topo.switches[peer].guid),
                            b: sw.guid.max(topo.switches[peer].guid),
                            rank: a,
                        });
                    }
                }
            }
        }
    }
    let isolated: Vec<usize> = (0..n).filter(|&s| rank[s].is_none()).collect();
    for &s in &isolated {
        log::warn!(
            "switch {} is unreachable from every leaf; excluded from routing",
            topo.switches[s].guid
        );
    }
    let max_rank = rank.iter().flatten().copied().max().unwrap_or(0);
    Ok(Ranks {
        rank,
        max_rank,
        isolated,
    })
}

/// Direction of a port group relative to the levelling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkDir {
    Up,
    Down,
}

/// All parallel ports of one switch that lead to the same remote switch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortGroup {
    pub remote: usize,
    pub dir: LinkDir,
    /// Local port numbers, ascending.
    pub ports: Vec<u16>,
}

/// Per-switch port groups, each switch's list sorted by remote GUID.
///
/// The ordering is a pure function of the topology: it never depends on
/// insertion order, BFS traversal order or hashing.
#[derive(Clone, Debug)]
pub struct PortGroups {
    pub groups: Vec<Vec<PortGroup>>,
    /// Number of upward groups (distinct upper switches) per switch.
    pub up_count: Vec<u32>,
}

/// Groups each ranked switch's switch-to-switch ports by remote switch.
/// Isolated switches get an empty group list. Node ports are not grouped;
/// terminal hops are handled separately by table construction.
pub fn build_port_groups(topo: &Topology, ranks: &Ranks) -> PortGroups {
    let n = topo.switches.len();
    let mut groups = Vec::with_capacity(n);
    let mut up_count = Vec::with_capacity(n);
    for s in 0..n {
        if ranks.rank[s].is_none() {
            groups.push(Vec::new());
            up_count.push(0);
            continue;
        }
        // Switch indices ascend with GUID, so a BTreeMap keyed by the remote
        // index yields groups sorted by remote GUID.
        let mut by_remote: BTreeMap<usize, Vec<u16>> = BTreeMap::new();
        for (p, port) in topo.switches[s].ports.iter().enumerate() {
            if let PortTarget::Switch { peer, .. } = *port {
                by_remote.entry(peer).or_default().push(p as u16);
            }
        }
        let list: Vec<PortGroup> = by_remote
            .into_iter()
            .map(|(remote, ports)| {
                let dir = if ranks.rank[remote] > ranks.rank[s] {
                    LinkDir::Up
                } else {
                    LinkDir::Down
                };
                PortGroup { remote, dir, ports }
            })
            .collect();
        up_count.push(list.iter().filter(|g| g.dir == LinkDir::Up).count() as u32);
        groups.push(list);
    }
    PortGroups { groups, up_count }
}

/// A topology prepared for routing: ranks, port groups and the leaf index.
#[derive(Clone, Debug)]
pub struct Fabric {
    pub topo: Topology,
    pub ranks: Ranks,
    pub groups: PortGroups,
    /// Leaf switch indices, ascending; position == leaf ordinal.
    pub leaf_switches: Vec<usize>,
    /// Inverse of `leaf_switches`: switch index -> leaf ordinal.
    pub leaf_ordinal: Vec<Option<u32>>,
}

impl Fabric {
    pub fn prepare(topo: Topology) -> Result<Fabric, TopologyError> {
        let ranks = compute_ranks(&topo)?;
        let groups = build_port_groups(&topo, &ranks);
        let leaf_switches = topo.leaf_switches();
        let mut leaf_ordinal = vec![None; topo.switches.len()];
        for (ord, &s) in leaf_switches.iter().enumerate() {
            leaf_ordinal[s] = Some(ord as u32);
        }
        Ok(Fabric {
            topo,
            ranks,
            groups,
            leaf_switches,
            leaf_ordinal,
        })
    }

    pub fn num_leaves(&self) -> usize {
        self.leaf_switches.len()
    }

    /// Leaf ordinal of the leaf switch that node `d` hangs off.
    pub fn leaf_of_dest(&self, d: usize) -> u32 {
        self.leaf_ordinal[self.topo.nodes[d].leaf].expect("node leaves are leaf switches")
    }
}
