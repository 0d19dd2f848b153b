//! Fixtures and independent oracles shared by the integration tests.
//!
//! The oracles deliberately use a different algorithmic strategy (explicit
//! breadth-first search over a two-phase state graph) than the library's
//! levelled sweeps, so agreement between the two is meaningful.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use pgft_route::dmodc::INF;
use pgft_route::topology::PortTarget;
use pgft_route::Fabric;

/// Three-level PGFT with two pods of two leaves, two middle planes with
/// doubled leaf cables, and three roots: the canonical worked example.
pub const REFERENCE_DESCRIPTOR: &str = "3;2.2.3;1.2.2;1.2.1";

/// Six-switch fat-tree-like graph (not a PGFT). Two leaves (10, 11); the
/// left leaf reaches the right one either via the direct middle switch 22
/// (2 hops) or over the top 30 (4 hops). Strict cost relaxation must keep
/// the 2-hop value at 10 and route 20 through the top (cost 3).
pub const RELAXATION_FABRIC: &str =
    "switch 10\nswitch 11\nswitch 20\nswitch 21\nswitch 22\nswitch 30\n\
     node a0 0 leaf=10 port=0\n\
     node a1 1 leaf=11 port=0\n\
     link 10:1 20:1\nlink 10:2 22:0\n\
     link 11:1 21:1\nlink 11:2 22:1\n\
     link 20:0 30:0\nlink 21:0 30:1\n";

/// Divider-propagation fixture: three bottom switches 10, 11, 12 whose
/// leaves give them dividers 3, 2 and 3 (three, two and three upswitches
/// respectively; 13 and 14 absorb the extra uplinks and have no parents).
/// The bottoms push π = 3·2 = 6, π = 2·2 = 4 and π = 3·3 = 9 to the tops
/// 20, 21, 22 in GUID order, so 21 sees 6 before the losing candidate 4
/// and all tops finish at 9.
pub const DIVIDER_FABRIC: &str = "switch 1\nswitch 2\nswitch 3\n\
     switch 10\nswitch 11\nswitch 12\nswitch 13\nswitch 14\n\
     switch 20\nswitch 21\nswitch 22\n\
     node a 0 leaf=1 port=0\n\
     node b 1 leaf=2 port=0\n\
     node c 2 leaf=3 port=0\n\
     link 1:1 10:0\nlink 1:2 13:0\nlink 1:3 14:0\n\
     link 2:1 11:0\nlink 2:2 13:1\n\
     link 3:1 12:0\nlink 3:2 13:2\nlink 3:3 14:1\n\
     link 10:1 20:0\nlink 10:2 21:0\n\
     link 11:1 21:1\nlink 11:2 22:0\n\
     link 12:1 20:1\nlink 12:2 21:2\nlink 12:3 22:1\n";

/// Port-selection fixture: switch 20 has divider 4 (its leaf 10 has four
/// upswitches) and, towards the far leaf 11, two qualifying up groups of
/// one cable (to 30) and three cables (to 31). Leaf 10 holds destinations
/// 0–19 so that destination 20 lives behind the far leaf.
pub fn port_selection_text() -> String {
    let mut text = String::from(
        "switch 10\nswitch 11\nswitch 20\nswitch 21\nswitch 22\nswitch 23\n\
         switch 24\nswitch 30\nswitch 31\n",
    );
    for d in 0..20 {
        writeln!(text, "node {:x} {d} leaf=10 port={d}", 0x100 + d).unwrap();
    }
    text.push_str("node 114 20 leaf=11 port=0\n");
    text.push_str(
        "link 10:20 20:0\nlink 10:21 21:0\nlink 10:22 22:0\nlink 10:23 23:0\n\
         link 11:1 24:2\n\
         link 20:1 30:0\nlink 20:2 31:0\nlink 20:3 31:1\nlink 20:4 31:2\n\
         link 24:0 30:1\nlink 24:1 31:3\n",
    );
    text
}

/// `(ups, downs)` neighbour sets per switch, derived from raw ports and
/// ranks only (parallel cables collapse into one neighbour).
fn neighbours(f: &Fabric) -> Vec<(BTreeSet<usize>, BTreeSet<usize>)> {
    let n = f.topo.num_switches();
    let mut out = vec![(BTreeSet::new(), BTreeSet::new()); n];
    for (s, sw) in f.topo.switches.iter().enumerate() {
        for target in &sw.ports {
            if let PortTarget::Switch { peer, .. } = *target {
                if let (Some(rs), Some(rp)) = (f.ranks.rank[s], f.ranks.rank[peer]) {
                    if rp == rs + 1 {
                        out[s].0.insert(peer);
                    } else if rs == rp + 1 {
                        out[s].1.insert(peer);
                    }
                }
            }
        }
    }
    out
}

/// Per leaf ordinal, the exact shortest up-then-down distance from every
/// switch, and the pure-down distance, via BFS over a two-phase state
/// graph walked in reverse from the destination leaf: phase 0 climbs (its
/// switches can descend straight to the leaf), phase 1 has committed to the
/// final descent (its switches climb first).
pub fn cost_oracle(f: &Fabric) -> (Vec<Vec<u16>>, Vec<Vec<u16>>) {
    let n = f.topo.num_switches();
    let nbrs = neighbours(f);
    let mut updown = Vec::with_capacity(f.leaf_switches.len());
    let mut down = Vec::with_capacity(f.leaf_switches.len());
    for &leaf in &f.leaf_switches {
        let mut dist = vec![[INF; 2]; n];
        let mut queue = VecDeque::new();
        dist[leaf][0] = 0;
        queue.push_back((leaf, 0usize));
        while let Some((x, phase)) = queue.pop_front() {
            let d = dist[x][phase] + 1;
            if phase == 0 {
                for &y in &nbrs[x].0 {
                    if dist[y][0] == INF {
                        dist[y][0] = d;
                        queue.push_back((y, 0));
                    }
                }
            }
            for &y in &nbrs[x].1 {
                if dist[y][1] == INF {
                    dist[y][1] = d;
                    queue.push_back((y, 1));
                }
            }
        }
        updown.push((0..n).map(|s| dist[s][0].min(dist[s][1])).collect());
        down.push((0..n).map(|s| dist[s][0]).collect());
    }
    (updown, down)
}

/// The degradation study family: everything at or below a 64-node,
/// quad-radix three-level PGFT.
pub const DEGRADATION_FAMILY: &[&str] = &[
    "2;2.2;1.2;1.1",
    "2;4.4;1.4;1.1",
    "2;4.4;1.4;1.2",
    "3;2.2.2;1.2.2;1.1.1",
    REFERENCE_DESCRIPTOR,
    "3;2.4.4;1.2.4;1.2.1",
    "3;4.4.4;1.4.4;1.1.1",
];
