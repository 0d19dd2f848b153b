//! Deterministic closed-form routing for (possibly degraded) fat-trees.
//!
//! The engine has two stages:
//!
//! 1. **Preprocessing** — one ascending-rank sweep pushes per-leaf hop costs
//!    and divider candidates upwards, one descending-rank sweep completes the
//!    costs downwards. Costs after the ascending sweep alone are the
//!    *pure-down* costs (every finite entry corresponds to a descent-only
//!    path); a snapshot of them drives the stricter neighbour selection.
//!    Dividers record how many consecutive destinations the switches below
//!    keep on one port before moving to the next, so that each level strides
//!    over destinations at the right granularity.
//! 2. **Table construction** — for each switch and destination, the
//!    qualifying ("closer") port groups are filtered by cost, and the group
//!    and cable are picked by integer division and modulo over the
//!    destination id. No per-path state is kept: the same formula applied to
//!    the same preprocessed values always yields the same tables, regardless
//!    of thread count or traversal order.
//!
//! Costs use a dense `switch x leaf` matrix with `INF` for "no route".
//! Dividers are 64-bit with checked multiplication; overflow is reported,
//! never wrapped.

use thiserror::Error;

use crate::tables::{RoutingTables, SwitchTable, NO_ROUTE};
use crate::topology::{Fabric, Guid, LinkDir};

/// "No route" cost.
pub const INF: u16 = u16::MAX;

/// Dense per-(switch, leaf) hop-cost matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostMatrix {
    num_leaves: usize,
    rows: Vec<Vec<u16>>,
}

/// Pure-down cost matrix: same layout as [`CostMatrix`], but an entry is
/// finite only if the leaf is reachable by descending on every hop.
pub type DownCostMatrix = CostMatrix;

impl CostMatrix {
    pub fn new(num_switches: usize, num_leaves: usize) -> Self {
        CostMatrix {
            num_leaves,
            rows: vec![vec![INF; num_leaves]; num_switches],
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    #[inline]
    pub fn get(&self, s: usize, leaf: u32) -> u16 {
        self.rows[s][leaf as usize]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[u16] {
        &self.rows[s]
    }
}

/// Per-switch dividers (`Π`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DividerMap {
    pi: Vec<u64>,
}

impl DividerMap {
    #[inline]
    pub fn get(&self, s: usize) -> u64 {
        self.pi[s]
    }
}

/// Instrumentation counters: inner-loop scans of each sweep. Both totals are
/// exactly (number of directed up links at group granularity) x (number of
/// leaves), witnessing the linear complexity of the procedure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub up_scans: u64,
    pub down_scans: u64,
}

/// Cost relaxation rule. `StrictImprove` is the production rule (`c+1 <
/// current` — keeps improving already-written entries and is therefore
/// order-independent). `FirstWriteWins` only fills `INF` entries; it is
/// order-dependent and exists to demonstrate, in tests, why the strict rule
/// matters on fat-tree-like graphs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelaxRule {
    StrictImprove,
    FirstWriteWins,
}

/// One divider propagation step, reported by the observed sequential sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DividerPush {
    pub from: usize,
    pub to: usize,
    pub candidate: u64,
    /// False when the candidate lost against an equal-or-larger divider.
    pub applied: bool,
}

/// Everything table construction needs.
#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub costs: CostMatrix,
    pub downcosts: DownCostMatrix,
    pub dividers: DividerMap,
    pub stats: SweepStats,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DmodcError {
    #[error("divider overflow while propagating through switch {0}")]
    DividerOverflow(Guid),
    #[error("divider arithmetic overflow during port selection")]
    SelectOverflow,
}

/// Switches of each rank, ascending rank, ascending GUID within a rank.
/// Isolated switches appear in no level and keep `INF` costs and divider 1.
fn level_order(f: &Fabric) -> Vec<Vec<usize>> {
    let mut levels = vec![Vec::new(); f.ranks.max_rank as usize + 1];
    for s in 0..f.topo.num_switches() {
        if let Some(r) = f.ranks.rank[s] {
            levels[r as usize].push(s);
        }
    }
    levels
}

/// Sequential preprocessing with the production rule.
pub fn preprocess(f: &Fabric) -> Result<Preprocessed, DmodcError> {
    preprocess_observed(f, RelaxRule::StrictImprove, |_| {})
}

/// Sequential preprocessing with a configurable relaxation rule and an
/// observer invoked for every divider propagation step. Switches are
/// processed in ascending (then descending) rank order, ascending GUID within
/// a rank; with `StrictImprove` the outcome does not depend on that order.
pub fn preprocess_observed(
    f: &Fabric,
    rule: RelaxRule,
    mut observe: impl FnMut(DividerPush),
) -> Result<Preprocessed, DmodcError> {
    let num_switches = f.topo.num_switches();
    let num_leaves = f.num_leaves();
    let mut costs = CostMatrix::new(num_switches, num_leaves);
    for (ord, &leaf) in f.leaf_switches.iter().enumerate() {
        costs.rows[leaf][ord] = 0;
    }
    let mut pi = vec![1u64; num_switches];
    let mut stats = SweepStats::default();

    let levels = level_order(f);
    let relax = |current: u16, through: u16, rule: RelaxRule| -> Option<u16> {
        if through >= INF - 1 {
            return None; // unreachable source, or cost would hit the sentinel
        }
        let cand = through + 1;
        let better = match rule {
            RelaxRule::StrictImprove => cand < current,
            RelaxRule::FirstWriteWins => current == INF,
        };
        better.then_some(cand)
    };

    // Ascending sweep: push costs and divider candidates to the switches
    // above. A switch's divider is final before its own level is processed,
    // because only switches strictly below ever write it.
    for level in &levels {
        for &s in level {
            let candidate = pi[s]
                .checked_mul(f.groups.up_count[s] as u64)
                .ok_or(DmodcError::DividerOverflow(f.topo.switches[s].guid))?;
            for g in f.groups.groups[s].iter().filter(|g| g.dir == LinkDir::Up) {
                stats.up_scans += num_leaves as u64;
                for l in 0..num_leaves {
                    if let Some(c) = relax(costs.rows[g.remote][l], costs.rows[s][l], rule) {
                        costs.rows[g.remote][l] = c;
                    }
                }
            }
            for g in f.groups.groups[s].iter().filter(|g| g.dir == LinkDir::Up) {
                let applied = pi[g.remote] < candidate;
                observe(DividerPush {
                    from: s,
                    to: g.remote,
                    candidate,
                    applied,
                });
                if applied {
                    pi[g.remote] = candidate;
                }
            }
        }
    }

    // Costs so far came exclusively from ascending pushes, i.e. every finite
    // entry is the length of a descent-only path from the switch to the leaf.
    let downcosts = costs.clone();

    // Descending sweep: complete the costs through the switches below.
    for level in levels.iter().rev() {
        for &s in level {
            for g in &f.groups.groups[s] {
                if g.dir != LinkDir::Down {
                    continue;
                }
                stats.down_scans += num_leaves as u64;
                for l in 0..num_leaves {
                    if let Some(c) = relax(costs.rows[g.remote][l], costs.rows[s][l], rule) {
                        costs.rows[g.remote][l] = c;
                    }
                }
            }
        }
    }

    Ok(Preprocessed {
        costs,
        downcosts,
        dividers: DividerMap { pi },
        stats,
    })
}

/// Parallel preprocessing. Rewrites both sweeps in pull form — every switch
/// of one level reads only finalised values of the previous level — with a
/// barrier per level, which makes the result bit-identical to the sequential
/// strict sweep for any thread count.
#[cfg(feature = "parallel")]
pub fn preprocess_par(f: &Fabric, pool: &rayon::ThreadPool) -> Result<Preprocessed, DmodcError> {
    use rayon::prelude::*;

    let num_switches = f.topo.num_switches();
    let num_leaves = f.num_leaves();
    let mut costs = CostMatrix::new(num_switches, num_leaves);
    for (ord, &leaf) in f.leaf_switches.iter().enumerate() {
        costs.rows[leaf][ord] = 0;
    }
    let mut pi = vec![1u64; num_switches];
    let mut stats = SweepStats::default();
    let levels = level_order(f);

    pool.install(|| -> Result<(), DmodcError> {
        // Ascending, pull form: each switch takes the minimum over the
        // switches below it, and the largest divider candidate among them.
        for level in levels.iter().skip(1) {
            let mut taken: Vec<(usize, Vec<u16>)> = level
                .iter()
                .map(|&s| (s, std::mem::take(&mut costs.rows[s])))
                .collect();
            let rows = &costs.rows;
            let pi_ref = &pi;
            let groups = &f.groups.groups;
            let results: Vec<Result<(u64, u64), DmodcError>> = taken
                .par_iter_mut()
                .map(|(s, row)| {
                    let mut best_pi = 1u64;
                    let mut scans = 0u64;
                    for g in &groups[*s] {
                        if g.dir != LinkDir::Down {
                            continue;
                        }
                        scans += num_leaves as u64;
                        let src = &rows[g.remote];
                        for l in 0..num_leaves {
                            let through = src[l];
                            if through != INF && through + 1 < row[l] {
                                row[l] = through + 1;
                            }
                        }
                        let below_ups = f.groups.up_count[g.remote] as u64;
                        let cand = pi_ref[g.remote]
                            .checked_mul(below_ups)
                            .ok_or(DmodcError::DividerOverflow(f.topo.switches[g.remote].guid))?;
                        best_pi = best_pi.max(cand);
                    }
                    Ok((best_pi, scans))
                })
                .collect();
            for ((s, row), res) in taken.into_iter().zip(results) {
                let (best_pi, scans) = res?;
                costs.rows[s] = row;
                pi[s] = best_pi;
                stats.up_scans += scans;
            }
        }
        Ok(())
    })?;

    let downcosts = costs.clone();

    pool.install(|| {
        // Descending, pull form: minimum over the switches above.
        for level in levels.iter().rev().skip(1) {
            let mut taken: Vec<(usize, Vec<u16>)> = level
                .iter()
                .map(|&s| (s, std::mem::take(&mut costs.rows[s])))
                .collect();
            let rows = &costs.rows;
            let groups = &f.groups.groups;
            let scans: u64 = taken
                .par_iter_mut()
                .map(|(s, row)| {
                    let mut scans = 0u64;
                    for g in &groups[*s] {
                        if g.dir != LinkDir::Up {
                            continue;
                        }
                        scans += num_leaves as u64;
                        let src = &rows[g.remote];
                        for l in 0..num_leaves {
                            let through = src[l];
                            if through != INF && through + 1 < row[l] {
                                row[l] = through + 1;
                            }
                        }
                    }
                    scans
                })
                .sum();
            for (s, row) in taken {
                costs.rows[s] = row;
            }
            stats.down_scans += scans;
        }
    });

    Ok(Preprocessed {
        costs,
        downcosts,
        dividers: DividerMap { pi },
        stats,
    })
}

/// Neighbour selection policy for table construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RouteMode {
    /// A group qualifies iff its remote switch has a strictly smaller
    /// up-down cost. Sufficient on PGFTs, degraded or not.
    Plain,
    /// Downward groups must be strictly closer *by pure-down cost*, upward
    /// groups by up-down cost. Guarantees up*/down* (deadlock-free) paths on
    /// any levelled topology; identical to `Plain` on PGFTs. Default.
    UpDownStrict,
}

/// Qualifying ("closer") groups of switch `s` towards leaf ordinal `leaf`,
/// as indices into `f.groups.groups[s]` — i.e. ordered by remote GUID. Empty
/// when the leaf is unreachable or `s` is that very leaf. On a levelled
/// topology the result is never a mix of up and down groups: a finite
/// pure-down cost pins `c_s` to the switch's own rank, which no up neighbour
/// can beat.
pub fn closer_groups(
    f: &Fabric,
    pre: &Preprocessed,
    s: usize,
    leaf: u32,
    mode: RouteMode,
) -> Vec<u16> {
    let c_s = pre.costs.get(s, leaf);
    if c_s == INF || c_s == 0 {
        return Vec::new();
    }
    f.groups.groups[s]
        .iter()
        .enumerate()
        .filter(|(_, g)| {
            let closer_by = |m: &CostMatrix| m.get(g.remote, leaf) < c_s;
            match (mode, g.dir) {
                (RouteMode::Plain, _) => closer_by(&pre.costs),
                (RouteMode::UpDownStrict, LinkDir::Up) => closer_by(&pre.costs),
                (RouteMode::UpDownStrict, LinkDir::Down) => closer_by(&pre.downcosts),
            }
        })
        .map(|(i, _)| i as u16)
        .collect()
}

/// Selected group position and cable position for one routing entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PortChoice {
    pub group_pos: usize,
    pub port_pos: usize,
}

/// Closed-form port selection: among the qualifying groups (sizes given in
/// group order), destination `d` picks group `⌊d/Π⌋ mod #C` and, within it,
/// cable `⌊d/(Π·#C)⌋ mod #g`. Consecutive destinations therefore cycle
/// through groups first and parallel cables second, at a stride of `Π`.
pub fn route_entry(d: u64, divider: u64, group_sizes: &[u16]) -> Result<PortChoice, DmodcError> {
    debug_assert!(!group_sizes.is_empty());
    debug_assert!(divider >= 1);
    let nc = group_sizes.len() as u64;
    let group_pos = ((d / divider) % nc) as usize;
    let stride = divider.checked_mul(nc).ok_or(DmodcError::SelectOverflow)?;
    let port_pos = ((d / stride) % group_sizes[group_pos] as u64) as usize;
    Ok(PortChoice {
        group_pos,
        port_pos,
    })
}

/// Forwarding tables plus an account of the entries that could not be
/// produced.
#[derive(Clone, Debug)]
pub struct RouteBuild {
    pub tables: RoutingTables,
    /// `(switch, destination)` pairs whose cost is finite yet no neighbour
    /// group qualifies. A finite cost guarantees a strictly closer neighbour
    /// along a shortest path, so this list must stay empty; anything in it
    /// signals a bug in preprocessing or selection.
    pub gaps: Vec<(usize, usize)>,
    /// Entries left empty because the switch cannot reach the destination's
    /// leaf at all. Expected on degraded fabrics: a switch may be stranded
    /// from part of the fabric while every leaf pair stays connected, and
    /// routed traffic then never passes through it for those destinations.
    pub unroutable: u64,
}

fn build_switch_table(
    f: &Fabric,
    pre: &Preprocessed,
    mode: RouteMode,
    s: usize,
    gaps: &mut Vec<(usize, usize)>,
    unroutable: &mut u64,
) -> Result<SwitchTable, DmodcError> {
    let num_nodes = f.topo.num_nodes();
    let num_leaves = f.num_leaves();
    let mut ports = vec![NO_ROUTE; num_nodes];
    let mut alt_offsets = Vec::with_capacity(num_leaves + 1);
    let mut alt_pool = Vec::new();
    // One closer-group pass per leaf; every destination of that leaf reuses it.
    let mut chosen: Vec<(Vec<u16>, Vec<u16>)> = Vec::with_capacity(num_leaves);
    for leaf in 0..num_leaves as u32 {
        let c = closer_groups(f, pre, s, leaf, mode);
        debug_assert!(
            mode != RouteMode::UpDownStrict || {
                let dirs: Vec<_> = c
                    .iter()
                    .map(|&i| f.groups.groups[s][i as usize].dir)
                    .collect();
                dirs.windows(2).all(|w| w[0] == w[1])
            },
            "strict closer groups must not mix directions on a levelled topology"
        );
        alt_offsets.push(alt_pool.len() as u32);
        let sizes: Vec<u16> = c
            .iter()
            .map(|&i| f.groups.groups[s][i as usize].ports.len() as u16)
            .collect();
        for &i in &c {
            alt_pool.extend_from_slice(&f.groups.groups[s][i as usize].ports);
        }
        chosen.push((c, sizes));
    }
    alt_offsets.push(alt_pool.len() as u32);

    let divider = pre.dividers.get(s);
    for (d, port) in ports.iter_mut().enumerate().take(num_nodes) {
        let node = &f.topo.nodes[d];
        if node.leaf == s {
            *port = node.leaf_port;
            continue;
        }
        let leaf = f.leaf_of_dest(d);
        let (c, sizes) = &chosen[leaf as usize];
        if c.is_empty() {
            if pre.costs.get(s, leaf) == INF {
                *unroutable += 1;
            } else {
                gaps.push((s, d));
            }
            continue;
        }
        let choice = route_entry(d as u64, divider, sizes)?;
        let group = &f.groups.groups[s][c[choice.group_pos] as usize];
        *port = group.ports[choice.port_pos];
    }
    Ok(SwitchTable {
        ports,
        alt_offsets,
        alt_pool,
    })
}

/// Sequential table construction.
pub fn build_tables(
    f: &Fabric,
    pre: &Preprocessed,
    mode: RouteMode,
) -> Result<RouteBuild, DmodcError> {
    let mut gaps = Vec::new();
    let mut unroutable = 0;
    let mut per_switch = Vec::with_capacity(f.topo.num_switches());
    for s in 0..f.topo.num_switches() {
        per_switch.push(build_switch_table(
            f,
            pre,
            mode,
            s,
            &mut gaps,
            &mut unroutable,
        )?);
    }
    Ok(RouteBuild {
        tables: RoutingTables {
            num_nodes: f.topo.num_nodes(),
            num_leaves: f.num_leaves(),
            per_switch,
        },
        gaps,
        unroutable,
    })
}

/// Parallel table construction, one task per switch. Entries of different
/// switches are disjoint, so the result is identical to [`build_tables`].
#[cfg(feature = "parallel")]
pub fn build_tables_par(
    f: &Fabric,
    pre: &Preprocessed,
    mode: RouteMode,
    pool: &rayon::ThreadPool,
) -> Result<RouteBuild, DmodcError> {
    use rayon::prelude::*;

    type PerSwitch = (SwitchTable, Vec<(usize, usize)>, u64);
    let results: Vec<Result<PerSwitch, DmodcError>> = pool.install(|| {
        (0..f.topo.num_switches())
            .into_par_iter()
            .map(|s| {
                let mut gaps = Vec::new();
                let mut unroutable = 0;
                let table = build_switch_table(f, pre, mode, s, &mut gaps, &mut unroutable)?;
                Ok((table, gaps, unroutable))
            })
            .collect()
    });
    let mut per_switch = Vec::with_capacity(f.topo.num_switches());
    let mut gaps = Vec::new();
    let mut unroutable = 0;
    for r in results {
        let (table, mut g, u) = r?;
        per_switch.push(table);
        gaps.append(&mut g);
        unroutable += u;
    }
    Ok(RouteBuild {
        tables: RoutingTables {
            num_nodes: f.topo.num_nodes(),
            num_leaves: f.num_leaves(),
            per_switch,
        },
        gaps,
        unroutable,
    })
}
