//! Forwarding tables and their plain-text dump format.
//!
//! ```text
//! table <switch-guid-hex>
//! dest <node-guid-hex> d=<int> port=<int> alts=<int,int,...>
//! ```
//!
//! One `table` section per switch (ascending GUID, present even when empty),
//! one `dest` line per routable destination (ascending `d`). `port` is the
//! deterministic choice; `alts` lists every legal alternative (the ports of
//! all qualifying groups), which always includes `port`. Unroutable
//! destinations are simply absent — verification reports them as holes.
//!
//! In memory, alternatives are stored once per (switch, leaf): all
//! destinations behind one leaf share their alternative set, so the pool
//! stays small even for large fabrics. The dump expands them per
//! destination.

use std::fmt::Write as _;

use thiserror::Error;

use crate::topology::{Fabric, Guid};

/// Sentinel for "no entry" in dense port arrays.
pub const NO_ROUTE: u16 = u16::MAX;

/// Read access to dense forwarding entries, implemented both by freshly
/// built tables and by tables parsed from a dump.
pub trait PortsView {
    fn num_switches(&self) -> usize;
    fn num_nodes(&self) -> usize;
    /// Deterministic out-port of switch `s` for destination `d`, or
    /// [`NO_ROUTE`].
    fn port(&self, s: usize, d: usize) -> u16;
}

/// One switch's forwarding state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwitchTable {
    /// Indexed by destination id; [`NO_ROUTE`] marks a gap.
    pub ports: Vec<u16>,
    /// Alternative-port pool offsets per leaf ordinal (`num_leaves + 1`
    /// entries).
    pub alt_offsets: Vec<u32>,
    pub alt_pool: Vec<u16>,
}

impl SwitchTable {
    pub fn alts_for_leaf(&self, leaf: u32) -> &[u16] {
        let lo = self.alt_offsets[leaf as usize] as usize;
        let hi = self.alt_offsets[leaf as usize + 1] as usize;
        &self.alt_pool[lo..hi]
    }
}

/// Complete forwarding tables for one fabric.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingTables {
    pub num_nodes: usize,
    pub num_leaves: usize,
    /// Indexed like `Fabric::topo.switches`.
    pub per_switch: Vec<SwitchTable>,
}

impl PortsView for RoutingTables {
    fn num_switches(&self) -> usize {
        self.per_switch.len()
    }

    fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    fn port(&self, s: usize, d: usize) -> u16 {
        self.per_switch[s].ports[d]
    }
}

impl RoutingTables {
    /// Renders the canonical dump. Terminal destinations (nodes attached to
    /// the switch itself) list only their own port as alternative.
    pub fn dump(&self, f: &Fabric) -> String {
        let mut out = String::new();
        let mut alts = String::new();
        for (s, table) in self.per_switch.iter().enumerate() {
            writeln!(out, "table {}", f.topo.switches[s].guid).unwrap();
            for d in 0..self.num_nodes {
                let port = table.ports[d];
                if port == NO_ROUTE {
                    continue;
                }
                let node = &f.topo.nodes[d];
                alts.clear();
                if node.leaf == s {
                    write!(alts, "{port}").unwrap();
                } else {
                    let set = table.alts_for_leaf(f.leaf_of_dest(d));
                    debug_assert!(set.contains(&port), "deterministic port is an alternative");
                    for (i, p) in set.iter().enumerate() {
                        if i > 0 {
                            alts.push(',');
                        }
                        write!(alts, "{p}").unwrap();
                    }
                }
                writeln!(
                    out,
                    "dest {} d={} port={} alts={}",
                    node.guid, d, port, alts
                )
                .unwrap();
            }
        }
        out
    }
}

/// One parsed `dest` line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableEntry {
    pub node: Guid,
    pub d: usize,
    pub port: u16,
    pub alts: Vec<u16>,
}

/// A parsed dump: switch sections in file order, entries in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TableFile {
    pub sections: Vec<(Guid, Vec<TableEntry>)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct TableParseError {
    pub line: usize,
    pub msg: String,
}

fn terr(line: usize, msg: impl Into<String>) -> TableParseError {
    TableParseError {
        line,
        msg: msg.into(),
    }
}

/// Parses a dump file (syntax only; use [`TableFile::bind`] to resolve it
/// against a topology).
pub fn parse_tables(input: &str) -> Result<TableFile, TableParseError> {
    let mut file = TableFile::default();
    for (idx, raw) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match tokens[0] {
            "table" if tokens.len() == 2 => {
                let guid: Guid = tokens[1]
                    .parse()
                    .map_err(|_| terr(lineno, format!("bad guid `{}`", tokens[1])))?;
                file.sections.push((guid, Vec::new()));
            }
            "dest" if tokens.len() == 5 => {
                let section = file
                    .sections
                    .last_mut()
                    .ok_or_else(|| terr(lineno, "dest line before any table header"))?;
                let node: Guid = tokens[1]
                    .parse()
                    .map_err(|_| terr(lineno, format!("bad guid `{}`", tokens[1])))?;
                let field = |tok: &str, key: &str| -> Result<String, TableParseError> {
                    tok.strip_prefix(key)
                        .map(str::to_string)
                        .ok_or_else(|| terr(lineno, format!("expected `{key}...`, got `{tok}`")))
                };
                let d: usize = field(tokens[2], "d=")?
                    .parse()
                    .map_err(|_| terr(lineno, "bad destination id"))?;
                let port: u16 = field(tokens[3], "port=")?
                    .parse()
                    .map_err(|_| terr(lineno, "bad port"))?;
                let alts = field(tokens[4], "alts=")?
                    .split(',')
                    .map(|t| t.parse::<u16>().map_err(|_| terr(lineno, "bad alts list")))
                    .collect::<Result<Vec<u16>, _>>()?;
                section.1.push(TableEntry {
                    node,
                    d,
                    port,
                    alts,
                });
            }
            other => return Err(terr(lineno, format!("unrecognised directive `{other}`"))),
        }
    }
    Ok(file)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BindError {
    #[error("table section for unknown switch {0}")]
    UnknownSwitch(Guid),
    #[error("duplicate table section for switch {0}")]
    DuplicateSwitch(Guid),
    #[error("entry for unknown node {0}")]
    UnknownNode(Guid),
    #[error("node {node} has destination id {expected}, entry says {found}")]
    DestMismatch {
        node: Guid,
        expected: usize,
        found: usize,
    },
    #[error("duplicate entry for destination {d} in table {switch}")]
    DuplicateDest { switch: Guid, d: usize },
}

/// Dense forwarding entries resolved against a topology. Switches without a
/// section stay all-[`NO_ROUTE`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundTables {
    pub num_nodes: usize,
    pub ports: Vec<Vec<u16>>,
}

impl PortsView for BoundTables {
    fn num_switches(&self) -> usize {
        self.ports.len()
    }

    fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    fn port(&self, s: usize, d: usize) -> u16 {
        self.ports[s][d]
    }
}

impl TableFile {
    /// Resolves GUIDs to indices against `f` and checks entry identities
    /// (known switches and nodes, matching destination ids, no duplicates).
    pub fn bind(&self, f: &Fabric) -> Result<BoundTables, BindError> {
        let num_nodes = f.topo.num_nodes();
        let mut ports = vec![vec![NO_ROUTE; num_nodes]; f.topo.num_switches()];
        let mut seen = vec![false; f.topo.num_switches()];
        let node_index: std::collections::HashMap<Guid, usize> =
            f.topo.nodes.iter().map(|n| (n.guid, n.dest)).collect();
        for (guid, entries) in &self.sections {
            let s = f
                .topo
                .switch_index(*guid)
                .ok_or(BindError::UnknownSwitch(*guid))?;
            if seen[s] {
                return Err(BindError::DuplicateSwitch(*guid));
            }
            seen[s] = true;
            for e in entries {
                let expected = *node_index
                    .get(&e.node)
                    .ok_or(BindError::UnknownNode(e.node))?;
                if expected != e.d {
                    return Err(BindError::DestMismatch {
                        node: e.node,
                        expected,
                        found: e.d,
                    });
                }
                if ports[s][e.d] != NO_ROUTE {
                    return Err(BindError::DuplicateDest {
                        switch: *guid,
                        d: e.d,
                    });
                }
                ports[s][e.d] = e.port;
            }
        }
        Ok(BoundTables { num_nodes, ports })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmodc::{build_tables, preprocess, RouteMode};
    use crate::topology::{build_pgft, Fabric};

    fn routed_pgft() -> (Fabric, RoutingTables) {
        let topo = build_pgft(&"2;2.2;1.2;1.1".parse().unwrap()).unwrap().0;
        let f = Fabric::prepare(topo).unwrap();
        let pre = preprocess(&f).unwrap();
        let build = build_tables(&f, &pre, RouteMode::UpDownStrict).unwrap();
        assert!(build.gaps.is_empty());
        (f, build.tables)
    }

    #[test]
    fn dump_parses_back_to_identical_entries() {
        let (f, tables) = routed_pgft();
        let dump = tables.dump(&f);
        let bound = parse_tables(&dump).unwrap().bind(&f).unwrap();
        for s in 0..f.topo.num_switches() {
            for d in 0..f.topo.num_nodes() {
                assert_eq!(bound.port(s, d), tables.port(s, d), "switch {s} dest {d}");
            }
        }
    }

    #[test]
    fn dump_orders_sections_by_guid_and_dests_by_id() {
        let (f, tables) = routed_pgft();
        let dump = tables.dump(&f);
        let table_lines: Vec<&str> = dump.lines().filter(|l| l.starts_with("table ")).collect();
        assert_eq!(
            table_lines,
            vec!["table 1", "table 2", "table 3", "table 4"]
        );
        let first: Vec<&str> = dump.lines().skip(1).take(4).collect();
        assert_eq!(first[0], "dest 5 d=0 port=0 alts=0");
        assert_eq!(first[1], "dest 6 d=1 port=1 alts=1");
        // Cross-leaf destinations list both upper groups as alternatives.
        assert!(first[2].ends_with("alts=2,3"));
    }

    #[test]
    fn parse_rejects_malformed_dumps() {
        assert!(parse_tables("dest 5 d=0 port=0 alts=0\n").is_err());
        assert!(parse_tables("table xyz\n").is_err());
        assert!(parse_tables("table 1\ndest 5 d=0 port=0\n").is_err());
        assert!(parse_tables("table 1\ndest 5 d=0 port=0 alts=a,b\n").is_err());
        let e = parse_tables("table 1\nroute 5\n").unwrap_err();
        assert_eq!(e.line, 2);
    }

    #[test]
    fn bind_checks_identities() {
        let (f, _) = routed_pgft();
        let bad = parse_tables("table 9\n").unwrap();
        assert_eq!(bad.bind(&f).unwrap_err(), BindError::UnknownSwitch(Guid(9)));
        let bad = parse_tables("table 1\ndest 5 d=1 port=0 alts=0\n").unwrap();
        assert_eq!(
            bad.bind(&f).unwrap_err(),
            BindError::DestMismatch {
                node: Guid(5),
                expected: 0,
                found: 1
            }
        );
        let bad =
            parse_tables("table 1\ndest 5 d=0 port=0 alts=0\ndest 5 d=0 port=1 alts=1\n").unwrap();
        assert_eq!(
            bad.bind(&f).unwrap_err(),
            BindError::DuplicateDest {
                switch: Guid(1),
                d: 0
            }
        );
        let bad = parse_tables("table 1\ndest ff d=0 port=0 alts=0\n").unwrap();
        assert_eq!(
            bad.bind(&f).unwrap_err(),
            BindError::UnknownNode(Guid(0xff))
        );
    }

    #[test]
    fn missing_sections_bind_as_all_holes() {
        let (f, _) = routed_pgft();
        let partial = parse_tables("table 1\ndest 5 d=0 port=0 alts=0\n").unwrap();
        let bound = partial.bind(&f).unwrap();
        assert_eq!(bound.port(0, 0), 0);
        assert_eq!(bound.port(0, 1), NO_ROUTE);
        assert_eq!(bound.port(3, 2), NO_ROUTE);
    }
}
