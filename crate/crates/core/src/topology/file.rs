//! Plain-text topology exchange format.
//!
//! ```text
//! # free-form comment
//! # pgft 3;2.2.3;1.2.2;1.2.1        (generator annotation, optional)
//! switch <guid-hex>
//! node <guid-hex> <d:decimal> leaf=<switch-guid-hex> port=<int>
//! link <guidA-hex>:<portA-int> <guidB-hex>:<portB-int>
//! ```
//!
//! GUIDs are lowercase hex without prefix; `d` is the dense destination id.
//! Each physical cable appears exactly once as a `link` line. `#` starts a
//! comment; the single recognised `# pgft <descriptor>` comment carries the
//! generator descriptor so that closed-form engines can certify the file.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::{Guid, Node, PgftSpec, PortTarget, Switch, Topology};

/// Highest usable port number; one value is reserved as the routing-table
/// "no route" sentinel.
pub(crate) const MAX_PORT: usize = u16::MAX as usize - 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("malformed line: {0}")]
    Syntax(String),
    #[error("duplicate guid {0}")]
    DuplicateGuid(Guid),
    #[error("duplicate destination id {0}")]
    DuplicateDest(usize),
    #[error("destination ids are not dense: expected {expected}, found {found}")]
    NonDenseDest { expected: usize, found: usize },
    #[error("unknown switch guid {0}")]
    UnknownSwitch(Guid),
    #[error("link endpoint {0} is a node, not a switch")]
    EndpointIsNode(Guid),
    #[error("switch {0} linked to itself")]
    SelfLink(Guid),
    #[error("port {guid}:{port} wired twice")]
    PortInUse { guid: Guid, port: usize },
    #[error("port number {port} on {guid} exceeds the supported maximum {MAX_PORT}")]
    PortOutOfRange { guid: Guid, port: usize },
    #[error("invalid generator annotation: {0}")]
    BadAnnotation(String),
    #[error("duplicate generator annotation")]
    DuplicateAnnotation,
    #[error("topology has no switches")]
    NoSwitches,
}

/// Parse failure with its 1-based source line (0 for whole-file conditions).
#[derive(Debug, Error, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.kind)
        } else {
            write!(f, "{}", self.kind)
        }
    }
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn parse_guid(tok: &str, line: usize) -> Result<Guid, ParseError> {
    tok.parse()
        .map_err(|_| err(line, ParseErrorKind::Syntax(format!("bad guid `{tok}`"))))
}

fn parse_port(tok: &str, guid: Guid, line: usize) -> Result<usize, ParseError> {
    let port: usize = tok
        .parse()
        .map_err(|_| err(line, ParseErrorKind::Syntax(format!("bad port `{tok}`"))))?;
    if port > MAX_PORT {
        return Err(err(line, ParseErrorKind::PortOutOfRange { guid, port }));
    }
    Ok(port)
}

fn parse_endpoint(tok: &str, line: usize) -> Result<(Guid, usize), ParseError> {
    let (g, p) = tok.split_once(':').ok_or_else(|| {
        err(
            line,
            ParseErrorKind::Syntax(format!("bad endpoint `{tok}`")),
        )
    })?;
    let guid = parse_guid(g, line)?;
    let port = parse_port(p, guid, line)?;
    Ok((guid, port))
}

fn parse_kv<'a>(tok: &'a str, key: &str, line: usize) -> Result<&'a str, ParseError> {
    tok.strip_prefix(key).ok_or_else(|| {
        err(
            line,
            ParseErrorKind::Syntax(format!("expected `{key}...`, got `{tok}`")),
        )
    })
}

struct RawNode {
    guid: Guid,
    dest: usize,
    leaf: Guid,
    port: usize,
    line: usize,
}

/// Parses the text format. Errors carry the offending line number; structural
/// problems (dangling references, port conflicts, non-dense destination ids,
/// an empty switch set) are rejected here so every parsed topology is sound.
pub fn parse_topology(input: &str) -> Result<Topology, ParseError> {
    let mut switch_guids: Vec<(Guid, usize)> = Vec::new();
    let mut raw_nodes: Vec<RawNode> = Vec::new();
    let mut raw_links: Vec<(Guid, usize, Guid, usize, usize)> = Vec::new();
    let mut seen: HashMap<Guid, usize> = HashMap::new();
    let mut pgft: Option<PgftSpec> = None;

    for (idx, raw_line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.split_once('#') {
            Some((code, comment)) => {
                if let Some(desc) = comment.trim().strip_prefix("pgft ") {
                    if code.trim().is_empty() {
                        if pgft.is_some() {
                            return Err(err(lineno, ParseErrorKind::DuplicateAnnotation));
                        }
                        let spec: PgftSpec =
                            desc.trim().parse().map_err(|e: super::PgftError| {
                                err(lineno, ParseErrorKind::BadAnnotation(e.to_string()))
                            })?;
                        pgft = Some(spec);
                    }
                }
                code
            }
            None => raw_line,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        match tokens[0] {
            "switch" if tokens.len() == 2 => {
                let guid = parse_guid(tokens[1], lineno)?;
                if seen.insert(guid, lineno).is_some() {
                    return Err(err(lineno, ParseErrorKind::DuplicateGuid(guid)));
                }
                switch_guids.push((guid, lineno));
            }
            "node" if tokens.len() == 5 => {
                let guid = parse_guid(tokens[1], lineno)?;
                if seen.insert(guid, lineno).is_some() {
                    return Err(err(lineno, ParseErrorKind::DuplicateGuid(guid)));
                }
                let dest: usize = tokens[2].parse().map_err(|_| {
                    err(
                        lineno,
                        ParseErrorKind::Syntax(format!("bad destination id `{}`", tokens[2])),
                    )
                })?;
                let leaf = parse_guid(parse_kv(tokens[3], "leaf=", lineno)?, lineno)?;
                let port = parse_port(parse_kv(tokens[4], "port=", lineno)?, leaf, lineno)?;
                raw_nodes.push(RawNode {
                    guid,
                    dest,
                    leaf,
                    port,
                    line: lineno,
                });
            }
            "link" if tokens.len() == 3 => {
                let (ga, pa) = parse_endpoint(tokens[1], lineno)?;
                let (gb, pb) = parse_endpoint(tokens[2], lineno)?;
                raw_links.push((ga, pa, gb, pb, lineno));
            }
            other => {
                return Err(err(
                    lineno,
                    ParseErrorKind::Syntax(format!("unrecognised directive `{other}`")),
                ));
            }
        }
    }

    if switch_guids.is_empty() {
        return Err(err(0, ParseErrorKind::NoSwitches));
    }

    switch_guids.sort_by_key(|&(g, _)| g);
    let index: HashMap<Guid, usize> = switch_guids
        .iter()
        .enumerate()
        .map(|(i, &(g, _))| (g, i))
        .collect();
    let node_guids: HashMap<Guid, ()> = raw_nodes.iter().map(|n| (n.guid, ())).collect();
    let mut switches: Vec<Switch> = switch_guids
        .iter()
        .map(|&(guid, _)| Switch {
            guid,
            ports: Vec::new(),
        })
        .collect();

    let wire = |sw: &mut Vec<Switch>,
                s: usize,
                port: usize,
                target: PortTarget,
                lineno: usize|
     -> Result<(), ParseError> {
        let ports = &mut sw[s].ports;
        if ports.len() <= port {
            ports.resize(port + 1, PortTarget::Free);
        }
        if ports[port] != PortTarget::Free {
            return Err(err(
                lineno,
                ParseErrorKind::PortInUse {
                    guid: sw[s].guid,
                    port,
                },
            ));
        }
        ports[port] = target;
        Ok(())
    };

    // Nodes: dense destination ids, one leaf port each.
    raw_nodes.sort_by_key(|n| n.dest);
    let mut nodes = Vec::with_capacity(raw_nodes.len());
    for (i, rn) in raw_nodes.iter().enumerate() {
        if rn.dest != i {
            let kind = if i > 0 && raw_nodes[i - 1].dest == rn.dest {
                ParseErrorKind::DuplicateDest(rn.dest)
            } else {
                ParseErrorKind::NonDenseDest {
                    expected: i,
                    found: rn.dest,
                }
            };
            return Err(err(rn.line, kind));
        }
        let leaf = *index
            .get(&rn.leaf)
            .ok_or_else(|| err(rn.line, ParseErrorKind::UnknownSwitch(rn.leaf)))?;
        wire(
            &mut switches,
            leaf,
            rn.port,
            PortTarget::Node { node: i },
            rn.line,
        )?;
        nodes.push(Node {
            guid: rn.guid,
            dest: rn.dest,
            leaf,
            leaf_port: rn.port as u16,
        });
    }

    // Links: both endpoints must be known switches.
    for &(ga, pa, gb, pb, lineno) in &raw_links {
        for g in [ga, gb] {
            if node_guids.contains_key(&g) {
                return Err(err(lineno, ParseErrorKind::EndpointIsNode(g)));
            }
        }
        if ga == gb {
            return Err(err(lineno, ParseErrorKind::SelfLink(ga)));
        }
        let a = *index
            .get(&ga)
            .ok_or_else(|| err(lineno, ParseErrorKind::UnknownSwitch(ga)))?;
        let b = *index
            .get(&gb)
            .ok_or_else(|| err(lineno, ParseErrorKind::UnknownSwitch(gb)))?;
        wire(
            &mut switches,
            a,
            pa,
            PortTarget::Switch {
                peer: b,
                peer_port: pb as u16,
            },
            lineno,
        )?;
        wire(
            &mut switches,
            b,
            pb,
            PortTarget::Switch {
                peer: a,
                peer_port: pa as u16,
            },
            lineno,
        )?;
    }

    let leaf: Vec<bool> = switches.iter().map(Switch::has_node_port).collect();
    Ok(Topology::from_parts(switches, nodes, leaf, pgft))
}

/// Serialises to the text format in canonical order: annotation, switches by
/// GUID, nodes by destination id, links by their smaller (GUID, port)
/// endpoint. `parse_topology(serialize_topology(t)) == t` for every valid
/// topology.
pub fn serialize_topology(topo: &Topology) -> String {
    let mut out = String::new();
    if let Some(spec) = &topo.pgft {
        out.push_str(&format!("# pgft {spec}\n"));
    }
    for sw in &topo.switches {
        out.push_str(&format!("switch {}\n", sw.guid));
    }
    for n in &topo.nodes {
        out.push_str(&format!(
            "node {} {} leaf={} port={}\n",
            n.guid, n.dest, topo.switches[n.leaf].guid, n.leaf_port
        ));
    }
    for (s, sw) in topo.switches.iter().enumerate() {
        for (p, port) in sw.ports.iter().enumerate() {
            if let PortTarget::Switch { peer, peer_port } = *port {
                if (s, p) < (peer, peer_port as usize) {
                    out.push_str(&format!(
                        "link {}:{} {}:{}\n",
                        sw.guid, p, topo.switches[peer].guid, peer_port
                    ));
                }
            }
        }
    }
    out
}
