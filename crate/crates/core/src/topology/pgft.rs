//! Parallel Generalised Fat-Tree (PGFT) generator.
//!
//! A PGFT is described by `h;m1.m2...mh;w1.w2...wh;p1.p2...ph`:
//! `h` levels of switches above the nodes, where a level-`l` switch has
//! `m_l` children with `p_l` parallel cables to each, and every level-`l`
//! element has `w_{l+1}` parents at level `l+1` reached with `p_{l+1}`
//! parallel cables each.
//!
//! Level-`l` switches carry labels `(a_{l+1..h}; c_{1..l})`: the `a` digits
//! locate the subtree (and therefore the descendant destination range), the
//! `c` digits pick one of the `w` parallel trees. Switches are numbered in
//! label order, level by level from the leaves up, and GUIDs follow that
//! numbering — so GUID order, index order and label order all agree.
//!
//! Nodes sit below level 1 with destination ids `d = Σ a_i·∏_{k<i} m_k`,
//! which makes every switch's descendant set a contiguous `d` range.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::file::MAX_PORT;
use super::{Guid, Node, PortTarget, Switch, Topology};

/// Practical size guards; generation refuses anything bigger.
const MAX_NODES: u64 = 1 << 26;
const MAX_SWITCHES: u64 = 1 << 24;

/// PGFT descriptor `(h; m_1..m_h; w_1..w_h; p_1..p_h)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PgftSpec {
    pub h: usize,
    /// Children per switch, per level (`m[0]` = nodes per leaf).
    pub m: Vec<u64>,
    /// Parents per element, per level (`w[0]` pertains to nodes and must be 1).
    pub w: Vec<u64>,
    /// Parallel cables towards each parent, per level (`p[0]` must be 1).
    pub p: Vec<u64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgftError {
    #[error("descriptor must have four ';'-separated fields: h;m;w;p")]
    FieldCount,
    #[error("bad integer `{0}` in descriptor")]
    BadInteger(String),
    #[error("{field} lists {found} levels, expected {expected}")]
    LevelCount {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("descriptor height must be at least 1")]
    ZeroHeight,
    #[error("all arities must be at least 1")]
    ZeroArity,
    #[error("w1 and p1 must be 1: every node attaches to exactly one leaf port")]
    MultiHomedNodes,
    #[error("topology too large: {0}")]
    TooLarge(&'static str),
}

impl FromStr for PgftSpec {
    type Err = PgftError;

    fn from_str(s: &str) -> Result<Self, PgftError> {
        let fields: Vec<&str> = s.trim().split(';').collect();
        if fields.len() != 4 {
            return Err(PgftError::FieldCount);
        }
        let h: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| PgftError::BadInteger(fields[0].trim().to_string()))?;
        if h == 0 {
            return Err(PgftError::ZeroHeight);
        }
        let list = |text: &str, field: &'static str| -> Result<Vec<u64>, PgftError> {
            let vals = text
                .trim()
                .split('.')
                .map(|t| {
                    t.trim()
                        .parse::<u64>()
                        .map_err(|_| PgftError::BadInteger(t.trim().to_string()))
                })
                .collect::<Result<Vec<u64>, _>>()?;
            if vals.len() != h {
                return Err(PgftError::LevelCount {
                    field,
                    expected: h,
                    found: vals.len(),
                });
            }
            if vals.contains(&0) {
                return Err(PgftError::ZeroArity);
            }
            Ok(vals)
        };
        let spec = PgftSpec {
            h,
            m: list(fields[1], "m")?,
            w: list(fields[2], "w")?,
            p: list(fields[3], "p")?,
        };
        if spec.w[0] != 1 || spec.p[0] != 1 {
            return Err(PgftError::MultiHomedNodes);
        }
        Ok(spec)
    }
}

impl fmt::Display for PgftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(".");
        write!(
            f,
            "{};{};{};{}",
            self.h,
            join(&self.m),
            join(&self.w),
            join(&self.p)
        )
    }
}

impl PgftSpec {
    /// `∏ m_k`: total terminal nodes.
    pub fn num_nodes(&self) -> Result<u64, PgftError> {
        checked_product(&self.m)
    }

    /// Switch count at 1-based level `l`: `(∏_{k>l} m_k) · (∏_{k≤l} w_k)`.
    pub fn switches_at_level(&self, l: usize) -> Result<u64, PgftError> {
        let above = checked_product(&self.m[l..])?;
        let trees = checked_product(&self.w[..l])?;
        above
            .checked_mul(trees)
            .ok_or(PgftError::TooLarge("switch count overflows"))
    }
}

fn checked_product(vals: &[u64]) -> Result<u64, PgftError> {
    vals.iter().try_fold(1u64, |acc, &v| {
        acc.checked_mul(v)
            .ok_or(PgftError::TooLarge("arity product overflows"))
    })
}

/// Per-switch label metadata kept alongside a generated PGFT. Closed-form
/// routing reads levels, descendant ranges and tree-width products from here
/// instead of propagating anything through the graph.
#[derive(Clone, Debug)]
pub struct PgftMeta {
    pub spec: PgftSpec,
    /// 1-based level of each switch.
    pub level: Vec<u16>,
    /// First descendant destination id of each switch.
    pub dest_lo: Vec<usize>,
    /// Number of descendant destinations of each switch.
    pub dest_span: Vec<usize>,
    /// `cum_w[l] = ∏_{k=1..l} w_k` (with `cum_w[0] = 1`).
    pub cum_w: Vec<u64>,
}

/// One switch's label digits: `c
/// _{1..l}` (which parallel tree) and `a_{l+1..h}` (which subtree).
struct Label {
    c: Vec<u64>,
    a: Vec<u64>,
}

fn decode_label(mut r: u64, l: usize, spec: &PgftSpec) -> Label {
    let mut c = Vec::with_capacity(l);
    for j in 0..l {
        c.push(r % spec.w[j]);
        r /= spec.w[j];
    }
    let mut a = Vec::with_capacity(spec.h - l);
    for i in l..spec.h {
        a.push(r % spec.m[i]);
        r /= spec.m[i];
    }
    Label { c, a }
}

fn encode_label(label: &Label, l: usize, spec: &PgftSpec) -> u64 {
    let mut r = 0u64;
    for i in (l..spec.h).rev() {
        r = r * spec.m[i] + label.a[i - l];
    }
    for j in (0..l).rev() {
        r = r * spec.w[j] + label.c[j];
    }
    r
}

/// Builds the PGFT described by `spec`. The returned topology carries the
/// descriptor (it is serialised as the `# pgft` annotation), and the metadata
/// drives the closed-form reference engine.
pub fn build_pgft(spec: &PgftSpec) -> Result<(Topology, PgftMeta), PgftError> {
    let h = spec.h;
    let num_nodes = spec.num_nodes()?;
    if num_nodes > MAX_NODES {
        return Err(PgftError::TooLarge("node count exceeds supported maximum"));
    }
    let mut level_count = Vec::with_capacity(h + 1);
    level_count.push(0u64); // level 0 == nodes, not switches
    let mut total_switches = 0u64;
    for l in 1..=h {
        let c = spec.switches_at_level(l)?;
        total_switches = total_switches
            .checked_add(c)
            .ok_or(PgftError::TooLarge("switch count overflows"))?;
        level_count.push(c);
    }
    if total_switches > MAX_SWITCHES {
        return Err(PgftError::TooLarge(
            "switch count exceeds supported maximum",
        ));
    }

    // Ports per level-l switch: children first, then parents.
    let mut down_ports = vec![0u64; h + 1];
    let mut up_ports = vec![0u64; h + 1];
    for l in 1..=h {
        down_ports[l] = spec.m[l - 1]
            .checked_mul(spec.p[l - 1])
            .ok_or(PgftError::TooLarge("port count overflows"))?;
        up_ports[l] = if l < h {
            spec.w[l]
                .checked_mul(spec.p[l])
                .ok_or(PgftError::TooLarge("port count overflows"))?
        } else {
            0
        };
        if down_ports[l] + up_ports[l] > MAX_PORT as u64 {
            return Err(PgftError::TooLarge("per-switch port count exceeds maximum"));
        }
    }

    // GUIDs: switches level by level from the leaves, then nodes; all in
    // label/destination order, starting at 1.
    let mut level_base = vec![0u64; h + 2];
    level_base[1] = 1;
    for l in 1..h {
        level_base[l + 1] = level_base[l] + level_count[l];
    }
    let node_guid_base = level_base[h] + level_count[h];

    let mut switches = Vec::with_capacity(total_switches as usize);
    let mut level = Vec::with_capacity(total_switches as usize);
    let mut dest_lo = Vec::with_capacity(total_switches as usize);
    let mut dest_span = Vec::with_capacity(total_switches as usize);
    for l in 1..=h {
        let span: u64 = checked_product(&spec.m[..l])?;
        for r in 0..level_count[l] {
            let label = decode_label(r, l, spec);
            // Descendant range from the a-digits: d = Σ a_i · ∏_{k<i} m_k.
            let mut lo = 0u64;
            for i in (l..h).rev() {
                lo = lo * spec.m[i] + label.a[i - l];
            }
            lo *= span;
            switches.push(Switch {
                guid: Guid(level_base[l] + r),
                ports: vec![PortTarget::Free; (down_ports[l] + up_ports[l]) as usize],
            });
            level.push(l as u16);
            dest_lo.push(lo as usize);
            dest_span.push(span as usize);
        }
    }

    // Index of the level-l switch with label rank r.
    let index_of = |l: usize, r: u64| -> usize { (level_base[l] - 1 + r) as usize };

    // Wire switch levels together: each level-l switch to its w_{l+1} parents.
    for l in 1..h {
        let pl = spec.p[l] as usize;
        for r in 0..level_count[l] {
            let s = index_of(l, r);
            let label = decode_label(r, l, spec);
            let a_next = label.a[0]; // this switch's position among the parent's children
            for c_next in 0..spec.w[l] {
                let mut up = Label {
                    c: label.c.clone(),
                    a: label.a[1..].to_vec(),
                };
                up.c.push(c_next);
                let peer = index_of(l + 1, encode_label(&up, l + 1, spec));
                for k in 0..pl {
                    let sp = (down_ports[l] + c_next * spec.p[l]) as usize + k;
                    let pp = a_next as usize * pl + k;
                    switches[s].ports[sp] = PortTarget::Switch {
                        peer,
                        peer_port: pp as u16,
                    };
                    switches[peer].ports[pp] = PortTarget::Switch {
                        peer: s,
                        peer_port: sp as u16,
                    };
                }
            }
        }
    }

    // Attach nodes below the leaves (p_1 = 1: port == child index).
    let m1 = spec.m[0] as usize;
    let mut nodes = Vec::with_capacity(num_nodes as usize);
    for d in 0..num_nodes as usize {
        let leaf = index_of(1, (d / m1) as u64);
        let port = d % m1;
        switches[leaf].ports[port] = PortTarget::Node { node: d };
        nodes.push(Node {
            guid: Guid(node_guid_base + d as u64),
            dest: d,
            leaf,
            leaf_port: port as u16,
        });
    }

    let leaf_flags: Vec<bool> = switches.iter().map(Switch::has_node_port).collect();
    let cum_w: Vec<u64> = std::iter::once(1)
        .chain(spec.w.iter().scan(1u64, |acc, &w| {
            *acc *= w;
            Some(*acc)
        }))
        .collect();
    let meta = PgftMeta {
        spec: spec.clone(),
        level,
        dest_lo,
        dest_span,
        cum_w,
    };
    let topo = Topology::from_parts(switches, nodes, leaf_flags, Some(spec.clone()));
    Ok((topo, meta))
}
