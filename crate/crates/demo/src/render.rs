//! Rank-layered SVG rendering of a fabric.
//!
//! Switches are laid out in rows by rank (leaves at the bottom, roots at the
//! top), nodes in a row under the leaves. Cables can be coloured by flow
//! load and a traced path can be highlighted.

use std::fmt::Write as _;

use pgft_route::analysis::LoadReport;
use pgft_route::topology::PortTarget;
use pgft_route::verify::Trace;
use pgft_route::Fabric;

const COL_W: f64 = 46.0;
const ROW_H: f64 = 92.0;
const MARGIN: f64 = 28.0;
const SW_W: f64 = 30.0;
const SW_H: f64 = 16.0;
const NODE_R: f64 = 5.0;

pub struct RenderOptions<'a> {
    /// Colour cables by their flow counts (the maximum of both directions).
    pub loads: Option<&'a LoadReport>,
    /// Highlight the cables of this forwarding trace.
    pub highlight: Option<&'a Trace>,
}

struct Layout {
    /// Centre of each switch.
    sw: Vec<(f64, f64)>,
    /// Centre of each node.
    nodes: Vec<(f64, f64)>,
    width: f64,
    height: f64,
}

fn layout(f: &Fabric) -> Layout {
    let height_ranks = f.ranks.height() as usize;
    let mut per_rank: Vec<Vec<usize>> = vec![Vec::new(); height_ranks];
    let mut unranked = Vec::new();
    for s in 0..f.topo.num_switches() {
        match f.ranks.rank[s] {
            Some(r) => per_rank[r as usize].push(s),
            None => unranked.push(s),
        }
    }
    // Unranked (isolated) switches are parked on the top row.
    let rows = height_ranks + usize::from(!unranked.is_empty());
    let widest = per_rank
        .iter()
        .map(Vec::len)
        .max()
        .unwrap_or(1)
        .max(f.topo.num_nodes())
        .max(unranked.len());
    let width = 2.0 * MARGIN + widest as f64 * COL_W;
    let height = 2.0 * MARGIN + (rows + 1) as f64 * ROW_H;

    let row_y = |row: usize| height - MARGIN - (row + 1) as f64 * ROW_H;
    let spread =
        |count: usize, i: usize| width / 2.0 + (i as f64 - (count as f64 - 1.0) / 2.0) * COL_W;

    let mut sw = vec![(0.0, 0.0); f.topo.num_switches()];
    for (r, members) in per_rank.iter().enumerate() {
        for (i, &s) in members.iter().enumerate() {
            sw[s] = (spread(members.len(), i), row_y(r));
        }
    }
    for (i, &s) in unranked.iter().enumerate() {
        sw[s] = (spread(unranked.len(), i), row_y(rows - 1));
    }
    let nodes = (0..f.topo.num_nodes())
        .map(|d| (spread(f.topo.num_nodes(), d), height - MARGIN))
        .collect();
    Layout {
        sw,
        nodes,
        width,
        height,
    }
}

/// Linear white-to-red ramp over `[0, max]`.
fn load_colour(load: u64, max: u64) -> String {
    if max == 0 || load == 0 {
        return "#b9c4cc".to_string();
    }
    let t = load as f64 / max as f64;
    let g = (210.0 - 170.0 * t) as u8;
    let b = (215.0 - 185.0 * t) as u8;
    format!("#e6{g:02x}{b:02x}")
}

pub fn render(f: &Fabric, opts: &RenderOptions) -> String {
    let l = layout(f);
    let mut svg = String::new();
    write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {:.0} {:.0}" font-family="monospace" font-size="10">"#,
        l.width, l.height
    )
    .unwrap();

    // Cables first so shapes draw over them. Each cable once, identified by
    // its lower (switch, port) endpoint.
    let on_path = |s: usize, p: u16| {
        opts.highlight.is_some_and(|t| {
            t.switches
                .iter()
                .zip(&t.ports)
                .any(|(&ts, &tp)| ts == s && tp == p)
        })
    };
    for (s, sw) in f.topo.switches.iter().enumerate() {
        for (p, target) in sw.ports.iter().enumerate() {
            match *target {
                PortTarget::Switch { peer, peer_port } if (s, p) < (peer, peer_port as usize) => {
                    let (x1, y1) = l.sw[s];
                    let (x2, y2) = l.sw[peer];
                    // Spread parallel cables so they do not overlap.
                    let off = (p % 5) as f64 * 3.0 - 6.0;
                    let load = opts
                        .loads
                        .map(|r| r.port_loads[s][p].max(r.port_loads[peer][peer_port as usize]));
                    let highlighted = on_path(s, p as u16) || on_path(peer, peer_port);
                    let (stroke, width) = if highlighted {
                        ("#d4380d".to_string(), 2.6)
                    } else if let Some(load) = load {
                        (
                            load_colour(load, opts.loads.unwrap().max_load),
                            if load > 0 { 1.8 } else { 1.0 },
                        )
                    } else {
                        ("#8aa0b4".to_string(), 1.2)
                    };
                    write!(
                        svg,
                        r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{stroke}" stroke-width="{width}">"#,
                        x1 + off,
                        y1,
                        x2 - off,
                        y2
                    )
                    .unwrap();
                    let title = match load {
                        Some(load) => format!(
                            "{}:{} – {}:{} load {load}",
                            sw.guid, p, f.topo.switches[peer].guid, peer_port
                        ),
                        None => format!(
                            "{}:{} – {}:{}",
                            sw.guid, p, f.topo.switches[peer].guid, peer_port
                        ),
                    };
                    write!(svg, "<title>{title}</title></line>").unwrap();
                }
                PortTarget::Node { node } => {
                    let (x1, y1) = l.sw[s];
                    let (x2, y2) = l.nodes[node];
                    let highlighted = on_path(s, p as u16);
                    let (stroke, width) = if highlighted {
                        ("#d4380d", 2.2)
                    } else {
                        ("#c3cdd6", 1.0)
                    };
                    write!(
                        svg,
                        r#"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="{stroke}" stroke-width="{width}"/>"#
                    )
                    .unwrap();
                }
                _ => {}
            }
        }
    }

    for (s, sw) in f.topo.switches.iter().enumerate() {
        let (x, y) = l.sw[s];
        let on_trace = opts.highlight.is_some_and(|t| t.switches.contains(&s));
        let fill = if on_trace { "#ffd8bf" } else { "#eef3f7" };
        write!(
            svg,
            r##"<g><rect x="{:.1}" y="{:.1}" width="{SW_W}" height="{SW_H}" rx="3" fill="{fill}" stroke="#4a6572"/>"##,
            x - SW_W / 2.0,
            y - SW_H / 2.0,
        )
        .unwrap();
        write!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text><title>switch {}</title></g>"#,
            y + 3.5,
            sw.guid,
            sw.guid
        )
        .unwrap();
    }

    for (d, &(x, y)) in l.nodes.iter().enumerate() {
        let guid = f.topo.nodes[d].guid;
        write!(
            svg,
            r##"<circle cx="{x:.1}" cy="{y:.1}" r="{NODE_R}" fill="#5b8c5a" stroke="#2b4a2b"><title>node {guid} d={d}</title></circle>"##
        )
        .unwrap();
    }

    svg.push_str("</svg>");
    svg
}
