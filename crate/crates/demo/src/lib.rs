//! Browser demo for the pgft-route toolkit.
//!
//! Three operations are exported through wasm-bindgen, each returning a JSON
//! string: `{"error": ...}` on failure, otherwise an object with an `svg`
//! rendering plus summary statistics. All randomness is seed-driven, so the
//! page shows identical results for identical inputs.

mod render;

use serde_json::json;
use wasm_bindgen::prelude::*;

use pgft_route::analysis::{link_loads, make_pattern, PatternKind};
use pgft_route::dmodc::{build_tables, preprocess, RouteMode};
use pgft_route::tables::RoutingTables;
use pgft_route::topology::{build_pgft, inject_faults, Amount, FaultSpec, PgftSpec};
use pgft_route::verify::trace_path;
use pgft_route::Fabric;

use render::{render, RenderOptions};

/// Keeps SVG size and routing time comfortable in a browser tab.
const MAX_DEMO_NODES: u64 = 4096;

fn err(msg: impl ToString) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

/// Builds the (optionally degraded) fabric a demo view works on.
fn build(descriptor: &str, remove_links_pct: f64, seed: u32) -> Result<(Fabric, usize), String> {
    let spec: PgftSpec = descriptor.trim().parse().map_err(|e| format!("{e}"))?;
    let nodes = spec.num_nodes().map_err(|e| format!("{e}"))?;
    if nodes > MAX_DEMO_NODES {
        return Err(format!(
            "{nodes} nodes is too large for the browser demo (limit {MAX_DEMO_NODES})"
        ));
    }
    if !(0.0..=90.0).contains(&remove_links_pct) {
        return Err("link removal must be between 0 and 90 percent".to_string());
    }
    let (topo, _) = build_pgft(&spec).map_err(|e| format!("{e}"))?;
    let (topo, removed) = if remove_links_pct > 0.0 {
        let faults = FaultSpec {
            remove_links: Amount::Fraction(remove_links_pct / 100.0),
            seed: seed as u64,
            preserve_leaf_connectivity: true,
            ..FaultSpec::default()
        };
        let (t, log) = inject_faults(&topo, &faults).map_err(|e| format!("{e}"))?;
        let removed = log.entries.len();
        (t, removed)
    } else {
        (topo, 0)
    };
    let f = Fabric::prepare(topo).map_err(|e| format!("{e}"))?;
    Ok((f, removed))
}

fn route(f: &Fabric) -> Result<RoutingTables, String> {
    let pre = preprocess(f).map_err(|e| format!("{e}"))?;
    let build = build_tables(f, &pre, RouteMode::UpDownStrict).map_err(|e| format!("{e}"))?;
    Ok(build.tables)
}

/// Renders a (complete) PGFT for a descriptor string.
#[wasm_bindgen]
pub fn topology_view(descriptor: &str) -> String {
    let (f, _) = match build(descriptor, 0.0, 0) {
        Ok(v) => v,
        Err(e) => return err(e),
    };
    let svg = render(
        &f,
        &RenderOptions {
            loads: None,
            highlight: None,
        },
    );
    json!({
        "svg": svg,
        "nodes": f.topo.num_nodes(),
        "switches": f.topo.num_switches(),
        "cables": f.topo.directed_switch_links() / 2,
        "levels": f.ranks.height(),
    })
    .to_string()
}

/// Degrades the fabric, routes it, and colours every cable by the flow load
/// of a pattern (`all2all`, `shift:K` or `perm:SEED`).
#[wasm_bindgen]
pub fn degraded_load_view(
    descriptor: &str,
    remove_links_pct: f64,
    seed: u32,
    pattern: &str,
) -> String {
    let kind: PatternKind = match pattern.trim().parse() {
        Ok(k) => k,
        Err(e) => return err(e),
    };
    let (f, removed) = match build(descriptor, remove_links_pct, seed) {
        Ok(v) => v,
        Err(e) => return err(e),
    };
    let tables = match route(&f) {
        Ok(t) => t,
        Err(e) => return err(e),
    };
    let flows = match make_pattern(kind, f.topo.num_nodes()) {
        Ok(p) => p.flows,
        Err(e) => return err(e),
    };
    let report = match link_loads(&f, &tables, &flows) {
        Ok(r) => r,
        Err(e) => return err(e),
    };
    let svg = render(
        &f,
        &RenderOptions {
            loads: Some(&report),
            highlight: None,
        },
    );
    json!({
        "svg": svg,
        "removed_cables": removed,
        "flows": flows.len(),
        "max_load": report.max_load,
        "mean_load": report.mean_load(),
        "theoretical_floor": report.theoretical_floor,
    })
    .to_string()
}

/// Degrades the fabric, routes it, and highlights the forwarding path from
/// node `src` to node `dst` (node ids are destination indices).
#[wasm_bindgen]
pub fn path_view(descriptor: &str, remove_links_pct: f64, seed: u32, src: u32, dst: u32) -> String {
    let (f, removed) = match build(descriptor, remove_links_pct, seed) {
        Ok(v) => v,
        Err(e) => return err(e),
    };
    let (src, dst) = (src as usize, dst as usize);
    let n = f.topo.num_nodes();
    if src >= n || dst >= n || src == dst {
        return err(format!("src and dst must be distinct node ids below {n}"));
    }
    let tables = match route(&f) {
        Ok(t) => t,
        Err(e) => return err(e),
    };
    let trace = match trace_path(&f, &tables, src, dst) {
        Ok(t) => t,
        Err(e) => return err(e),
    };
    let hops: Vec<String> = trace
        .switches
        .iter()
        .map(|&s| f.topo.switches[s].guid.to_string())
        .collect();
    let svg = render(
        &f,
        &RenderOptions {
            loads: None,
            highlight: Some(&trace),
        },
    );
    json!({
        "svg": svg,
        "removed_cables": removed,
        "hops": hops,
        "switch_count": trace.len(),
    })
    .to_string()
}
