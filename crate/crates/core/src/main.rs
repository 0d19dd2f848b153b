//! `pgft-route`: generate, degrade, route, verify and analyse PGFT fabrics.
//!
//! Exit codes: 0 on success, 1 when the input fails validation or
//! verification, 2 on usage errors (bad flags, unreadable inputs).
//! Diagnostics go to standard error; machine-readable output goes to the
//! `-o`/`--report` file or standard output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use std::{env, fs, thread};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use pgft_route::analysis::{self, PatternKind};
use pgft_route::dmodc::{self, RouteMode};
use pgft_route::dmodk;
use pgft_route::tables::{parse_tables, RoutingTables};
use pgft_route::topology::{
    build_pgft, inject_faults, parse_topology, serialize_topology, Amount, FaultSpec, PgftSpec,
    PortTarget,
};
use pgft_route::verify;
use pgft_route::{Fabric, Topology};

#[derive(Parser)]
#[command(
    name = "pgft-route",
    version,
    about = "Fat-tree (PGFT) topology, routing and congestion toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a complete PGFT topology file from a descriptor
    Generate {
        /// Descriptor `h;m1.m2...;w1.w2...;p1.p2...`
        #[arg(long)]
        pgft: String,
        /// Output file (stdout if omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Remove switches and/or cables with a seeded random draw
    Degrade {
        /// Topology file to degrade
        #[arg(short, long)]
        input: PathBuf,
        /// Count (`3`) or fraction (`0.1`) of non-leaf switches to remove
        #[arg(long, default_value = "0")]
        remove_switches: Amount,
        /// Count or fraction of switch-to-switch cables to remove
        #[arg(long, default_value = "0")]
        remove_links: Amount,
        /// Seed for the removal draw
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only remove elements that keep all leaf pairs up/down-connected
        #[arg(long)]
        preserve_connectivity: bool,
        /// Output file (stdout if omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the removal log to this file
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Compute forwarding tables for a topology
    Route {
        #[arg(short, long)]
        input: PathBuf,
        /// Table dump file (stdout if omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// `dmodc` handles any fabric; `dmodk` only pristine generated PGFTs
        #[arg(long, value_enum, default_value_t = EngineArg::Dmodc)]
        engine: EngineArg,
        /// Port-selection mode for dmodc (default `updown`)
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Worker threads (default: $PGFT_ROUTE_THREADS, then all cores)
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Trace every node pair through a table dump and report holes,
    /// loops and up*/down* violations as JSON
    Verify {
        #[arg(short, long)]
        input: PathBuf,
        /// Forwarding-table dump to check
        #[arg(short, long)]
        tables: PathBuf,
        /// Also write the JSON report to this file
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Per-link flow loads of a communication pattern, as CSV
    Analyze {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        tables: PathBuf,
        /// `all2all`, `shift:K` or `perm:SEED`
        #[arg(long, default_value = "all2all")]
        pattern: PatternKind,
        /// CSV output (stdout if omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Route with both engines and compare pattern loads, as CSV
    Compare {
        #[arg(short, long)]
        input: PathBuf,
        /// Comma-separated pattern list
        #[arg(long, value_delimiter = ',', default_value = "all2all,shift:1")]
        patterns: Vec<PatternKind>,
        /// CSV output (stdout if omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time preprocessing and table building, as CSV
    Bench {
        /// Generate this descriptor in memory instead of reading a file
        #[arg(long, conflicts_with = "input")]
        pgft: Option<String>,
        #[arg(short, long)]
        input: Option<PathBuf>,
        /// Comma-separated worker thread counts
        #[arg(long, value_delimiter = ',', default_value = "1")]
        threads: Vec<usize>,
        /// Repetitions per thread count; the median is reported
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// CSV output (stdout if omitted)
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Dmodc,
    Dmodk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Plain,
    Updown,
}

impl From<ModeArg> for RouteMode {
    fn from(m: ModeArg) -> RouteMode {
        match m {
            ModeArg::Plain => RouteMode::Plain,
            ModeArg::Updown => RouteMode::UpDownStrict,
        }
    }
}

/// Marker for errors that should exit 2 (usage) rather than 1 (failure).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(Usage(msg.into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<Usage>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn emit(output: Option<&Path>, content: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, content).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_topology(path: &Path) -> Result<Topology> {
    let text = read_input(path)?;
    parse_topology(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_fabric(path: &Path) -> Result<Fabric> {
    let topo = load_topology(path)?;
    Fabric::prepare(topo).with_context(|| format!("preparing fabric from {}", path.display()))
}

fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match env::var("PGFT_ROUTE_THREADS") {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| usage(format!("PGFT_ROUTE_THREADS must be an integer, got `{v}`")))?,
            Err(_) => thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        },
    };
    if n == 0 {
        return Err(usage("thread count must be at least 1"));
    }
    Ok(n)
}

fn worker_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")
}

/// Preprocesses and builds dmodc tables, sequentially for one thread and on
/// a private pool otherwise. Both paths produce identical tables.
fn dmodc_tables(
    f: &Fabric,
    mode: RouteMode,
    threads: usize,
) -> Result<(dmodc::Preprocessed, dmodc::RouteBuild)> {
    if threads <= 1 {
        let pre = dmodc::preprocess(f)?;
        let build = dmodc::build_tables(f, &pre, mode)?;
        Ok((pre, build))
    } else {
        let pool = worker_pool(threads)?;
        let pre = dmodc::preprocess_par(f, &pool)?;
        let build = dmodc::build_tables_par(f, &pre, mode, &pool)?;
        Ok((pre, build))
    }
}

fn loads_csv(f: &Fabric, report: &analysis::LoadReport) -> String {
    let mut csv = String::from("link_src_guid,link_src_port,link_dst_guid,load\n");
    for (s, sw) in f.topo.switches.iter().enumerate() {
        for (p, target) in sw.ports.iter().enumerate() {
            if let PortTarget::Switch { peer, .. } = target {
                writeln!(
                    csv,
                    "{},{},{},{}",
                    sw.guid, p, f.topo.switches[*peer].guid, report.port_loads[s][p]
                )
                .unwrap();
            }
        }
    }
    csv
}

fn median_seconds(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

fn run(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Generate { pgft, output } => {
            let spec: PgftSpec = pgft
                .parse()
                .map_err(|e| usage(format!("bad --pgft: {e}")))?;
            let (topo, _) = build_pgft(&spec).map_err(|e| usage(format!("bad --pgft: {e}")))?;
            emit(output.as_deref(), &serialize_topology(&topo))?;
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Degrade {
            input,
            remove_switches,
            remove_links,
            seed,
            preserve_connectivity,
            output,
            log,
        } => {
            let topo = load_topology(&input)?;
            let spec = FaultSpec {
                remove_switches,
                remove_links,
                seed,
                preserve_leaf_connectivity: preserve_connectivity,
            };
            let (degraded, removal_log) = inject_faults(&topo, &spec)?;
            emit(output.as_deref(), &serialize_topology(&degraded))?;
            if let Some(path) = log {
                fs::write(&path, removal_log.to_string())
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Route {
            input,
            output,
            engine,
            mode,
            threads,
        } => {
            let f = load_fabric(&input)?;
            let threads = resolve_threads(threads)?;
            let tables: RoutingTables = match engine {
                EngineArg::Dmodc => {
                    let mode = mode.unwrap_or(ModeArg::Updown).into();
                    let (pre, build) = dmodc_tables(&f, mode, threads)?;
                    if !build.gaps.is_empty() {
                        bail!(
                            "internal error: {} entries have finite cost but no qualifying port group",
                            build.gaps.len()
                        );
                    }
                    if build.unroutable > 0 {
                        log::warn!(
                            "{} (switch, destination) pairs are unreachable; their entries are left empty",
                            build.unroutable
                        );
                        if !verify::check_validity(&f, &pre.costs).valid {
                            log::warn!(
                                "some leaf pairs are mutually unreachable; delivery will have holes"
                            );
                        }
                    }
                    build.tables
                }
                EngineArg::Dmodk => {
                    if mode == Some(ModeArg::Plain) {
                        return Err(usage("--mode plain only applies to --engine dmodc"));
                    }
                    let meta = dmodk::certify(&f.topo)?;
                    dmodk::build_tables(&f, &meta)?
                }
            };
            emit(output.as_deref(), &tables.dump(&f))?;
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Verify {
            input,
            tables,
            report,
            threads,
        } => {
            let f = load_fabric(&input)?;
            let text = read_input(&tables)?;
            let file =
                parse_tables(&text).with_context(|| format!("parsing {}", tables.display()))?;
            let bound = file
                .bind(&f)
                .with_context(|| format!("binding {} to the topology", tables.display()))?;
            let pool = worker_pool(resolve_threads(threads)?)?;
            let sweep = pool.install(|| verify::sweep(&f, &bound));
            let json = format!("{:#}\n", sweep.to_json());
            print!("{json}");
            if let Some(path) = report {
                fs::write(&path, &json)
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
            if sweep.clean() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }

        Cmd::Analyze {
            input,
            tables,
            pattern,
            output,
        } => {
            let f = load_fabric(&input)?;
            let text = read_input(&tables)?;
            let file =
                parse_tables(&text).with_context(|| format!("parsing {}", tables.display()))?;
            let bound = file
                .bind(&f)
                .with_context(|| format!("binding {} to the topology", tables.display()))?;
            let flows = analysis::make_pattern(pattern, f.topo.num_nodes())?.flows;
            let report = analysis::link_loads(&f, &bound, &flows)?;
            emit(output.as_deref(), &loads_csv(&f, &report))?;
            log::info!(
                "{pattern}: {} flows, max load {}, mean {:.4}, floor {}",
                flows.len(),
                report.max_load,
                report.mean_load(),
                report.theoretical_floor
            );
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Compare {
            input,
            patterns,
            output,
        } => {
            let f = load_fabric(&input)?;
            let rows = analysis::compare_engines(&f, &patterns)?;
            let mut csv = String::from("engine,pattern,max_load,mean_load\n");
            for row in rows {
                match row.loads {
                    Some((max, mean)) => {
                        writeln!(csv, "{},{},{max},{mean:.4}", row.engine, row.pattern).unwrap()
                    }
                    None => writeln!(csv, "{},{},n/a,n/a", row.engine, row.pattern).unwrap(),
                }
            }
            emit(output.as_deref(), &csv)?;
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Bench {
            pgft,
            input,
            threads,
            reps,
            output,
        } => {
            if reps == 0 {
                return Err(usage("--reps must be at least 1"));
            }
            if threads.is_empty() {
                return Err(usage("--threads needs at least one count"));
            }
            let topo = match (pgft, input) {
                (Some(desc), _) => {
                    let spec: PgftSpec = desc
                        .parse()
                        .map_err(|e| usage(format!("bad --pgft: {e}")))?;
                    build_pgft(&spec)
                        .map_err(|e| usage(format!("bad --pgft: {e}")))?
                        .0
                }
                (None, Some(path)) => load_topology(&path)?,
                (None, None) => return Err(usage("provide --pgft or --input")),
            };
            let f = Fabric::prepare(topo).context("preparing fabric")?;
            let (nodes, switches) = (f.topo.num_nodes(), f.topo.num_switches());
            let mut csv = String::from("nodes,switches,threads,phase,seconds\n");
            for &t in &threads {
                if t == 0 {
                    return Err(usage("thread count must be at least 1"));
                }
                let pool = (t > 1).then(|| worker_pool(t)).transpose()?;
                let mut pre_s = Vec::with_capacity(reps);
                let mut routes_s = Vec::with_capacity(reps);
                for _ in 0..reps {
                    let started = Instant::now();
                    let pre = match &pool {
                        Some(pool) => dmodc::preprocess_par(&f, pool)?,
                        None => dmodc::preprocess(&f)?,
                    };
                    pre_s.push(started.elapsed().as_secs_f64());
                    let started = Instant::now();
                    let build = match &pool {
                        Some(pool) => {
                            dmodc::build_tables_par(&f, &pre, RouteMode::UpDownStrict, pool)?
                        }
                        None => dmodc::build_tables(&f, &pre, RouteMode::UpDownStrict)?,
                    };
                    routes_s.push(started.elapsed().as_secs_f64());
                    drop(build);
                }
                let pre = median_seconds(pre_s);
                let routes = median_seconds(routes_s);
                for (phase, seconds) in [
                    ("preprocess", pre),
                    ("routes", routes),
                    ("total", pre + routes),
                ] {
                    writeln!(csv, "{nodes},{switches},{t},{phase},{seconds:.6}").unwrap();
                }
            }
            emit(output.as_deref(), &csv)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
