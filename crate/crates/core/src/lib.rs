//! Routing toolkit for parallel generalised fat-trees (PGFTs).
//!
//! The crate covers the full offline routing workflow of a fat-tree fabric:
//!
//! * [`topology`] — PGFT generation, a plain-text exchange format, levelling
//!   (rank recovery from leaf anchors), port grouping and seeded fault
//!   injection.
//! * [`dmodc`] — the deterministic engine: a two-sweep cost/divider
//!   preprocessing pass over the degraded graph followed by closed-form
//!   per-destination port selection. Linear-time, fault-resilient, and
//!   bit-identical regardless of thread count.
//! * [`dmodk`] — the classical closed-form reference for pristine PGFTs,
//!   computed purely from switch labels. Agrees with [`dmodc`] on complete
//!   PGFTs and serves as its oracle.
//! * [`verify`] — forwarding-table validation: hole detection, loop budget,
//!   up*/down* shape checking and path-length bounds.
//! * [`analysis`] — static congestion analysis of traffic patterns over the
//!   computed tables (per-link load counts, histograms, balance bounds).
//! * [`tables`] — the forwarding-table dump format shared by all engines.
//!
//! The `pgft-route` binary (feature `cli`, on by default) exposes the whole
//! pipeline as subcommands; the `parallel` feature threads the preprocessing
//! and table-construction sweeps with rayon without changing any output.

pub mod analysis;
pub mod dmodc;
pub mod dmodk;
pub mod tables;
pub mod topology;
pub mod verify;

pub use topology::{Fabric, Guid, Topology};
