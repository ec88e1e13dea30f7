//! CVRP/CVRPTW solver toolkit built around a learned *edge selector*:
//! classifiers that mark solution edges as fixed (prohibited) so the local
//! search can skip moves that would break them, pruning the neighborhood.
//!
//! The crate provides:
//!
//! - instance parsing (CVRPLIB and Solomon formats), a seeded instance
//!   generator and a rounded/exact Euclidean distance oracle ([`instance`],
//!   [`parse`], [`generate`]);
//! - solution representation with cost/feasibility evaluation and an
//!   edge-set view ([`solution`]);
//! - savings and sweep construction ([`construct`]);
//! - a granular local-search engine with a tabu-edge filter and aspiration
//!   override ([`moves`], [`search`]);
//! - three selector families: gradient-boosted trees, a feedforward net
//!   (both on four per-edge features) and a graph ConvNet operating on the
//!   solution graph ([`features`], [`gbt`], [`fnn`], [`gnn`], [`labeling`]);
//! - dataset construction and training loops ([`training`]);
//! - two metaheuristic drivers wiring selectors into search: an iterated
//!   local search and a population-based search ([`driver`]);
//! - benchmark orchestration, gap tables and a one-tailed Wilcoxon
//!   signed-rank test ([`bench`], [`stats`]).

pub mod bench;
pub mod construct;
pub mod driver;
pub mod error;
pub mod features;
pub mod fnn;
pub mod gbt;
pub mod generate;
pub mod gnn;
pub mod instance;
pub mod labeling;
pub mod moves;
pub mod parse;
pub mod search;
pub mod solution;
pub mod stats;
pub mod threshold;
pub mod training;

pub use error::{Error, Result};
pub use instance::{DistanceMode, DistanceOracle, Instance, InstanceKind, Node};
