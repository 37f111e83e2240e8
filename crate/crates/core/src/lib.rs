//! Semi-online bipartite matching.
//!
//! An instance is a bipartite graph whose offline side is known up front and
//! whose online side arrives one node at a time. Part of the online side is
//! *predicted*: its neighborhoods are available before the first arrival as a
//! predicted graph `H`. The remaining *adversarial* nodes are only revealed on
//! arrival. The fraction of the optimum hidden from the algorithm is
//! `delta = 1 - nu(H) / nu(G)`.
//!
//! The crate provides:
//!
//! - [`graph`]: bipartite graphs, Hopcroft-Karp, brute-force oracles.
//! - [`skeleton`]: the matching-skeleton decomposition of a predicted graph.
//! - [`rounding`]: marginal-preserving dependent rounding.
//! - [`integral`]: iterative and structured sampling, RANKING, the agnostic
//!   integral algorithm.
//! - [`fractional`]: skeleton-initialised water filling, its dual certificate,
//!   the balanced quadratic program and reconstruction from offline duals.
//! - [`set_systems`]: max-min distributions over equal-size set families.
//! - [`ski_rental`]: the semi-online ski rental strategy.
//! - [`generators`]: instance generators and the agnostic hard instance.
//! - [`harness`]: trials, experiments, bound lines and reports.

pub mod error;
mod flow;
pub mod fractional;
pub mod generators;
pub mod graph;
pub mod harness;
pub mod integral;
pub mod rng;
pub mod rounding;
pub mod set_systems;
pub mod skeleton;
pub mod ski_rental;

pub use error::{Error, Result};
pub use graph::{BipartiteGraph, FractionalMatching, Matching};
