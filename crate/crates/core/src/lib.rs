//! Stable quadrangulations.
//!
//! Random planar quadrangulations obtained by feeding labelled
//! Bienaymé–Galton–Watson trees with α-stable offspring tails through the
//! Cori–Vauquelin–Schaeffer (CVS) construction, together with the graph
//! metrics and scaling statistics used to study them.
//!
//! This crate is `no_std` and only needs `alloc`. File formats, the
//! parallel experiment harness and the command line live in the `stableq`
//! crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cvs;
pub mod gwtree;
pub mod mapmetric;
pub mod offspring;
pub mod scaling;
pub mod seed;
pub mod special;

pub use cvs::{build_quadrangulation, validate_quadrangulation, Epsilon, QuadMap, SuccessorTable};
pub use gwtree::{
    assign_labels, contour_exploration, cycle_shift_to_excursion, sample_conditioned_increments,
    tree_from_lukasiewicz, CornerSequence, LabelledTree, LukasiewiczExcursion, PlaneTree,
};
pub use mapmetric::{ball_profile, bfs_distances, BallProfile, MapGraph};
pub use offspring::OffspringLaw;
pub use scaling::{fit_loglog_slope, RescalingConstants, SlopeFit};

use thiserror::Error;

/// Errors produced by the core algorithms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter out of range: {0}")]
    Domain(&'static str),
    #[error("offspring table construction failed: {0}")]
    Construction(&'static str),
    #[error("sampling budget exhausted after {trials} trials")]
    SamplingBudget { trials: u64 },
    #[error("malformed coding: {0}")]
    Coding(&'static str),
    #[error("tree has no edges, contour is empty")]
    EmptyContour,
    #[error("labels are not admissible at vertex {vertex}")]
    Admissibility { vertex: usize },
    #[error("index {index} out of range (limit {limit})")]
    OutOfRange { index: usize, limit: usize },
    #[error("invariant violated: {0}")]
    Invariant(alloc::string::String),
    #[error("internal construction error: {0}")]
    Internal(&'static str),
    #[error("invalid configuration: {0}")]
    Config(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
