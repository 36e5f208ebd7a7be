//! Geodesic-lifted point embeddings.
//!
//! A mapping network sends samples of the unit ball to `R^(3+K)`. The first
//! three output coordinates are surface positions, the remaining `K` are
//! lifting coordinates chosen so that the Euclidean metric of the full
//! embedding reproduces surface geodesic distances. Training combines a
//! Chamfer term with a geodesic term whose targets come from a soft lookup
//! into graph shortest paths over the ground-truth samples.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: point clouds, synthetic shapes, unit-ball sampling, k-NN.
//! * [`geodesic`]: neighbor graphs, Dijkstra distances, analytic references.
//! * [`soft_geodesic`]: confidence-weighted geodesic targets for off-graph points.
//! * [`losses`]: Chamfer and geodesic losses with analytic gradients.
//! * [`network`]: the MLP, Adam, the per-object fitting loop and a hypernetwork.
//! * [`analysis`]: neighborhoods, normals, normal consistency, chart clustering.
//! * [`meshing`]: per-chart UV surfaces, triangulation and mesh sampling.
//! * [`io`]: XYZ / PLY / OBJ / distance-matrix / embedding file formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod embedding;
pub mod error;
pub mod geodesic;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod meshing;
pub mod network;
pub mod soft_geodesic;

pub use embedding::LiftedEmbedding;
pub use error::{Error, Result};
pub use geometry::{BoxTransform, PointCloud, SampleSet, ShapeKind, ShapeSpec};

pub type Point = nalgebra::Point3<f64>;
pub type Vector = nalgebra::Vector3<f64>;

/// Deterministic RNG used everywhere a seed is accepted.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
