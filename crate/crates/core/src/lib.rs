//! Monte Carlo laboratory for the chemical distance on supercritical
//! Bernoulli bond percolation clusters.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: finite box windows of `Z^d`, edge indexing and seeded
//!   configuration sampling.
//! * [`clusters`]: union-find cluster labels, the giant-cluster proxy for the
//!   infinite cluster, anchor points and cluster tail diagnostics.
//! * [`chemdist`]: BFS chemical distances, wet regions, half-space passage
//!   times and box crossing times.
//! * [`geometry`]: lattice symmetries, adapted bases, norm-ball polytopes,
//!   support normals and Hausdorff distances.
//! * [`estimators`]: time constant, deviation rates, flat faces and shape
//!   deviation curves.
//! * [`renorm`]: wired/unwired fields and the macroscopic edge process.

// Parameter checks use `!(x > 0.0)` style comparisons so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chemdist;
pub mod clusters;
mod error;
pub mod estimators;
pub mod geometry;
pub mod lattice;
pub mod renorm;
pub mod stats;
pub mod thresholds;

pub use chemdist::{DistanceField, HalfSpace, UNREACHABLE};
pub use clusters::{AnchorRule, ClusterLabels, TailCurve};
pub use error::{Error, Result};
pub use estimators::{MuEstimate, RateEstimate, ShapeStat};
pub use geometry::{AdaptedBasis, NormBall, SignedPermutation, SupportData};
pub use lattice::{derive_seed, BoxWindow, Configuration, SeedStream};
