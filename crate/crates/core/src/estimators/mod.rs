//! Monte Carlo estimators built on the lattice, cluster, distance and
//! geometry layers.

mod mu;
mod rate;
mod shape;

pub use mu::{
    detect_flat_face, estimate_mu_ball, estimate_mu_direction, fundamental_directions, BallEstimate, BallParams,
    DirectionSample, FlatFace, MuEstimate, MuParams, ScaleStat,
};
pub use rate::{
    distance_ratio_tail, estimate_deviation_rate, fkg_check, theoretical_rate_bounds, DistanceTailParams, FkgCheck,
    RateBounds, RateEstimate, RateParams, Tail,
};
pub use shape::{giant_membership_frequency, shape_deviation_curve, ShapeParams, ShapeStat};

pub use crate::stats::{fit_exponential_decay, DecayFit, DecayPoint};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::BoxWindow;

/// How windows are sized around a pair of endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPolicy {
    /// Margin in units of `sqrt(scale)` added around the endpoints.
    pub margin_factor: f64,
    /// Largest number of vertices a window may have.
    pub max_vertices: usize,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy {
            margin_factor: 4.0,
            max_vertices: 1 << 26,
        }
    }
}

impl WindowPolicy {
    /// Cube centred at the rounded midpoint of `0` and `x`, with half-width
    /// `||x||_1 + max(margin_factor sqrt(scale), extra)`.
    pub fn pair_window(&self, x: &[i64], scale: f64, extra: f64) -> Result<BoxWindow> {
        let l1: i64 = x.iter().map(|v| v.abs()).sum();
        let margin = (self.margin_factor * scale.sqrt()).max(extra);
        let half = (l1 as f64 + margin).ceil() as usize;
        let mid: Vec<i64> = x.iter().map(|&v| v.div_euclid(2)).collect();
        self.cube(&mid, half)
    }

    /// Cube `center + [-half, half]^d` within the vertex budget.
    pub fn cube(&self, center: &[i64], half: usize) -> Result<BoxWindow> {
        let side = 2 * half + 1;
        let required = side.checked_pow(center.len() as u32).unwrap_or(usize::MAX);
        if required > self.max_vertices {
            return Err(Error::ResourceExhausted {
                required,
                budget: self.max_vertices,
            });
        }
        BoxWindow::centered(center, half)
    }
}

/// Seed index of replica `i` at scale position `s` when every scale uses
/// `replicas` replicas.
pub(crate) fn seed_index(s: usize, replicas: u64, i: u64) -> u64 {
    s as u64 * replicas + i
}
