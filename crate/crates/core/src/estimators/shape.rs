use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::WindowPolicy;
use crate::chemdist::{distance_field_from, wet_region};
use crate::clusters::label_clusters;
use crate::error::{invalid, Error, Result};
use crate::geometry::{hausdorff_distance, LatticeSet, NormBall};
use crate::lattice::{sample_configuration, sub_seed, BoxWindow};
use crate::stats::{fit_exponential_decay, DecayFit, DecayPoint};

/// Parameters of [`shape_deviation_curve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub p: f64,
    pub eps: f64,
    /// Increasing radii `t`.
    pub times: Vec<f64>,
    /// Replicas to accept, i.e. with the origin in the giant cluster.
    pub accepted: u64,
    /// Give up after this many sampled replicas.
    pub max_attempts: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub policy: WindowPolicy,
}

/// Exceedance fractions of `Hausdorff(B_t / t, ball) >= eps` among
/// replicas with the origin in the giant cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeStat {
    pub p: f64,
    pub eps: f64,
    pub times: Vec<f64>,
    pub exceed: Vec<u64>,
    pub accepted: u64,
    pub attempted: u64,
    /// Per-t mean of the Hausdorff distance.
    pub mean_distance: Vec<f64>,
    pub fit: Option<DecayFit>,
    pub rule_of_three: Vec<(f64, f64)>,
}

impl ShapeStat {
    pub fn fractions(&self) -> Vec<f64> {
        self.exceed.iter().map(|&c| c as f64 / self.accepted as f64).collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.attempted as f64
    }

    /// CSV with columns `t,exceed,accepted,fraction,mean_distance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,exceed,accepted,fraction,mean_distance\n");
        for (i, f) in self.fractions().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.times[i], self.exceed[i], self.accepted, f, self.mean_distance[i]
            ));
        }
        out
    }
}

/// Window large enough for `B_t` at the largest `t` plus room for the giant
/// cluster to be identified.
fn shape_window(policy: &WindowPolicy, d: usize, t_max: f64) -> Result<BoxWindow> {
    let half = t_max.ceil() as usize + (policy.margin_factor * t_max.sqrt()).ceil() as usize + 1;
    policy.cube(&vec![0; d], half)
}

pub fn shape_deviation_curve(params: &ShapeParams, ball: &NormBall) -> Result<ShapeStat> {
    if params.times.is_empty()
        || !(params.times[0] >= 1.0)
        || params.times.windows(2).any(|w| !(w[0] < w[1]))
        || params.times.iter().any(|t| !t.is_finite())
    {
        return Err(invalid("times", "must be finite, at least 1 and strictly increasing"));
    }
    if !(params.eps > 0.0) {
        return Err(invalid("eps", "must be positive"));
    }
    if params.accepted == 0 || params.max_attempts < params.accepted {
        return Err(invalid("accepted", "must be positive and at most max_attempts"));
    }
    let d = ball.d();
    let t_max = *params.times.last().expect("nonempty");
    let window = shape_window(&params.policy, d, t_max)?;
    let zero = window.require_index(&vec![0; d])?;
    let cutoff = t_max.floor() as u32;

    // Replica i is accepted or not regardless of chunking, so the accepted
    // set is the first `accepted` successes in index order.
    let chunk = params.accepted.max(16);
    let mut distances: Vec<Vec<f64>> = Vec::new();
    let mut attempted = 0u64;
    while (distances.len() as u64) < params.accepted && attempted < params.max_attempts {
        let end = (attempted + chunk).min(params.max_attempts);
        let batch: Vec<Option<Vec<f64>>> = (attempted..end)
            .into_par_iter()
            .map(|i| -> Result<Option<Vec<f64>>> {
                let conf = sample_configuration(&window, params.p, sub_seed(params.master_seed, i))?;
                if !label_clusters(&conf).in_giant(zero) {
                    return Ok(None);
                }
                let field = distance_field_from(&conf, zero, Some(cutoff));
                params
                    .times
                    .iter()
                    .map(|&t| {
                        let points = wet_region(&field, t)?
                            .into_iter()
                            .map(|v| window.coords_of(v))
                            .collect();
                        hausdorff_distance(&LatticeSet::new(points, 1.0 / t, true)?, ball, 1.0)
                    })
                    .collect::<Result<Vec<f64>>>()
                    .map(Some)
            })
            .collect::<Result<_>>()?;
        let mut consumed = 0;
        for outcome in batch {
            consumed += 1;
            if let Some(h) = outcome {
                distances.push(h);
                if distances.len() as u64 == params.accepted {
                    break;
                }
            }
        }
        attempted += consumed;
    }
    if (distances.len() as u64) < params.accepted {
        if distances.is_empty() {
            return Err(Error::NoAcceptedReplicas);
        }
        return Err(invalid(
            "max_attempts",
            format!("only {} of {} replicas accepted", distances.len(), params.accepted),
        ));
    }

    let accepted = distances.len() as u64;
    let exceed: Vec<u64> = (0..params.times.len())
        .map(|k| distances.iter().filter(|h| h[k] >= params.eps).count() as u64)
        .collect();
    let mean_distance = (0..params.times.len())
        .map(|k| distances.iter().map(|h| h[k]).sum::<f64>() / accepted as f64)
        .collect();
    let points: Vec<DecayPoint> = params
        .times
        .iter()
        .zip(&exceed)
        .map(|(&t, &c)| DecayPoint::new(t, c, accepted))
        .collect();
    let (fit, rule_of_three) = match fit_exponential_decay(&points) {
        Ok(f) => {
            let r3 = f.rule_of_three.clone();
            (Some(f), r3)
        }
        Err(Error::InsufficientEvents { rule_of_three, .. }) => (None, rule_of_three),
        Err(e) => return Err(e),
    };
    Ok(ShapeStat {
        p: params.p,
        eps: params.eps,
        times: params.times.clone(),
        exceed,
        accepted,
        attempted,
        mean_distance,
        fit,
        rule_of_three,
    })
}

/// Fraction of `replicas` windows, sized as in [`shape_deviation_curve`]
/// for radius `t_max`, whose origin lies in the giant cluster. Returns
/// `(members, replicas)`.
pub fn giant_membership_frequency(
    p: f64,
    d: usize,
    t_max: f64,
    replicas: u64,
    master_seed: u64,
    policy: &WindowPolicy,
) -> Result<(u64, u64)> {
    if replicas == 0 {
        return Err(invalid("replicas", "must be positive"));
    }
    let window = shape_window(policy, d, t_max)?;
    let zero = window.require_index(&vec![0; d])?;
    let members = (0..replicas)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let conf = sample_configuration(&window, p, sub_seed(master_seed, i))?;
            Ok(u64::from(label_clusters(&conf).in_giant(zero)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((members.iter().sum(), replicas))
}
