use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{seed_index, WindowPolicy};
use crate::chemdist::pair_distance;
use crate::clusters::{anchor_point, label_clusters, AnchorRule};
use crate::error::{invalid, Error, Result};
use crate::geometry::{DirectionValue, NormBall};
use crate::lattice::{sample_configuration, sub_seed};
use crate::stats::batch_means;
use crate::thresholds::subcritical_warning;

/// Parameters of [`estimate_mu_direction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuParams {
    pub p: f64,
    /// Primitive integer direction.
    pub direction: Vec<i64>,
    /// Strictly increasing scales `n`.
    pub scales: Vec<u64>,
    pub replicas: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub policy: WindowPolicy,
    #[serde(default)]
    pub anchor_rule: AnchorRule,
    /// Batches for the batch-means interval.
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_batches() -> usize {
    10
}

/// Per-scale replica values `D(anchor(0), anchor(n u)) / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleStat {
    pub scale: u64,
    pub values: Vec<f64>,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub attempted: u64,
    /// A path leaving the window could have been shorter.
    pub boundary_invalid: u64,
    /// Some anchor ball held no admissible vertex.
    pub empty_anchor: u64,
    /// Anchors found but not joined inside the window.
    pub disconnected: u64,
    /// Seed indices `[seed_start, seed_end)` used at this scale.
    pub seed_start: u64,
    pub seed_end: u64,
}

/// Raw data of one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSample {
    pub p: f64,
    pub direction: Vec<i64>,
    pub scales: Vec<ScaleStat>,
}

/// Time-constant estimate in one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuEstimate {
    pub sample: DirectionSample,
    /// Largest-scale mean, clamped below by `||u||_1`.
    pub mu_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Per-scale means are nonincreasing up to their interval widths.
    pub monotone: bool,
    pub warnings: Vec<String>,
}

impl MuEstimate {
    pub fn l1(&self) -> f64 {
        self.sample.direction.iter().map(|v| v.abs() as f64).sum()
    }

    pub fn direction_value(&self) -> DirectionValue {
        DirectionValue {
            direction: self.sample.direction.iter().map(|&v| v as f64).collect(),
            mu: self.mu_hat,
            ci: (self.ci_lo, self.ci_hi),
        }
    }
}

enum Outcome {
    Value(f64),
    Boundary,
    Empty,
    Disconnected,
}

fn validate(p: f64, direction: &[i64], scales: &[u64], replicas: u64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("probability must lie in [0, 1], got {p}")));
    }
    if direction.len() < 2 || direction.iter().all(|&v| v == 0) {
        return Err(invalid("direction", "must be a nonzero vector of dimension at least 2"));
    }
    let g = direction.iter().fold(0i64, |g, &v| gcd(g, v.abs()));
    if g != 1 {
        return Err(invalid("direction", "must be primitive"));
    }
    if scales.is_empty() || scales[0] == 0 || scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("scales", "must be positive and strictly increasing"));
    }
    if replicas == 0 {
        return Err(invalid("replicas", "must be positive"));
    }
    Ok(())
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Estimates `mu(u)` from anchor-to-anchor distances at each scale.
pub fn estimate_mu_direction(params: &MuParams) -> Result<MuEstimate> {
    validate(params.p, &params.direction, &params.scales, params.replicas)?;
    let d = params.direction.len();
    let l1: i64 = params.direction.iter().map(|v| v.abs()).sum();
    let mut warnings: Vec<String> = subcritical_warning(params.p, d).into_iter().collect();
    let mut stats = Vec::with_capacity(params.scales.len());
    for (s, &n) in params.scales.iter().enumerate() {
        let target: Vec<i64> = params.direction.iter().map(|&v| v * n as i64).collect();
        let length = (n as i64 * l1) as f64;
        let radius = length.sqrt();
        let needed = match params.anchor_rule {
            AnchorRule::GiantCluster => radius,
            AnchorRule::ReachesSphere { outer } => radius.max(outer as f64),
        };
        let window = params.policy.pair_window(&target, n as f64, needed + 1.0)?;
        let origin = vec![0i64; d];
        let outcomes: Vec<Outcome> = (0..params.replicas)
            .into_par_iter()
            .map(|i| -> Result<Outcome> {
                let seed = sub_seed(params.master_seed, seed_index(s, params.replicas, i));
                let conf = sample_configuration(&window, params.p, seed)?;
                let labels = label_clusters(&conf);
                let a0 = anchor_point(&conf, &labels, &origin, radius, params.anchor_rule)?;
                let a1 = anchor_point(&conf, &labels, &target, radius, params.anchor_rule)?;
                if a0.empty || a1.empty {
                    return Ok(Outcome::Empty);
                }
                if !labels.same_cluster(a0.index, a1.index) {
                    return Ok(Outcome::Disconnected);
                }
                let probe = pair_distance(&conf, a0.index, a1.index, None);
                match probe.distance {
                    Some(dist) if probe.is_exact() => Ok(Outcome::Value(f64::from(dist) / n as f64)),
                    Some(_) => Ok(Outcome::Boundary),
                    None => Ok(Outcome::Disconnected),
                }
            })
            .collect::<Result<_>>()?;
        let values: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| match o {
                Outcome::Value(v) => Some(*v),
                _ => None,
            })
            .collect();
        let count = |f: fn(&Outcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
        let iv = batch_means(&values, params.batches);
        let stat = ScaleStat {
            scale: n,
            mean: iv.mean,
            ci_lo: iv.lo,
            ci_hi: iv.hi,
            attempted: params.replicas,
            boundary_invalid: count(|o| matches!(o, Outcome::Boundary)),
            empty_anchor: count(|o| matches!(o, Outcome::Empty)),
            disconnected: count(|o| matches!(o, Outcome::Disconnected)),
            seed_start: seed_index(s, params.replicas, 0),
            seed_end: seed_index(s + 1, params.replicas, 0),
            values,
        };
        if stat.boundary_invalid > 0 {
            warnings.push(format!(
                "scale {n}: {} replicas excluded, the window may have cut a shorter path",
                stat.boundary_invalid
            ));
        }
        if stat.empty_anchor > 0 {
            warnings.push(format!(
                "scale {n}: {} replicas with an empty anchor ball",
                stat.empty_anchor
            ));
        }
        stats.push(stat);
    }
    let last = stats.last().expect("nonempty scales");
    if last.values.is_empty() {
        return Err(Error::NoAcceptedReplicas);
    }
    let monotone = stats.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        if a.values.is_empty() || b.values.is_empty() {
            return true;
        }
        let slack = (a.ci_hi - a.ci_lo) / 2.0 + (b.ci_hi - b.ci_lo) / 2.0;
        b.mean <= a.mean + slack
    });
    let floor = l1 as f64;
    Ok(MuEstimate {
        mu_hat: last.mean.max(floor),
        ci_lo: last.ci_lo.max(floor),
        ci_hi: last.ci_hi.max(floor),
        monotone,
        sample: DirectionSample {
            p: params.p,
            direction: params.direction.clone(),
            scales: stats,
        },
        warnings,
    })
}

/// Ratio `mu(u) / ||u||_1` with the flat-face verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatFace {
    pub ratio: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub tolerance: f64,
    /// The upper end of the interval is within `1 + tolerance`.
    pub flat: bool,
    pub estimate: MuEstimate,
}

/// Flat-face diagnostic from [`estimate_mu_direction`].
pub fn detect_flat_face(params: &MuParams, tolerance: f64) -> Result<FlatFace> {
    let estimate = estimate_mu_direction(params)?;
    let l1 = estimate.l1();
    let ratio = estimate.mu_hat / l1;
    let (ci_lo, ci_hi) = (estimate.ci_lo / l1, estimate.ci_hi / l1);
    Ok(FlatFace {
        ratio,
        ci_lo,
        ci_hi,
        tolerance,
        flat: ci_hi <= 1.0 + tolerance,
        estimate,
    })
}

/// The first `count` primitive vectors `u_1 >= .. >= u_d >= 0`, ordered by
/// largest coordinate and then lexicographically.
pub fn fundamental_directions(d: usize, count: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut m = 1i64;
    while out.len() < count {
        // All nonincreasing tuples with first entry m.
        let mut level: Vec<Vec<i64>> = Vec::new();
        let mut cur = vec![0i64; d];
        cur[0] = m;
        fn rec(i: usize, cap: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
            if i == cur.len() {
                out.push(cur.clone());
                return;
            }
            for v in 0..=cap {
                cur[i] = v;
                rec(i + 1, v, cur, out);
            }
        }
        rec(1, m, &mut cur, &mut level);
        level.sort();
        for u in level {
            if u.iter().fold(0, |g, &v| gcd(g, v)) == 1 && out.len() < count {
                out.push(u);
            }
        }
        m += 1;
    }
    out
}

/// Parameters of [`estimate_mu_ball`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallParams {
    pub p: f64,
    pub d: usize,
    /// Number of fundamental-domain directions, at least `d + 1`.
    pub directions: usize,
    /// Target ℓ¹ lengths; direction `u` uses scales `max(1, round(n / ||u||_1))`.
    pub scales: Vec<u64>,
    pub replicas: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub policy: WindowPolicy,
    #[serde(default)]
    pub anchor_rule: AnchorRule,
}

/// An estimated ball with its per-direction estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallEstimate {
    pub ball: NormBall,
    pub estimates: Vec<MuEstimate>,
}

/// Estimates `mu` on fundamental-domain directions and builds the
/// symmetrized polytope ball.
pub fn estimate_mu_ball(params: &BallParams) -> Result<BallEstimate> {
    if params.directions < params.d + 1 {
        return Err(invalid("directions", format!("need at least d + 1 = {}", params.d + 1)));
    }
    let dirs = fundamental_directions(params.d, params.directions);
    let mut estimates = Vec::with_capacity(dirs.len());
    for (k, u) in dirs.iter().enumerate() {
        let l1: i64 = u.iter().sum();
        let mut scales: Vec<u64> = params
            .scales
            .iter()
            .map(|&n| ((n as f64 / l1 as f64).round() as u64).max(1))
            .collect();
        scales.dedup();
        let mp = MuParams {
            p: params.p,
            direction: u.clone(),
            scales,
            replicas: params.replicas,
            master_seed: sub_seed(params.master_seed, k as u64),
            policy: params.policy,
            anchor_rule: params.anchor_rule,
            batches: default_batches(),
        };
        estimates.push(estimate_mu_direction(&mp)?);
    }
    let samples = estimates.iter().map(MuEstimate::direction_value).collect();
    let ball = NormBall::from_directions(params.d, samples)?;
    Ok(BallEstimate { ball, estimates })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, direction: Vec<i64>, scales: Vec<u64>, replicas: u64) -> MuParams {
        MuParams {
            p,
            direction,
            scales,
            replicas,
            master_seed: 11,
            policy: WindowPolicy::default(),
            anchor_rule: AnchorRule::GiantCluster,
            batches: 10,
        }
    }

    #[test]
    fn exact_at_p_one() {
        for u in [vec![1, 0], vec![2, 1], vec![1, 1, 1]] {
            let est = estimate_mu_direction(&params(1.0, u.clone(), vec![4, 8], 12)).unwrap();
            let l1: i64 = u.iter().sum();
            assert_eq!(est.mu_hat, l1 as f64);
            for s in &est.sample.scales {
                assert!(s.values.iter().all(|&v| v == l1 as f64));
                assert_eq!((s.ci_lo, s.ci_hi), (l1 as f64, l1 as f64));
            }
        }
    }

    #[test]
    fn estimate_respects_l1_floor_and_is_reproducible() {
        let a = estimate_mu_direction(&params(0.7, vec![1, 0], vec![8, 16], 20)).unwrap();
        let b = estimate_mu_direction(&params(0.7, vec![1, 0], vec![8, 16], 20)).unwrap();
        assert_eq!(a, b);
        assert!(a.mu_hat >= 1.0);
        assert_eq!(a.sample.scales[1].seed_start, 20);
    }

    #[test]
    fn invalid_inputs() {
        assert!(estimate_mu_direction(&params(0.7, vec![2, 0], vec![8], 5)).is_err());
        assert!(estimate_mu_direction(&params(0.7, vec![1, 0], vec![8, 8], 5)).is_err());
        assert!(estimate_mu_direction(&params(0.7, vec![1, 0], vec![8], 0)).is_err());
        let mut tiny = params(0.7, vec![1, 0], vec![64], 5);
        tiny.policy.max_vertices = 100;
        assert!(matches!(
            estimate_mu_direction(&tiny),
            Err(Error::ResourceExhausted { .. })
        ));
    }

    #[test]
    fn fundamental_direction_order() {
        assert_eq!(
            fundamental_directions(2, 6),
            vec![vec![1, 0], vec![1, 1], vec![2, 1], vec![3, 1], vec![3, 2], vec![4, 1]]
        );
        assert_eq!(
            fundamental_directions(3, 4),
            vec![vec![1, 0, 0], vec![1, 1, 0], vec![1, 1, 1], vec![2, 1, 0]]
        );
    }

    #[test]
    fn ball_at_p_one_is_l1() {
        let params = BallParams {
            p: 1.0,
            d: 2,
            directions: 3,
            scales: vec![8],
            replicas: 4,
            master_seed: 3,
            policy: WindowPolicy::default(),
            anchor_rule: AnchorRule::GiantCluster,
        };
        let est = estimate_mu_ball(&params).unwrap();
        assert_eq!(est.ball.vertices().len(), 4);
        assert!((est.ball.gauge(&[0.3, -0.5]) - 0.8).abs() < 1e-12);
        assert!(est.ball.is_symmetric(1e-12));
        let too_few = BallParams {
            directions: 2,
            ..params
        };
        assert!(estimate_mu_ball(&too_few).is_err());
    }

    #[test]
    fn flat_at_p_one() {
        let f = detect_flat_face(&params(1.0, vec![1, 1], vec![8], 5), 0.02).unwrap();
        assert_eq!(f.ratio, 1.0);
        assert!(f.flat);
    }
}
