use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{seed_index, WindowPolicy};
use crate::chemdist::{distance_field_from, pair_distance, UNREACHABLE};
use crate::clusters::{label_clusters, TailCurve};
use crate::error::{invalid, Error, Result};
use crate::geometry::NormBall;
use crate::lattice::{sample_configuration, sub_seed, BoxWindow};
use crate::stats::{binomial_se, fit_exponential_decay, DecayFit, DecayPoint};

/// Which deviation of `D(0, x)` from `mu(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// `D > (1 + eps) mu(x)`.
    Upper,
    /// `D < (1 - eps) mu(x)`.
    Lower,
}

/// Parameters of [`estimate_deviation_rate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub p: f64,
    pub direction: Vec<i64>,
    pub eps: f64,
    pub scales: Vec<u64>,
    pub replicas: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub policy: WindowPolicy,
}

/// Empirical deviation probabilities per scale with a log-linear fit
/// against `||n u||_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub p: f64,
    pub direction: Vec<i64>,
    pub eps: f64,
    pub tail: Tail,
    /// `mu(u)` used for the thresholds.
    pub mu_hat: f64,
    pub scales: Vec<u64>,
    /// `||n u||_1` per scale.
    pub x: Vec<f64>,
    pub counts: Vec<u64>,
    /// Replicas whose event status is certain.
    pub totals: Vec<u64>,
    /// Replicas excluded because the window could have changed the outcome.
    pub invalid: Vec<u64>,
    pub fit: Option<DecayFit>,
    /// `(x, -ln(3/total))` for zero-count scales.
    pub rule_of_three: Vec<(f64, f64)>,
    /// Lower tail only: `(1 - eps) mu(u) <= ||u||_1`, so the event is empty.
    pub infeasible: bool,
    /// Analytic upper bound on the slope, when finite.
    pub bound: Option<f64>,
}

impl RateEstimate {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.totals)
            .map(|(&c, &t)| if t == 0 { f64::NAN } else { c as f64 / t as f64 })
            .collect()
    }

    /// CSV with columns `scale,x,count,total,invalid,phat`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scale,x,count,total,invalid,phat\n");
        for (i, f) in self.frequencies().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.scales[i], self.x[i], self.counts[i], self.totals[i], self.invalid[i], f
            ));
        }
        out
    }
}

/// Analytic reference values for the deviation rates per unit ℓ¹ length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    /// `|ln p|`, or `None` when the lower deviation is impossible.
    pub lower: Option<f64>,
    pub lower_infeasible: bool,
    /// `(1 + eps) |ln(p (1 - p)^{2d})|`; infinite at `p = 1`.
    pub upper: f64,
}

/// Upper bounds on the true rates: the lower tail is at least as likely as
/// the straight path being open, the upper tail at least as likely as a
/// forced detour corridor.
pub fn theoretical_rate_bounds(p: f64, eps: f64, d: usize, mu_u: f64, l1_u: f64) -> RateBounds {
    let lower_infeasible = (1.0 - eps) * mu_u <= l1_u;
    let upper = (1.0 + eps) * (p * (1.0 - p).powi(2 * d as i32)).ln().abs();
    RateBounds {
        lower: (!lower_infeasible).then(|| p.ln().abs()),
        lower_infeasible,
        upper,
    }
}

#[derive(Clone, Copy)]
enum Verdict {
    Event,
    NoEvent,
    Unknown,
}

/// Upper- and lower-tail deviation estimates along `direction`, with
/// thresholds from `ball`'s gauge.
pub fn estimate_deviation_rate(params: &RateParams, ball: &NormBall) -> Result<(RateEstimate, RateEstimate)> {
    let d = params.direction.len();
    if ball.d() != d {
        return Err(invalid("direction", "dimension differs from the ball"));
    }
    if !(params.eps > 0.0 && params.eps < 1.0) {
        return Err(invalid("eps", "must lie in (0, 1)"));
    }
    if !(0.0..=1.0).contains(&params.p) {
        return Err(invalid("p", "probability must lie in [0, 1]"));
    }
    if params.scales.is_empty() || params.scales[0] == 0 || params.scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("scales", "must be positive and strictly increasing"));
    }
    if params.replicas == 0 {
        return Err(invalid("replicas", "must be positive"));
    }
    if params.direction.iter().all(|&v| v == 0) {
        return Err(invalid("direction", "must be nonzero"));
    }
    let mu_u = ball.gauge_int(&params.direction);
    let l1_u: f64 = params.direction.iter().map(|v| v.abs() as f64).sum();

    let mut verdicts: Vec<Vec<(Verdict, Verdict)>> = Vec::new();
    for (s, &n) in params.scales.iter().enumerate() {
        let target: Vec<i64> = params.direction.iter().map(|&v| v * n as i64).collect();
        let upper_thr = (1.0 + params.eps) * mu_u * n as f64;
        let lower_thr = (1.0 - params.eps) * mu_u * n as f64;
        let cutoff = upper_thr.floor() as u32 + 1;
        let window = params.policy.pair_window(&target, n as f64, 0.0)?;
        let origin = vec![0i64; d];
        let zero = window.require_index(&origin)?;
        let far = window.require_index(&target)?;
        let row = (0..params.replicas)
            .into_par_iter()
            .map(|i| -> Result<(Verdict, Verdict)> {
                let seed = sub_seed(params.master_seed, seed_index(s, params.replicas, i));
                let conf = sample_configuration(&window, params.p, seed)?;
                let probe = pair_distance(&conf, zero, far, Some(cutoff));
                let connected = probe.distance.is_some() || label_clusters(&conf).same_cluster(zero, far);
                if !connected {
                    return Ok((Verdict::NoEvent, Verdict::NoEvent));
                }
                // D_window >= D >= min(D_window, escape bound).
                let window_d = probe.distance.map_or(f64::INFINITY, f64::from);
                let floor = match probe.escape_bound {
                    Some(e) => window_d.min(f64::from(e)),
                    None => window_d,
                };
                let upper = if floor > upper_thr {
                    Verdict::Event
                } else if window_d <= upper_thr {
                    Verdict::NoEvent
                } else {
                    Verdict::Unknown
                };
                let lower = if window_d < lower_thr {
                    Verdict::Event
                } else if floor >= lower_thr {
                    Verdict::NoEvent
                } else {
                    Verdict::Unknown
                };
                Ok((upper, lower))
            })
            .collect::<Result<Vec<_>>>()?;
        verdicts.push(row);
    }

    let bounds = theoretical_rate_bounds(params.p, params.eps, d, mu_u, l1_u);
    let x: Vec<f64> = params.scales.iter().map(|&n| n as f64 * l1_u).collect();
    let build = |tail: Tail| {
        let pick = |v: &(Verdict, Verdict)| match tail {
            Tail::Upper => v.0,
            Tail::Lower => v.1,
        };
        let mut counts = Vec::new();
        let mut totals = Vec::new();
        let mut invalid = Vec::new();
        for row in &verdicts {
            let (mut c, mut t, mut u) = (0, 0, 0);
            for v in row {
                match pick(v) {
                    Verdict::Event => {
                        c += 1;
                        t += 1;
                    }
                    Verdict::NoEvent => t += 1,
                    Verdict::Unknown => u += 1,
                }
            }
            counts.push(c);
            totals.push(t);
            invalid.push(u);
        }
        let points: Vec<DecayPoint> = x
            .iter()
            .zip(counts.iter().zip(&totals))
            .map(|(&xi, (&c, &t))| DecayPoint::new(xi, c, t))
            .collect();
        let (fit, rule_of_three) = match fit_exponential_decay(&points) {
            Ok(f) => {
                let r3 = f.rule_of_three.clone();
                (Some(f), r3)
            }
            Err(Error::InsufficientEvents { rule_of_three, .. }) => (None, rule_of_three),
            Err(_) => (None, Vec::new()),
        };
        let (infeasible, bound) = match tail {
            Tail::Upper => (false, bounds.upper.is_finite().then_some(bounds.upper)),
            Tail::Lower => (bounds.lower_infeasible, bounds.lower),
        };
        RateEstimate {
            p: params.p,
            direction: params.direction.clone(),
            eps: params.eps,
            tail,
            mu_hat: mu_u,
            scales: params.scales.clone(),
            x: x.clone(),
            counts,
            totals,
            invalid,
            fit,
            rule_of_three,
            infeasible,
            bound,
        }
    };
    Ok((build(Tail::Upper), build(Tail::Lower)))
}

/// One supermultiplicativity comparison `P(m + n) >= P(m) P(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkgCheck {
    pub m: u64,
    pub n: u64,
    pub p_m: f64,
    pub p_n: f64,
    pub p_sum: f64,
    /// Holds within `sigmas` standard errors.
    pub holds: bool,
}

/// Checks every pair of scales whose sum is also a scale.
pub fn fkg_check(estimate: &RateEstimate, sigmas: f64) -> Vec<FkgCheck> {
    let freq = estimate.frequencies();
    let se: Vec<f64> = estimate
        .counts
        .iter()
        .zip(&estimate.totals)
        .map(|(&c, &t)| binomial_se(c, t))
        .collect();
    let pos = |s: u64| estimate.scales.iter().position(|&x| x == s);
    let mut out = Vec::new();
    for i in 0..estimate.scales.len() {
        for j in i..estimate.scales.len() {
            let (m, n) = (estimate.scales[i], estimate.scales[j]);
            if let Some(k) = pos(m + n) {
                let product = freq[i] * freq[j];
                let var = se[k].powi(2) + (freq[j] * se[i]).powi(2) + (freq[i] * se[j]).powi(2);
                out.push(FkgCheck {
                    m,
                    n,
                    p_m: freq[i],
                    p_n: freq[j],
                    p_sum: freq[k],
                    holds: freq[k] >= product - sigmas * var.sqrt(),
                });
            }
        }
    }
    out
}

/// Parameters of [`distance_ratio_tail`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTailParams {
    pub p: f64,
    pub direction: Vec<i64>,
    /// Ratio `rho` in `D >= rho ||x||_1`.
    pub ratio: f64,
    pub radii: Vec<usize>,
    pub replicas: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub policy: WindowPolicy,
}

/// Frequencies of `{0 <-> x, D(0, x) >= ratio ||x||_1}` for `x = r u`.
///
/// One window per replica serves all radii. Its half-width exceeds the
/// largest threshold, so no path shorter than a threshold can leave it and
/// every verdict is exact.
pub fn distance_ratio_tail(params: &DistanceTailParams) -> Result<TailCurve> {
    if params.radii.is_empty() || params.radii[0] == 0 || params.radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("radii", "must be positive and strictly increasing"));
    }
    if params.replicas == 0 {
        return Err(invalid("replicas", "must be positive"));
    }
    if !(params.ratio >= 1.0) || !params.ratio.is_finite() {
        return Err(invalid("ratio", "must be at least 1"));
    }
    let d = params.direction.len();
    let l1u: i64 = params.direction.iter().map(|v| v.abs()).sum();
    if d < 2 || l1u == 0 {
        return Err(invalid("direction", "must be a nonzero vector of dimension at least 2"));
    }
    let thresholds: Vec<u32> = params
        .radii
        .iter()
        .map(|&r| (params.ratio * (r as i64 * l1u) as f64).ceil() as u32)
        .collect();
    let max_thr = *thresholds.iter().max().expect("nonempty");
    let origin = vec![0i64; d];
    let window: BoxWindow = params.policy.cube(&origin, max_thr as usize + 1)?;
    let zero = window.require_index(&origin)?;
    let targets: Vec<usize> = params
        .radii
        .iter()
        .map(|&r| {
            let x: Vec<i64> = params.direction.iter().map(|&v| v * r as i64).collect();
            window.require_index(&x)
        })
        .collect::<Result<_>>()?;
    let hits: Vec<Vec<bool>> = (0..params.replicas)
        .into_par_iter()
        .map(|i| -> Result<Vec<bool>> {
            let conf = sample_configuration(&window, params.p, sub_seed(params.master_seed, i))?;
            let field = distance_field_from(&conf, zero, Some(max_thr));
            let mut labels = None;
            Ok(targets
                .iter()
                .zip(&thresholds)
                .map(|(&t, &thr)| {
                    let dist = field.distances()[t];
                    if dist != UNREACHABLE {
                        return dist >= thr;
                    }
                    let l = labels.get_or_insert_with(|| label_clusters(&conf));
                    l.same_cluster(zero, t)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let counts = (0..params.radii.len())
        .map(|k| hits.iter().filter(|h| h[k]).count() as u64)
        .collect();
    Ok(TailCurve::new(
        format!("distance_ratio_{}", params.ratio),
        params.radii.clone(),
        counts,
        params.replicas,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_bounds() {
        let b = theoretical_rate_bounds(0.7, 0.3, 2, 1.2, 1.0);
        let expected = 1.3 * (0.7f64 * 0.3f64.powi(4)).ln().abs();
        assert!((b.upper - expected).abs() < 1e-12);
        assert!((b.upper - 6.724).abs() < 0.01);
        assert!(b.lower_infeasible);
        let b = theoretical_rate_bounds(0.999, 0.1, 2, 1.5, 1.0);
        assert!(!b.lower_infeasible);
        assert!(b.lower.unwrap() < 1.1e-3);
        assert!(theoretical_rate_bounds(1.0, 0.3, 2, 1.0, 1.0).upper.is_infinite());
    }

    fn rate_params(p: f64) -> RateParams {
        RateParams {
            p,
            direction: vec![1, 0],
            eps: 0.3,
            scales: vec![4, 8, 12],
            replicas: 200,
            master_seed: 5,
            policy: WindowPolicy::default(),
        }
    }

    #[test]
    fn no_deviations_at_p_one() {
        let ball = NormBall::l1(2).unwrap();
        let (up, low) = estimate_deviation_rate(&rate_params(1.0), &ball).unwrap();
        assert!(up.counts.iter().all(|&c| c == 0));
        assert!(low.counts.iter().all(|&c| c == 0));
        assert!(up.totals.iter().all(|&t| t == 200));
        assert!(up.fit.is_none());
        assert_eq!(up.rule_of_three.len(), 3);
        assert!(low.infeasible);
    }

    #[test]
    fn infeasible_lower_tail_has_no_events() {
        let ball = NormBall::l1(2).unwrap();
        let (up, low) = estimate_deviation_rate(&rate_params(0.7), &ball).unwrap();
        assert!(low.infeasible);
        assert!(low.counts.iter().all(|&c| c == 0));
        assert!(up.counts.iter().zip(&up.totals).all(|(c, t)| c <= t));
        assert!(up.counts.iter().any(|&c| c > 0));
        assert!(up.to_csv().starts_with("scale,x,count,total,invalid,phat\n4,4,"));
    }

    #[test]
    fn fkg_pairs() {
        let est = RateEstimate {
            p: 0.9,
            direction: vec![1, 0],
            eps: 0.1,
            tail: Tail::Lower,
            mu_hat: 1.2,
            scales: vec![2, 4, 6],
            x: vec![2.0, 4.0, 6.0],
            counts: vec![50, 30, 10],
            totals: vec![100, 100, 100],
            invalid: vec![0, 0, 0],
            fit: None,
            rule_of_three: vec![],
            infeasible: false,
            bound: None,
        };
        let checks = fkg_check(&est, 3.0);
        assert_eq!(checks.len(), 2);
        assert!(checks.iter().all(|c| c.holds));
        assert_eq!((checks[0].m, checks[0].n), (2, 2));
    }

    #[test]
    fn distance_ratio_curve_at_p_one() {
        let params = DistanceTailParams {
            p: 1.0,
            direction: vec![1, 0],
            ratio: 3.0,
            radii: vec![2, 4],
            replicas: 10,
            master_seed: 1,
            policy: WindowPolicy::default(),
        };
        let c = distance_ratio_tail(&params).unwrap();
        assert_eq!(c.counts, vec![0, 0]);
        // With ratio 1 the event is certain at p = 1.
        let c = distance_ratio_tail(&DistanceTailParams { ratio: 1.0, ..params }).unwrap();
        assert_eq!(c.counts, vec![10, 10]);
    }
}
