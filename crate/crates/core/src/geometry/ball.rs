use serde::{Deserialize, Serialize};

use super::hull::convex_hull;
use super::signed_permutations;
use crate::error::{invalid, Error, Result};

/// An estimated value of the norm in one direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionValue {
    pub direction: Vec<f64>,
    pub mu: f64,
    pub ci: (f64, f64),
}

/// Facet inequality `<normal, x> <= offset` with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Constants of the polytope norm `g`, all computed exactly from its
/// vertices and facets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallConstants {
    /// Largest `k1` with `k1 ||x||_2 <= g(x)`: `1 / max_v ||v||_2`.
    pub k1: f64,
    /// Smallest `k2` with `g(x) <= k2 ||x||_2`: `max_f 1 / offset_f`.
    pub k2: f64,
    /// `k1 / k2`, a lower bound for `<y, n_y>` over unit `y`.
    pub c_d: f64,
    /// `k1 / max_i g(±e_i)`, a lower bound for the ℓ¹ distance from the
    /// origin to the half-space beyond `r y` along `n_y`, per unit `r`.
    pub c_d_l1: f64,
    /// Minimum of `g` over the ℓ¹ unit sphere: `1 / max_v ||v||_1`.
    pub mu_inf: f64,
    /// `g(e_1)`.
    pub mu_e1: f64,
}

/// Supporting hyperplane data of a [`NormBall`] in a direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportData {
    pub y: Vec<f64>,
    /// Outward unit normal.
    pub normal: Vec<f64>,
    /// Boundary point of the unit ball along `y`.
    pub contact: Vec<f64>,
    pub c_d: f64,
    pub c_d_l1: f64,
}

/// Polytope unit ball of an estimated norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBall {
    d: usize,
    samples: Vec<DirectionValue>,
    vertices: Vec<Vec<f64>>,
    facets: Vec<Facet>,
    constants: BallConstants,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(y: &[f64]) -> Result<Vec<f64>> {
    let n = dot(y, y).sqrt();
    if !(n > 0.0) || !n.is_finite() {
        return Err(invalid("y", "direction must be finite and nonzero"));
    }
    Ok(y.iter().map(|v| v / n).collect())
}

const SUPPORT_TOL: f64 = 1e-9;

impl NormBall {
    /// Hull of `u / mu(u)` over the samples and all their images under the
    /// lattice symmetries.
    pub fn from_directions(d: usize, samples: Vec<DirectionValue>) -> Result<Self> {
        if samples
            .iter()
            .any(|s| s.direction.len() != d || !(s.mu > 0.0) || !s.mu.is_finite())
        {
            return Err(invalid(
                "samples",
                "directions must have length d and positive finite values",
            ));
        }
        let group = signed_permutations(d);
        let mut points = Vec::with_capacity(samples.len() * group.len());
        for s in &samples {
            let base: Vec<f64> = s.direction.iter().map(|x| x / s.mu).collect();
            for g in &group {
                points.push(g.apply(&base));
            }
        }
        let mut ball = Self::from_points(&points)?;
        ball.samples = samples;
        Ok(ball)
    }

    /// Hull of arbitrary points; the origin must be interior.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map(Vec::len).ok_or(Error::DegeneratePolytope)?;
        if points.iter().any(|p| p.len() != d || p.iter().any(|x| !x.is_finite())) {
            return Err(invalid("points", "must be finite with a common dimension"));
        }
        let hull = convex_hull(points)?;
        let facets = hull
            .facets
            .into_iter()
            .map(|(normal, offset)| Facet { normal, offset })
            .collect();
        let mut ball = NormBall {
            d,
            samples: Vec::new(),
            vertices: hull.vertices,
            facets,
            constants: BallConstants {
                k1: 0.0,
                k2: 0.0,
                c_d: 0.0,
                c_d_l1: 0.0,
                mu_inf: 0.0,
                mu_e1: 0.0,
            },
        };
        ball.constants = ball.compute_constants();
        Ok(ball)
    }

    /// The ℓ¹ unit ball.
    pub fn l1(d: usize) -> Result<Self> {
        let mut pts = Vec::new();
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut v = vec![0.0; d];
                v[i] = s;
                pts.push(v);
            }
        }
        Self::from_points(&pts)
    }

    /// Polytope inscribed in the Euclidean unit sphere: a regular
    /// `resolution`-gon for `d = 2`, a latitude/longitude net for `d = 3`.
    pub fn euclidean(d: usize, resolution: usize) -> Result<Self> {
        let res = resolution.max(4);
        let tau = std::f64::consts::TAU;
        let pts: Vec<Vec<f64>> = match d {
            2 => (0..res)
                .map(|k| {
                    let a = tau * k as f64 / res as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect(),
            3 => {
                let mut pts = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]];
                for i in 1..res {
                    let theta = std::f64::consts::PI * i as f64 / res as f64;
                    for k in 0..2 * res {
                        let phi = tau * k as f64 / (2 * res) as f64;
                        pts.push(vec![theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
                    }
                }
                pts
            }
            _ => return Err(invalid("d", "norm-ball polytopes are supported in dimensions 2 and 3")),
        };
        Self::from_points(&pts)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn samples(&self) -> &[DirectionValue] {
        &self.samples
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn constants(&self) -> BallConstants {
        self.constants
    }

    /// Gauge `g(x) = max_f <n_f, x> / offset_f`.
    pub fn gauge(&self, x: &[f64]) -> f64 {
        self.facets
            .iter()
            .map(|f| dot(&f.normal, x) / f.offset)
            .fold(0.0f64, f64::max)
    }

    /// Gauge on an integer vector.
    pub fn gauge_int(&self, x: &[i64]) -> f64 {
        self.gauge(&x.iter().map(|&v| v as f64).collect::<Vec<_>>())
    }

    /// Support function `max_v <n, v>`.
    pub fn support(&self, n: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(n, v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.gauge(x) <= 1.0 + tol
    }

    /// Outward normal of a supporting hyperplane at the boundary point along
    /// `y`. The unit vector `y/|y|` itself is used when it supports the ball
    /// there; otherwise the facet through the contact point whose normal is
    /// closest to `y`, ties going to the lexicographically smaller normal.
    pub fn support_normal(&self, y: &[f64]) -> Result<SupportData> {
        if y.len() != self.d {
            return Err(invalid("y", "dimension differs from the ball"));
        }
        let yhat = unit(y)?;
        let g = self.gauge(&yhat);
        if !(g > 0.0) {
            return Err(Error::DegeneratePolytope);
        }
        let contact: Vec<f64> = yhat.iter().map(|v| v / g).collect();
        let level = dot(&yhat, &contact);
        let normal = if self.vertices.iter().all(|v| dot(&yhat, v) <= level + SUPPORT_TOL) {
            yhat.clone()
        } else {
            let mut best: Option<&Facet> = None;
            for f in &self.facets {
                if dot(&f.normal, &contact) < f.offset * (1.0 - SUPPORT_TOL) {
                    continue;
                }
                best = match best {
                    None => Some(f),
                    Some(b) => {
                        let (sf, sb) = (dot(&f.normal, &yhat), dot(&b.normal, &yhat));
                        if sf > sb + 1e-12 || ((sf - sb).abs() <= 1e-12 && f.normal < b.normal) {
                            Some(f)
                        } else {
                            Some(b)
                        }
                    }
                };
            }
            best.ok_or(Error::DegeneratePolytope)?.normal.clone()
        };
        Ok(SupportData {
            y: y.to_vec(),
            normal,
            contact,
            c_d: self.constants.c_d,
            c_d_l1: self.constants.c_d_l1,
        })
    }

    fn compute_constants(&self) -> BallConstants {
        let max_l2 = self.vertices.iter().map(|v| dot(v, v).sqrt()).fold(0.0f64, f64::max);
        let max_l1 = self
            .vertices
            .iter()
            .map(|v| v.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let k1 = 1.0 / max_l2;
        let k2 = self.facets.iter().map(|f| 1.0 / f.offset).fold(0.0f64, f64::max);
        let mut axis_max = 0.0f64;
        for i in 0..self.d {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; self.d];
                e[i] = s;
                axis_max = axis_max.max(self.gauge(&e));
            }
        }
        let mut e1 = vec![0.0; self.d];
        e1[0] = 1.0;
        BallConstants {
            k1,
            k2,
            c_d: k1 / k2,
            c_d_l1: k1 / axis_max,
            mu_inf: 1.0 / max_l1,
            mu_e1: self.gauge(&e1),
        }
    }

    /// Every vertex image under every lattice symmetry lies on the boundary.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        signed_permutations(self.d).iter().all(|g| {
            self.vertices
                .iter()
                .all(|v| (self.gauge(&g.apply(v)) - 1.0).abs() <= tol)
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ball serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| invalid("ball", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

    #[test]
    fn l1_ball_constants() {
        let b = NormBall::l1(2).unwrap();
        let c = b.constants();
        assert!((c.k1 - 1.0).abs() < 1e-12);
        assert!((c.k2 - SQRT_2).abs() < 1e-12);
        assert!((c.c_d - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((c.mu_inf - 1.0).abs() < 1e-12);
        assert!((c.mu_e1 - 1.0).abs() < 1e-12);
        assert!((c.c_d_l1 - 1.0).abs() < 1e-12);
        assert!((b.gauge(&[3.0, -4.0]) - 7.0).abs() < 1e-12);
        assert!(b.is_symmetric(1e-12));
        let b3 = NormBall::l1(3).unwrap();
        assert_eq!(b3.vertices().len(), 6);
        assert!((b3.gauge(&[1.0, 2.0, -3.0]) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn euclidean_ball_constants() {
        let b = NormBall::euclidean(2, 4096).unwrap();
        let c = b.constants();
        assert!((c.k1 - 1.0).abs() < 1e-6);
        assert!((c.k2 - 1.0).abs() < 1e-6);
        assert!((c.c_d - 1.0).abs() < 1e-6);
        let b3 = NormBall::euclidean(3, 24).unwrap();
        assert!((b3.constants().k1 - 1.0).abs() < 1e-9);
        assert!(b3.constants().k2 < 1.02);
    }

    #[test]
    fn support_normals_of_l1_ball() {
        let b = NormBall::l1(2).unwrap();
        let s = b.support_normal(&[0.5, 0.5]).unwrap();
        assert!((s.normal[0] - FRAC_1_SQRT_2).abs() < 1e-12 && (s.normal[1] - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((s.contact[0] - 0.5).abs() < 1e-12);
        let s = b.support_normal(&[1.0, 0.0]).unwrap();
        assert_eq!(s.normal, vec![1.0, 0.0]);
        // Off-vertex direction gets the facet normal.
        let s = b.support_normal(&[2.0, 1.0]).unwrap();
        assert!((s.normal[0] - FRAC_1_SQRT_2).abs() < 1e-12 && (s.normal[1] - FRAC_1_SQRT_2).abs() < 1e-12);
        let s2 = b.support_normal(&[20.0, 10.0]).unwrap();
        assert_eq!(s.normal, s2.normal);
    }

    #[test]
    fn support_normals_of_euclidean_ball() {
        let b = NormBall::euclidean(2, 4096).unwrap();
        for k in 0..50 {
            let a = 0.37 * k as f64;
            let y = [a.cos(), a.sin()];
            let s = b.support_normal(&y).unwrap();
            let err = ((s.normal[0] - y[0]).powi(2) + (s.normal[1] - y[1]).powi(2)).sqrt();
            assert!(err < 1e-3, "{err}");
            for v in b.vertices() {
                assert!(dot(&s.normal, v) <= dot(&s.normal, &s.contact) + 1e-9);
            }
        }
    }

    #[test]
    fn symmetrized_directions() {
        let samples = vec![
            DirectionValue {
                direction: vec![1.0, 0.0],
                mu: 1.2,
                ci: (1.1, 1.3),
            },
            DirectionValue {
                direction: vec![1.0, 1.0],
                mu: 2.1,
                ci: (2.0, 2.2),
            },
        ];
        let b = NormBall::from_directions(2, samples).unwrap();
        assert!(b.is_symmetric(1e-9));
        assert!((b.gauge(&[1.0, 0.0]) - 1.2).abs() < 1e-12);
        assert!((b.gauge(&[0.0, -1.0]) - 1.2).abs() < 1e-12);
        assert!((b.gauge(&[1.0, 1.0]) - 2.1).abs() < 1e-12);
        let back = NormBall::from_json(&b.to_json()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn degenerate_ball_rejected() {
        assert!(NormBall::from_points(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.5, 0.0]]).is_err());
        assert!(NormBall::l1(4).is_err());
    }
}
