use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::NormBall;
use crate::error::{invalid, Result};

/// A finite set of points `spacing * z`, `z` in `Z^d`, optionally inflated
/// to closed cubes of side `spacing` centred at the points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSet {
    points: Vec<Vec<i64>>,
    spacing: f64,
    cells: bool,
}

impl LatticeSet {
    pub fn new(points: Vec<Vec<i64>>, spacing: f64, cells: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("points", "set must be nonempty"));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d) {
            return Err(invalid("points", "points must share one dimension"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(invalid("spacing", "must be positive and finite"));
        }
        Ok(LatticeSet { points, spacing, cells })
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn half(&self) -> f64 {
        if self.cells {
            self.spacing / 2.0
        } else {
            0.0
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Normals of the Minkowski sum of an axis cube and the ball: the ball's
/// facet normals, the axes and, in three dimensions, the cross products of
/// axes with the ball's edge directions. Every normal is paired with the
/// ball's support value.
fn sum_normals(ball: &NormBall) -> Vec<(Vec<f64>, f64)> {
    let d = ball.d();
    let mut normals: Vec<Vec<f64>> = ball.facets().iter().map(|f| f.normal.clone()).collect();
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            normals.push(e);
        }
    }
    if d == 3 {
        let facets = ball.facets();
        let on = |f: usize, v: &[f64]| (dot(&facets[f].normal, v) - facets[f].offset).abs() <= 1e-8;
        for a in 0..facets.len() {
            for b in a + 1..facets.len() {
                let shared = ball.vertices().iter().filter(|v| on(a, v) && on(b, v)).count();
                if shared < 2 {
                    continue;
                }
                let (p, q) = (&facets[a].normal, &facets[b].normal);
                let edge = [
                    p[1] * q[2] - p[2] * q[1],
                    p[2] * q[0] - p[0] * q[2],
                    p[0] * q[1] - p[1] * q[0],
                ];
                for i in 0..3 {
                    let mut e = [0.0; 3];
                    e[i] = 1.0;
                    let c = [
                        e[1] * edge[2] - e[2] * edge[1],
                        e[2] * edge[0] - e[0] * edge[2],
                        e[0] * edge[1] - e[1] * edge[0],
                    ];
                    let len = dot(&c, &c).sqrt();
                    if len > 1e-12 {
                        normals.push(c.iter().map(|x| x / len).collect());
                        normals.push(c.iter().map(|x| -x / len).collect());
                    }
                }
            }
        }
    }
    normals
        .into_iter()
        .map(|n| {
            let h = ball.support(&n);
            (n, h)
        })
        .collect()
}

/// Gauge distance from `b` to the cube of half-side `half` centred at `c`.
fn cube_distance(normals: &[(Vec<f64>, f64)], b: &[f64], c: &[f64], half: f64) -> f64 {
    normals
        .iter()
        .map(|(n, h)| {
            let lin: f64 = n.iter().zip(b.iter().zip(c)).map(|(ni, (bi, ci))| ni * (bi - ci)).sum();
            let l1: f64 = n.iter().map(|x| x.abs()).sum();
            (lin - half * l1) / h
        })
        .fold(0.0f64, f64::max)
}

/// Hausdorff distance, in the gauge of `ball`, between the lattice set `a`
/// and `radius * ball`.
///
/// The distance from `a` to the ball is exact (its maximum over each cube
/// sits at a corner). The distance from the ball to `a` is maximised over
/// probes: the grid of spacing `spacing / 2` inside the ball and the ball's
/// vertices, so it is exact up to that grid resolution. Distances to each
/// cube are exact.
pub fn hausdorff_distance(a: &LatticeSet, ball: &NormBall, radius: f64) -> Result<f64> {
    let d = ball.d();
    if a.points[0].len() != d {
        return Err(invalid("points", "dimension differs from the ball"));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid("radius", "must be positive and finite"));
    }
    let h = a.spacing;
    let half = a.half();

    // a -> ball.
    let mut forward = 0.0f64;
    let mut corner = vec![0.0; d];
    for p in &a.points {
        let corners = if a.cells { 1usize << d } else { 1 };
        for mask in 0..corners {
            for i in 0..d {
                let sign = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                corner[i] = p[i] as f64 * h + sign * half;
            }
            forward = forward.max(ball.gauge(&corner) - radius);
        }
    }

    // ball -> a.
    let normals = sum_normals(ball);
    let k1 = ball.constants().k1;
    let set: HashSet<&[i64]> = a.points.iter().map(Vec::as_slice).collect();
    let mut lo = vec![i64::MAX; d];
    let mut hi = vec![i64::MIN; d];
    for p in &a.points {
        for i in 0..d {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let mut probes: Vec<Vec<f64>> = ball
        .vertices()
        .iter()
        .map(|v| v.iter().map(|x| x * radius).collect())
        .collect();
    let step = h / 2.0;
    let extent: Vec<i64> = (0..d)
        .map(|i| {
            let m = ball.vertices().iter().map(|v| v[i].abs()).fold(0.0f64, f64::max);
            (m * radius / step).ceil() as i64
        })
        .collect();
    let mut cur: Vec<i64> = extent.iter().map(|e| -e).collect();
    loop {
        let q: Vec<f64> = cur.iter().map(|&c| c as f64 * step).collect();
        if ball.gauge(&q) <= radius * (1.0 + 1e-12) {
            probes.push(q);
        }
        let mut i = 0;
        while i < d {
            cur[i] += 1;
            if cur[i] <= extent[i] {
                break;
            }
            cur[i] = -extent[i];
            i += 1;
        }
        if i == d {
            break;
        }
    }

    let mut backward = 0.0f64;
    let mut center = vec![0.0; d];
    let mut z = vec![0i64; d];
    for q in &probes {
        let k0: Vec<i64> = q.iter().map(|x| (x / h).round() as i64).collect();
        let reach = (0..d)
            .map(|i| (k0[i] - lo[i]).abs().max((hi[i] - k0[i]).abs()))
            .max()
            .unwrap_or(0);
        let mut best = f64::INFINITY;
        for k in 0..=reach {
            let bound = k1 * ((k as f64 - 0.5) * h - half).max(0.0);
            if bound >= best || best <= backward {
                break;
            }
            for_each_on_ring(&k0, k, &mut z, &mut |z: &[i64]| {
                if set.contains(z) {
                    for i in 0..d {
                        center[i] = z[i] as f64 * h;
                    }
                    best = best.min(cube_distance(&normals, q, &center, half));
                }
            });
        }
        backward = backward.max(best);
    }
    Ok(forward.max(backward))
}

/// Calls `f` on every integer point at ℓ∞ distance exactly `k` from `c`.
fn for_each_on_ring(c: &[i64], k: i64, z: &mut [i64], f: &mut impl FnMut(&[i64])) {
    let d = c.len();
    let mut off = vec![-k; d];
    loop {
        if off.iter().any(|o| o.abs() == k) {
            for i in 0..d {
                z[i] = c[i] + off[i];
            }
            f(z);
        }
        let mut i = 0;
        while i < d {
            off[i] += 1;
            // Jump over the interior of the ring along the first axis.
            if i == 0 && off[0] == 1 - k && k > 1 && off[1..].iter().all(|o| o.abs() < k) {
                off[0] = k;
            }
            if off[i] <= k {
                break;
            }
            off[i] = -k;
            i += 1;
        }
        if i == d {
            break;
        }
    }
}

/// Hausdorff distance between finite point sets in the gauge of `ball`.
pub fn hausdorff_points(a: &[Vec<f64>], b: &[Vec<f64>], ball: &NormBall) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("points", "sets must be nonempty"));
    }
    let directed = |from: &[Vec<f64>], to: &[Vec<f64>]| {
        from.iter()
            .map(|x| {
                to.iter()
                    .map(|y| {
                        let diff: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
                        ball.gauge(&diff)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}
