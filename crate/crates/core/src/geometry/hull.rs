//! Convex hulls in two and three dimensions as vertex lists plus facet
//! inequalities `<n, x> <= b` with unit `n`.

use crate::error::{Error, Result};

pub(crate) struct Hull {
    pub vertices: Vec<Vec<f64>>,
    pub facets: Vec<(Vec<f64>, f64)>,
}

const EPS: f64 = 1e-10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn convex_hull(points: &[Vec<f64>]) -> Result<Hull> {
    let d = points.first().map(Vec::len).ok_or(Error::DegeneratePolytope)?;
    let hull = match d {
        2 => hull_2d(points)?,
        3 => hull_3d(points)?,
        _ => {
            return Err(crate::error::invalid(
                "d",
                "norm-ball polytopes are supported in dimensions 2 and 3",
            ))
        }
    };
    if hull.facets.iter().any(|(_, b)| !(*b > EPS)) {
        // The origin must be interior for the gauge to be a norm.
        return Err(Error::DegeneratePolytope);
    }
    Ok(hull)
}

/// Andrew's monotone chain; collinear points are dropped.
fn hull_2d(points: &[Vec<f64>]) -> Result<Hull> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    pts.dedup_by(|a, b| (a[0] - b[0]).abs() <= EPS && (a[1] - b[1]).abs() <= EPS);
    if pts.len() < 3 {
        return Err(Error::DegeneratePolytope);
    }
    let turn = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && turn(lower[lower.len() - 2], lower[lower.len() - 1], p) <= EPS {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && turn(upper[upper.len() - 2], upper[upper.len() - 1], p) <= EPS {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    let ring = lower;
    if ring.len() < 3 {
        return Err(Error::DegeneratePolytope);
    }
    let mut facets = Vec::with_capacity(ring.len());
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        // Counter-clockwise ring: the outward normal is the edge turned clockwise.
        let n = [b[1] - a[1], a[0] - b[0]];
        let len = norm(&n);
        let n = vec![n[0] / len, n[1] / len];
        let off = dot(&n, &a);
        facets.push((n, off));
    }
    Ok(Hull {
        vertices: ring.iter().map(|p| p.to_vec()).collect(),
        facets,
    })
}

struct Face {
    v: [usize; 3],
    n: [f64; 3],
    b: f64,
}

fn make_face(pts: &[Vec<f64>], a: usize, b: usize, c: usize) -> Face {
    let n = cross(&sub(&pts[b], &pts[a]), &sub(&pts[c], &pts[a]));
    let len = norm(&n);
    let n = if len > 0.0 {
        [n[0] / len, n[1] / len, n[2] / len]
    } else {
        [0.0; 3]
    };
    Face {
        v: [a, b, c],
        b: dot(&n, &pts[a]),
        n,
    }
}

/// Incremental hull. Points are inserted farthest from the centroid first,
/// so points on the final boundary are usually skipped as non-visible.
fn hull_3d(points: &[Vec<f64>]) -> Result<Hull> {
    let mut pts: Vec<Vec<f64>> = points.to_vec();
    let centroid: Vec<f64> = (0..3)
        .map(|i| pts.iter().map(|p| p[i]).sum::<f64>() / pts.len() as f64)
        .collect();
    pts.sort_by(|a, b| {
        norm(&sub(b, &centroid))
            .partial_cmp(&norm(&sub(a, &centroid)))
            .expect("finite points")
            .then_with(|| a.partial_cmp(b).expect("finite points"))
    });
    pts.dedup_by(|a, b| norm(&sub(a, b)) <= EPS);
    if pts.len() < 4 {
        return Err(Error::DegeneratePolytope);
    }
    // Initial tetrahedron.
    let i0 = 0;
    let i1 = (1..pts.len())
        .max_by(|&a, &b| norm(&sub(&pts[a], &pts[i0])).total_cmp(&norm(&sub(&pts[b], &pts[i0]))))
        .unwrap();
    let line = sub(&pts[i1], &pts[i0]);
    let i2 = (1..pts.len())
        .max_by(|&a, &b| {
            norm(&cross(&line, &sub(&pts[a], &pts[i0]))).total_cmp(&norm(&cross(&line, &sub(&pts[b], &pts[i0]))))
        })
        .unwrap();
    let plane = cross(&line, &sub(&pts[i2], &pts[i0]));
    if norm(&plane) <= EPS {
        return Err(Error::DegeneratePolytope);
    }
    let i3 = (1..pts.len())
        .max_by(|&a, &b| {
            dot(&plane, &sub(&pts[a], &pts[i0]))
                .abs()
                .total_cmp(&dot(&plane, &sub(&pts[b], &pts[i0])).abs())
        })
        .unwrap();
    if dot(&plane, &sub(&pts[i3], &pts[i0])).abs() <= EPS * norm(&plane) {
        return Err(Error::DegeneratePolytope);
    }
    let inner: Vec<f64> = (0..3)
        .map(|k| (pts[i0][k] + pts[i1][k] + pts[i2][k] + pts[i3][k]) / 4.0)
        .collect();
    let mut faces: Vec<Face> = Vec::new();
    for [a, b, c] in [[i0, i1, i2], [i0, i1, i3], [i0, i2, i3], [i1, i2, i3]] {
        let f = make_face(&pts, a, b, c);
        if dot(&f.n, &inner) > f.b {
            faces.push(make_face(&pts, a, c, b));
        } else {
            faces.push(f);
        }
    }
    for p in 0..pts.len() {
        if [i0, i1, i2, i3].contains(&p) {
            continue;
        }
        let visible: Vec<bool> = faces.iter().map(|f| dot(&f.n, &pts[p]) - f.b > EPS).collect();
        if !visible.iter().any(|&v| v) {
            continue;
        }
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for (f, _) in faces.iter().zip(&visible).filter(|(_, &v)| v) {
            for k in 0..3 {
                edges.push((f.v[k], f.v[(k + 1) % 3]));
            }
        }
        let horizon: Vec<(usize, usize)> = edges
            .iter()
            .copied()
            .filter(|&(a, b)| !edges.contains(&(b, a)))
            .collect();
        let mut kept: Vec<Face> = faces
            .into_iter()
            .zip(visible)
            .filter(|(_, v)| !v)
            .map(|(f, _)| f)
            .collect();
        for (a, b) in horizon {
            kept.push(make_face(&pts, a, b, p));
        }
        faces = kept;
    }
    // Merge coplanar triangles into facets.
    let mut facets: Vec<(Vec<f64>, f64, f64)> = Vec::new();
    for f in &faces {
        let area = norm(&cross(
            &sub(&pts[f.v[1]], &pts[f.v[0]]),
            &sub(&pts[f.v[2]], &pts[f.v[0]]),
        ));
        if area <= EPS {
            continue;
        }
        let supporting = pts.iter().all(|q| dot(&f.n, q) <= f.b + 1e-8);
        if !supporting {
            continue;
        }
        match facets
            .iter_mut()
            .find(|(n, b, _)| norm(&sub(n, &f.n)) <= 1e-7 && (b - f.b).abs() <= 1e-7)
        {
            Some(existing) => {
                if area > existing.2 {
                    *existing = (f.n.to_vec(), f.b, area);
                }
            }
            None => facets.push((f.n.to_vec(), f.b, area)),
        }
    }
    let facets: Vec<(Vec<f64>, f64)> = facets.into_iter().map(|(n, b, _)| (n, b)).collect();
    // Vertices: hull points whose active facet normals span R^3.
    let mut used: Vec<usize> = faces.iter().flat_map(|f| f.v).collect();
    used.sort_unstable();
    used.dedup();
    let mut vertices = Vec::new();
    for &i in &used {
        let active: Vec<&Vec<f64>> = facets
            .iter()
            .filter(|(n, b)| (dot(n, &pts[i]) - b).abs() <= 1e-8)
            .map(|(n, _)| n)
            .collect();
        if spans_3d(&active) {
            vertices.push(pts[i].clone());
        }
    }
    if facets.len() < 4 || vertices.len() < 4 {
        return Err(Error::DegeneratePolytope);
    }
    vertices.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    Ok(Hull { vertices, facets })
}

fn spans_3d(normals: &[&Vec<f64>]) -> bool {
    for i in 0..normals.len() {
        for j in i + 1..normals.len() {
            let c = cross(normals[i], normals[j]);
            if norm(&c) <= 1e-9 {
                continue;
            }
            if normals[j + 1..].iter().any(|&n| dot(&c, n).abs() > 1e-9) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cross_polytope(d: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut v = vec![0.0; d];
                v[i] = s;
                out.push(v);
            }
        }
        out
    }

    #[test]
    fn square_diamond() {
        let mut pts = cross_polytope(2);
        pts.push(vec![0.5, 0.5]);
        pts.push(vec![0.1, -0.2]);
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices.len(), 4);
        assert_eq!(h.facets.len(), 4);
        for (n, b) in &h.facets {
            assert!((b - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            assert!((n[0].abs() - n[1].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn octahedron_with_boundary_points() {
        let mut pts = vec![
            vec![0.5, 0.5, 0.0],
            vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            vec![0.2, 0.0, -0.3],
        ];
        pts.extend(cross_polytope(3));
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.vertices.len(), 6);
        assert_eq!(h.facets.len(), 8);
        for (n, b) in &h.facets {
            assert!((b - 1.0 / 3f64.sqrt()).abs() < 1e-12);
            assert!(n.iter().all(|x| (x.abs() - 1.0 / 3f64.sqrt()).abs() < 1e-12));
        }
    }

    #[test]
    fn cube_merges_coplanar_triangles() {
        let mut pts = Vec::new();
        for mask in 0..8 {
            pts.push((0..3).map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 }).collect());
        }
        pts.push(vec![1.0, 0.0, 0.0]);
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h.facets.len(), 6);
        assert_eq!(h.vertices.len(), 8);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(convex_hull(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
        // Origin outside the hull.
        assert!(convex_hull(&[vec![1.0, 1.0], vec![2.0, 1.0], vec![1.0, 2.0]]).is_err());
        let flat = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
        ];
        assert!(convex_hull(&flat).is_err());
    }
}
