//! Open clusters, the giant-cluster proxy for the infinite cluster, anchor
//! points and cluster tail diagnostics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{sample_configuration, sub_seed, BoxWindow, Configuration, MAX_DIM};
use crate::stats::{fit_exponential_decay, DecayFit, DecayPoint};

/// Union-find with union by size and path halving.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns the surviving root.
    pub fn union(&mut self, a: usize, b: usize) -> usize {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        if self.size[ra] < self.size[rb] || (self.size[ra] == self.size[rb] && rb < ra) {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        ra
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }
}

/// Decomposition of a configuration into open clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabels {
    labels: Vec<u32>,
    sizes: Vec<u32>,
    giant: Option<u32>,
    cluster_count: usize,
}

impl ClusterLabels {
    /// Root id of the cluster containing `v`.
    #[inline]
    pub fn label(&self, v: usize) -> usize {
        self.labels[v] as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Size of the cluster whose root is `root` (0 if `root` is not a root).
    pub fn root_size(&self, root: usize) -> usize {
        self.sizes[root] as usize
    }

    pub fn cluster_size_of(&self, v: usize) -> usize {
        self.sizes[self.labels[v] as usize] as usize
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn same_cluster(&self, u: usize, v: usize) -> bool {
        self.labels[u] == self.labels[v]
    }

    /// Root of the strictly largest cluster, `None` on an exact tie.
    pub fn giant_root(&self) -> Option<usize> {
        self.giant.map(|g| g as usize)
    }

    pub fn in_giant(&self, v: usize) -> bool {
        self.giant == Some(self.labels[v])
    }

    /// Iterator over `(root, size)` pairs.
    pub fn roots(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.sizes
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0)
            .map(|(r, &s)| (r, s as usize))
    }

    /// Fraction of window vertices in the giant cluster.
    pub fn giant_density(&self) -> f64 {
        self.giant
            .map_or(0.0, |g| self.sizes[g as usize] as f64 / self.labels.len() as f64)
    }
}

/// Labels the open clusters of `config` with union-find.
///
/// Labels are cluster roots; the result is a deterministic function of the
/// configuration.
pub fn label_clusters(config: &Configuration) -> ClusterLabels {
    let w = config.window();
    let n = w.vertex_count();
    let mut ds = DisjointSet::new(n);
    for e in 0..w.edge_count() {
        if config.is_open(e) {
            let (u, v) = w.edge_endpoints(e);
            ds.union(u, v);
        }
    }
    let labels: Vec<u32> = (0..n).map(|v| ds.find(v) as u32).collect();
    let mut sizes = vec![0u32; n];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    let mut best: Option<(u32, u32)> = None;
    let mut tied = false;
    let mut cluster_count = 0;
    for (r, &s) in sizes.iter().enumerate() {
        if s == 0 {
            continue;
        }
        cluster_count += 1;
        match best {
            Some((_, bs)) if s < bs => {}
            Some((_, bs)) if s == bs => tied = true,
            _ => {
                best = Some((r as u32, s));
                tied = false;
            }
        }
    }
    ClusterLabels {
        labels,
        sizes,
        giant: if tied { None } else { best.map(|b| b.0) },
        cluster_count,
    }
}

/// Root of the giant cluster, if unique.
pub fn giant_cluster(labels: &ClusterLabels) -> Option<usize> {
    labels.giant_root()
}

/// Membership rule for anchor candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AnchorRule {
    /// Candidates must belong to the giant cluster of the window.
    #[default]
    GiantCluster,
    /// Candidates must be joined to the ℓ¹ sphere of radius `outer` around
    /// the site by an open path inside the ℓ¹ ball of that radius. This rule
    /// only reads edges inside that ball.
    ReachesSphere { outer: usize },
}

/// Result of an anchor lookup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub point: Vec<i64>,
    pub index: usize,
    /// ℓ¹ distance from the site.
    pub offset: usize,
    /// No admissible candidate in the ball; `point` is the site itself.
    pub empty: bool,
}

/// All offsets of ℓ¹ norm at most `r` in dimension `d`, sorted by norm then
/// lexicographically.
pub fn l1_ball_offsets(d: usize, r: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![0i64; d];
    fn rec(i: usize, budget: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for x in -budget..=budget {
            cur[i] = x;
            rec(i + 1, budget - x.abs(), cur, out);
        }
        cur[i] = 0;
    }
    rec(0, r as i64, &mut cur, &mut out);
    out.sort_by(|a, b| {
        let na: i64 = a.iter().map(|x| x.abs()).sum();
        let nb: i64 = b.iter().map(|x| x.abs()).sum();
        na.cmp(&nb).then_with(|| a.cmp(b))
    });
    out
}

fn offset_point(site: &[i64], off: &[i64]) -> Vec<i64> {
    site.iter().zip(off).map(|(a, b)| a + b).collect()
}

/// The admissible vertex closest in ℓ¹ to `site` within `B_1(site, radius)`,
/// ties broken lexicographically; the site itself (flagged empty) when there
/// is none.
pub fn anchor_point(
    config: &Configuration,
    labels: &ClusterLabels,
    site: &[i64],
    radius: f64,
    rule: AnchorRule,
) -> Result<Anchor> {
    if !(radius >= 0.0) {
        return Err(invalid("radius", format!("must be nonnegative, got {radius}")));
    }
    let w = config.window();
    let r = radius.floor() as usize;
    let needed = match rule {
        AnchorRule::GiantCluster => r,
        AnchorRule::ReachesSphere { outer } => outer.max(r),
    };
    let site_index = w.require_index(site)?;
    if w.margin_of(site).unwrap_or(0) < needed {
        return Err(Error::TooCloseToBoundary {
            point: site.to_vec(),
            margin: needed,
        });
    }
    let admissible: Box<dyn Fn(usize) -> bool> = match rule {
        AnchorRule::GiantCluster => Box::new(|v| labels.in_giant(v)),
        AnchorRule::ReachesSphere { outer } => {
            let reach = sphere_reachers(config, site, outer);
            Box::new(move |v| reach.contains(&v))
        }
    };
    for off in l1_ball_offsets(w.d(), r) {
        let point = offset_point(site, &off);
        let index = w.index_of(&point).expect("ball inside window");
        if admissible(index) {
            let offset = off.iter().map(|x| x.unsigned_abs() as usize).sum();
            return Ok(Anchor {
                point,
                index,
                offset,
                empty: false,
            });
        }
    }
    Ok(Anchor {
        point: site.to_vec(),
        index: site_index,
        offset: 0,
        empty: true,
    })
}

/// Vertices of `B_1(site, outer)` joined to its ℓ¹ sphere by an open path
/// that stays in the ball.
fn sphere_reachers(config: &Configuration, site: &[i64], outer: usize) -> std::collections::HashSet<usize> {
    let w = config.window();
    let d = w.d();
    let site_local: Vec<usize> = site.iter().zip(w.origin()).map(|(&x, &o)| (x - o) as usize).collect();
    let l1_from_site = |v: usize| {
        let mut c = [0usize; MAX_DIM];
        w.local_coords(v, &mut c);
        (0..d).map(|i| c[i].abs_diff(site_local[i])).sum::<usize>()
    };
    let mut seen = std::collections::HashSet::new();
    let mut stack = Vec::new();
    for off in l1_ball_offsets(d, outer) {
        if off.iter().map(|x| x.unsigned_abs() as usize).sum::<usize>() == outer {
            let v = w.index_of(&offset_point(site, &off)).expect("ball inside window");
            seen.insert(v);
            stack.push(v);
        }
    }
    while let Some(v) = stack.pop() {
        config.for_each_open_neighbor(v, |u| {
            if l1_from_site(u) <= outer && seen.insert(u) {
                stack.push(u);
            }
        });
    }
    seen
}

/// Empirical tail of one cluster event as a function of the radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub event: String,
    pub radii: Vec<usize>,
    pub counts: Vec<u64>,
    pub replicas: u64,
    pub fit: Option<DecayFit>,
}

impl TailCurve {
    pub fn new(event: impl Into<String>, radii: Vec<usize>, counts: Vec<u64>, replicas: u64) -> Self {
        let points: Vec<DecayPoint> = radii
            .iter()
            .zip(&counts)
            .map(|(&r, &c)| DecayPoint::new(r as f64, c, replicas))
            .collect();
        TailCurve {
            event: event.into(),
            fit: fit_exponential_decay(&points).ok(),
            radii,
            counts,
            replicas,
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.replicas as f64).collect()
    }

    /// Nonincreasing in `r` up to `sigmas` binomial standard errors of the
    /// difference.
    pub fn is_nonincreasing(&self, sigmas: f64) -> bool {
        let f = self.frequencies();
        let n = self.replicas as f64;
        f.windows(2).all(|w| {
            let se = ((w[0] * (1.0 - w[0]) + w[1] * (1.0 - w[1])) / n).sqrt();
            w[1] <= w[0] + sigmas * se
        })
    }

    /// CSV with columns `r,count,replicas,phat,log_phat`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,count,replicas,phat,log_phat\n");
        for (&r, &c) in self.radii.iter().zip(&self.counts) {
            let phat = c as f64 / self.replicas as f64;
            let log = if c == 0 {
                "-inf".to_string()
            } else {
                format!("{}", phat.ln())
            };
            s.push_str(&format!("{r},{c},{},{phat},{log}\n", self.replicas));
        }
        s
    }
}

/// Parameters of [`tail_statistics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailParams {
    pub p: f64,
    pub d: usize,
    pub radii: Vec<usize>,
    pub replicas: u64,
    pub master_seed: u64,
    /// Half-width of the window centred at the origin; default `2 * max(radii)`.
    pub half_width: Option<usize>,
}

/// Frequencies of the finite-cluster radius event (the cluster of 0 reaches
/// `∂B_1(0, r)` but is not the giant) and the hole event (the giant misses
/// `B_1(0, r)`).
///
/// Every replica is one window whose events are evaluated at all radii, so
/// both curves are nonincreasing sample by sample.
pub fn tail_statistics(params: &TailParams) -> Result<(TailCurve, TailCurve)> {
    if params.replicas == 0 {
        return Err(invalid("replicas", "must be positive"));
    }
    if params.radii.is_empty() || params.radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("radii", "must be nonempty and strictly increasing"));
    }
    let max_r = *params.radii.last().unwrap();
    let half = params.half_width.unwrap_or(2 * max_r);
    if half <= max_r {
        return Err(Error::Clipped(format!(
            "half-width {half} does not exceed the largest radius {max_r}"
        )));
    }
    let origin = vec![0i64; params.d];
    let window = BoxWindow::centered(&origin, half)?;
    let zero = window.require_index(&origin)?;
    let d = params.d;

    let per_replica: Vec<(usize, usize)> = (0..params.replicas)
        .into_par_iter()
        .map(|i| -> Result<(usize, usize)> {
            let conf = sample_configuration(&window, params.p, sub_seed(params.master_seed, i))?;
            let labels = label_clusters(&conf);
            let mut c = [0usize; MAX_DIM];
            let mut radius0 = 0usize;
            let mut hole = usize::MAX;
            let l0 = labels.label(zero);
            for v in 0..window.vertex_count() {
                let in_c0 = labels.label(v) == l0;
                let in_giant = labels.in_giant(v);
                if !in_c0 && !in_giant {
                    continue;
                }
                window.local_coords(v, &mut c);
                let dist: usize = (0..d).map(|k| c[k].abs_diff(half)).sum();
                if in_c0 {
                    radius0 = radius0.max(dist);
                }
                if in_giant {
                    hole = hole.min(dist);
                }
            }
            // Radius of a finite C(0), or 0 when C(0) is the giant.
            let finite_radius = if labels.in_giant(zero) { 0 } else { radius0 };
            Ok((finite_radius, hole))
        })
        .collect::<Result<_>>()?;

    let finite: Vec<u64> = params
        .radii
        .iter()
        .map(|&r| per_replica.iter().filter(|(fr, _)| *fr >= r && r > 0).count() as u64)
        .collect();
    let holes: Vec<u64> = params
        .radii
        .iter()
        .map(|&r| per_replica.iter().filter(|(_, h)| *h > r).count() as u64)
        .collect();
    Ok((
        TailCurve::new("finite_cluster_radius", params.radii.clone(), finite, params.replicas),
        TailCurve::new("giant_hole", params.radii.clone(), holes, params.replicas),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_box, make_window};
    use std::collections::VecDeque;

    /// Flood fill over open edges; labels are the smallest vertex index of
    /// each component.
    fn flood_fill_labels(config: &Configuration) -> Vec<usize> {
        let w = config.window();
        let mut label = vec![usize::MAX; w.vertex_count()];
        for s in 0..w.vertex_count() {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = s;
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                for a in 0..w.d() {
                    for (x, y) in [(v, v + w.strides()[a]), (v.wrapping_sub(w.strides()[a]), v)] {
                        if x >= w.vertex_count() || y >= w.vertex_count() {
                            continue;
                        }
                        if let Some(e) = w.edge_between(x, y) {
                            let u = if x == v { y } else { x };
                            if config.is_open(e) && label[u] == usize::MAX {
                                label[u] = s;
                                q.push_back(u);
                            }
                        }
                    }
                }
            }
        }
        label
    }

    fn same_partition(labels: &ClusterLabels, oracle: &[usize]) -> bool {
        let n = oracle.len();
        (0..n).all(|u| (0..n).all(|v| labels.same_cluster(u, v) == (oracle[u] == oracle[v])))
    }

    #[test]
    fn exhaustive_small_window_matches_flood_fill() {
        let w = make_window(2, 3, &[0, 0]).unwrap();
        // The 3x3 window has 12 edges; every configuration is checked.
        for mask in 0u32..(1 << w.edge_count()) {
            let conf = Configuration::from_fn(&w, |e| mask >> e & 1 == 1);
            let labels = label_clusters(&conf);
            assert!(same_partition(&labels, &flood_fill_labels(&conf)));
            assert_eq!(labels.roots().map(|(_, s)| s).sum::<usize>(), w.vertex_count());
        }
    }

    #[test]
    fn two_by_three_window_all_configurations() {
        let w = make_box(&[2, 3], &[0, 0]).unwrap();
        assert_eq!(w.edge_count(), 7);
        let w3 = make_window(3, 2, &[0, 0, 0]).unwrap();
        for win in [w, w3] {
            for mask in 0u32..(1 << win.edge_count()) {
                let conf = Configuration::from_fn(&win, |e| mask >> e & 1 == 1);
                assert!(same_partition(&label_clusters(&conf), &flood_fill_labels(&conf)));
            }
        }
    }

    #[test]
    fn extremes() {
        let w = make_window(2, 10, &[0, 0]).unwrap();
        let full = label_clusters(&sample_configuration(&w, 1.0, 0).unwrap());
        assert_eq!(full.cluster_count(), 1);
        assert_eq!(full.cluster_size_of(0), 100);
        assert!(full.giant_root().is_some());
        let empty = label_clusters(&sample_configuration(&w, 0.0, 0).unwrap());
        assert_eq!(empty.cluster_count(), 100);
        assert_eq!(empty.giant_root(), None);
    }

    #[test]
    fn exact_tie_has_no_giant() {
        let w = make_window(2, 5, &[0, 0]).unwrap();
        // Two disjoint open 2-edge paths along rows 0 and 3.
        let open: Vec<usize> = [(0, 0), (1, 0), (0, 3), (1, 3)]
            .iter()
            .map(|&(x, y)| w.edge_index(w.index_of(&[x, y]).unwrap(), 0).unwrap())
            .collect();
        let conf = Configuration::from_fn(&w, |e| open.contains(&e));
        let labels = label_clusters(&conf);
        assert_eq!(giant_cluster(&labels), None);
        // Extending one path breaks the tie.
        let e = w.edge_index(w.index_of(&[2, 3]).unwrap(), 0).unwrap();
        let labels = label_clusters(&conf.with_edge(e, true));
        let g = giant_cluster(&labels).unwrap();
        assert_eq!(labels.root_size(g), 4);
    }

    #[test]
    fn anchor_cases() {
        let w = make_window(2, 5, &[-2, -2]).unwrap();
        let full = sample_configuration(&w, 1.0, 0).unwrap();
        let labels = label_clusters(&full);
        let a = anchor_point(&full, &labels, &[0, 0], 2.0, AnchorRule::GiantCluster).unwrap();
        assert_eq!((a.point.clone(), a.offset, a.empty), (vec![0, 0], 0, false));
        assert!(anchor_point(&full, &labels, &[1, 0], 2.0, AnchorRule::GiantCluster).is_err());

        // Giant (size 3) is the path (-2,-2)-(-1,-2)-(0,-2): outside B_1(0, 1).
        let idx = |p: [i64; 2]| w.index_of(&p).unwrap();
        let path = [
            w.edge_index(idx([-2, -2]), 0).unwrap(),
            w.edge_index(idx([-1, -2]), 0).unwrap(),
        ];
        let conf = Configuration::from_fn(&w, |e| path.contains(&e));
        let labels = label_clusters(&conf);
        let a = anchor_point(&conf, &labels, &[0, 0], 1.0, AnchorRule::GiantCluster).unwrap();
        assert!(a.empty);
        assert_eq!(a.point, vec![0, 0]);

        // Candidates (-1,0) and (0,1) at equal distance 1: the giant is the
        // 3-vertex path (-1,0)-(-1,1)-(0,1); both candidates qualify and the
        // lexicographically smaller (-1, 0) wins.
        let edges = [
            w.edge_index(idx([-1, 0]), 1).unwrap(),
            w.edge_index(idx([-1, 1]), 0).unwrap(),
        ];
        let conf = Configuration::from_fn(&w, |e| edges.contains(&e));
        let labels = label_clusters(&conf);
        let a = anchor_point(&conf, &labels, &[0, 0], 2.0, AnchorRule::GiantCluster).unwrap();
        assert_eq!((a.point, a.offset, a.empty), (vec![-1, 0], 1, false));
    }

    #[test]
    fn sphere_rule_uses_local_connectivity() {
        let w = make_window(2, 9, &[-4, -4]).unwrap();
        let full = sample_configuration(&w, 1.0, 0).unwrap();
        let labels = label_clusters(&full);
        let rule = AnchorRule::ReachesSphere { outer: 3 };
        let a = anchor_point(&full, &labels, &[0, 0], 1.0, rule).unwrap();
        assert_eq!(a.point, vec![0, 0]);
        let none = sample_configuration(&w, 0.0, 0).unwrap();
        let labels = label_clusters(&none);
        assert!(anchor_point(&none, &labels, &[0, 0], 1.0, rule).unwrap().empty);
    }

    #[test]
    fn tails_at_full_occupation_vanish() {
        let params = TailParams {
            p: 1.0,
            d: 2,
            radii: vec![1, 2, 4],
            replicas: 5,
            master_seed: 1,
            half_width: None,
        };
        let (finite, hole) = tail_statistics(&params).unwrap();
        assert!(finite.counts.iter().all(|&c| c == 0));
        assert!(hole.counts.iter().all(|&c| c == 0));
        assert!(finite
            .to_csv()
            .starts_with("r,count,replicas,phat,log_phat\n1,0,5,0,-inf"));
    }

    #[test]
    fn tail_errors() {
        let mut params = TailParams {
            p: 0.7,
            d: 2,
            radii: vec![2, 4],
            replicas: 0,
            master_seed: 1,
            half_width: None,
        };
        assert!(tail_statistics(&params).is_err());
        params.replicas = 3;
        params.half_width = Some(4);
        assert!(matches!(tail_statistics(&params), Err(Error::Clipped(_))));
    }

    #[test]
    fn tails_are_nonincreasing() {
        let params = TailParams {
            p: 0.6,
            d: 2,
            radii: vec![1, 2, 3, 4],
            replicas: 400,
            master_seed: 17,
            half_width: Some(12),
        };
        let (finite, hole) = tail_statistics(&params).unwrap();
        for c in [&finite, &hole] {
            assert!(c.counts.windows(2).all(|w| w[1] <= w[0]));
            assert!(c.counts.iter().all(|&x| x <= c.replicas));
        }
    }
}
