//! Wired/unwired vertex field and the macroscopic edge process built from
//! anchored chemical distances at mesh `N`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chemdist::{distance_field_from, UNREACHABLE};
use crate::clusters::{anchor_point, label_clusters, AnchorRule, ClusterLabels, TailCurve};
use crate::error::{invalid, Error, Result};
use crate::estimators::WindowPolicy;
use crate::geometry::{adapted_basis_int, AdaptedBasis, NormBall};
use crate::lattice::{make_box, sample_configuration, sub_seed, BoxWindow, Configuration, MAX_DIM};
use crate::stats::mean_interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WiredState {
    Wired,
    Unwired,
    /// Boundary vertices, whose stencil leaves the window.
    Undefined,
}

/// Per-vertex wired state of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct WiredField {
    window: BoxWindow,
    states: Vec<WiredState>,
}

impl WiredField {
    pub fn window(&self) -> &BoxWindow {
        &self.window
    }

    pub fn states(&self) -> &[WiredState] {
        &self.states
    }

    pub fn get(&self, v: usize) -> WiredState {
        self.states[v]
    }

    pub fn get_point(&self, point: &[i64]) -> Option<WiredState> {
        self.window.index_of(point).map(|v| self.states[v])
    }

    pub fn unwired_count(&self) -> usize {
        self.states.iter().filter(|&&s| s == WiredState::Unwired).count()
    }
}

/// Calls `f` with every index `v + o`, `o` in `{-1, 0, 1}^d`, for an
/// interior vertex `v`.
fn for_each_in_stencil(w: &BoxWindow, v: usize, mut f: impl FnMut(usize)) {
    let d = w.d();
    let strides = w.strides();
    let mut digits = [0usize; MAX_DIM];
    loop {
        let mut u = v as isize;
        for i in 0..d {
            u += (digits[i] as isize - 1) * strides[i] as isize;
        }
        f(u as usize);
        let mut i = 0;
        loop {
            if i == d {
                return;
            }
            digits[i] += 1;
            if digits[i] < 3 {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// A vertex is wired when every edge inside its `3^d` stencil is open.
pub fn wired_field(config: &Configuration) -> Result<WiredField> {
    let w = config.window();
    if w.sides().iter().any(|&s| s < 3) {
        return Err(invalid("window", "every side must be at least 3"));
    }
    let d = w.d();
    let states = (0..w.vertex_count())
        .into_par_iter()
        .map(|v| {
            if w.is_boundary(v) {
                return WiredState::Undefined;
            }
            let mut c = [0usize; MAX_DIM];
            w.local_coords(v, &mut c);
            let mut wired = true;
            for_each_in_stencil(w, v, |u| {
                if !wired {
                    return;
                }
                let mut cu = [0usize; MAX_DIM];
                w.local_coords(u, &mut cu);
                for axis in 0..d {
                    // Edge u -> u + e_axis stays in the stencil.
                    if cu[axis] <= c[axis] {
                        let e = w.edge_index(u, axis).expect("stencil inside window");
                        if !config.is_open(e) {
                            wired = false;
                        }
                    }
                }
            });
            if wired {
                WiredState::Wired
            } else {
                WiredState::Unwired
            }
        })
        .collect();
    Ok(WiredField {
        window: w.clone(),
        states,
    })
}

/// Maximal `*`-connected (ℓ^∞ adjacency) sets of unwired vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct UnwiredComponents {
    window: BoxWindow,
    component: Vec<Option<u32>>,
    members: Vec<Vec<usize>>,
}

impl UnwiredComponents {
    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn component_of(&self, v: usize) -> Option<usize> {
        self.component[v].map(|c| c as usize)
    }

    pub fn members(&self, c: usize) -> &[usize] {
        &self.members[c]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn largest(&self) -> usize {
        self.members.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `V(x)`: the component of `x`, empty when `x` is wired.
    pub fn component_points(&self, x: &[i64]) -> Vec<Vec<i64>> {
        self.window
            .index_of(x)
            .and_then(|v| self.component_of(v))
            .map(|c| self.members[c].iter().map(|&v| self.window.coords_of(v)).collect())
            .unwrap_or_default()
    }

    /// `V(x) + {-1, 0, 1}^d` applied `times` times, sorted.
    pub fn dilation(&self, x: &[i64], times: usize) -> Vec<Vec<i64>> {
        let mut set: std::collections::BTreeSet<Vec<i64>> = self.component_points(x).into_iter().collect();
        let d = self.window.d();
        for _ in 0..times {
            let mut next = set.clone();
            for p in &set {
                for code in 0..3usize.pow(d as u32) {
                    let mut q = p.clone();
                    let mut k = code;
                    for qi in q.iter_mut() {
                        *qi += (k % 3) as i64 - 1;
                        k /= 3;
                    }
                    next.insert(q);
                }
            }
            set = next;
        }
        set.into_iter().collect()
    }
}

pub fn unwired_components(field: &WiredField) -> UnwiredComponents {
    let w = &field.window;
    let d = w.d();
    let n = w.vertex_count();
    let mut component = vec![None; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n {
        if field.states[start] != WiredState::Unwired || component[start].is_some() {
            continue;
        }
        let id = members.len() as u32;
        let mut list = vec![start];
        component[start] = Some(id);
        stack.push(start);
        while let Some(v) = stack.pop() {
            let mut c = [0usize; MAX_DIM];
            w.local_coords(v, &mut c);
            for code in 0..3usize.pow(d as u32) {
                let mut k = code;
                let mut u = 0usize;
                let mut inside = true;
                for (i, &base) in c.iter().enumerate().take(d) {
                    let ci = base as isize + (k % 3) as isize - 1;
                    k /= 3;
                    if ci < 0 || ci as usize >= w.side(i) {
                        inside = false;
                        break;
                    }
                    u += ci as usize * w.strides()[i];
                }
                if inside && field.states[u] == WiredState::Unwired && component[u].is_none() {
                    component[u] = Some(id);
                    list.push(u);
                    stack.push(u);
                }
            }
        }
        list.sort_unstable();
        members.push(list);
    }
    UnwiredComponents {
        window: w.clone(),
        component,
        members,
    }
}

/// Frequencies of `largest unwired component >= s` over windows
/// `[-half, half]^d`.
pub fn largest_component_tail(
    p: f64,
    d: usize,
    half: usize,
    sizes: &[usize],
    replicas: u64,
    master_seed: u64,
) -> Result<TailCurve> {
    if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sizes", "must be positive and strictly increasing"));
    }
    if replicas == 0 {
        return Err(invalid("replicas", "must be positive"));
    }
    let window = BoxWindow::centered(&vec![0; d], half)?;
    let largest: Vec<usize> = (0..replicas)
        .into_par_iter()
        .map(|i| -> Result<usize> {
            let conf = sample_configuration(&window, p, sub_seed(master_seed, i))?;
            Ok(unwired_components(&wired_field(&conf)?).largest())
        })
        .collect::<Result<_>>()?;
    let counts = sizes
        .iter()
        .map(|&s| largest.iter().filter(|&&l| l >= s).count() as u64)
        .collect();
    Ok(TailCurve::new(
        "largest_unwired_component",
        sizes.to_vec(),
        counts,
        replicas,
    ))
}

/// Parameters of the macroscopic edge process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroParams {
    /// Mesh `N`.
    pub n: u64,
    /// Direction scale `M`.
    pub m: i64,
    /// Slack in the distance threshold.
    pub eta: f64,
    /// `M r`, an integer vector of ℓ¹ norm `M`.
    pub z: Vec<i64>,
    /// Gauge of the unit direction `z / M`.
    pub mu_rhat: f64,
    /// Macro vertices per axis.
    pub macro_side: usize,
    #[serde(default)]
    pub anchor_rule: AnchorRule,
}

impl MacroParams {
    pub fn new(n: u64, m: i64, eta: f64, z: Vec<i64>, ball: &NormBall) -> Result<Self> {
        if m <= 0 || z.iter().map(|v| v.abs()).sum::<i64>() != m {
            return Err(invalid("z", "must have ℓ¹ norm M > 0"));
        }
        if ball.d() != z.len() {
            return Err(invalid("z", "dimension differs from the ball"));
        }
        let unit: Vec<f64> = z.iter().map(|&v| v as f64 / m as f64).collect();
        Ok(MacroParams {
            n,
            m,
            eta,
            mu_rhat: ball.gauge(&unit),
            z,
            macro_side: 8,
            anchor_rule: AnchorRule::GiantCluster,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "mesh must be positive"));
        }
        if self.m <= 0 || self.z.iter().map(|v| v.abs()).sum::<i64>() != self.m {
            return Err(invalid("z", "must have ℓ¹ norm M > 0"));
        }
        if !(self.eta > 0.0) || !(self.mu_rhat > 0.0) {
            return Err(invalid("eta", "eta and mu_rhat must be positive"));
        }
        if self.macro_side < 2 {
            return Err(invalid("macro_side", "need at least two macro vertices per axis"));
        }
        Ok(())
    }

    /// Distance threshold `N M mu(r) (1 + eta)`.
    pub fn threshold(&self) -> f64 {
        self.n as f64 * self.m as f64 * self.mu_rhat * (1.0 + self.eta)
    }

    pub fn cutoff(&self) -> u32 {
        self.threshold().floor() as u32
    }

    pub fn anchor_radius(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    pub fn basis(&self) -> Result<AdaptedBasis> {
        adapted_basis_int(&self.z)
    }

    fn macro_vertices(&self) -> Vec<Vec<i64>> {
        let d = self.z.len();
        let count = self.macro_side.pow(d as u32);
        (0..count)
            .map(|mut k| {
                (0..d)
                    .map(|_| {
                        let c = (k % self.macro_side) as i64;
                        k /= self.macro_side;
                        c
                    })
                    .collect()
            })
            .collect()
    }

    /// Microscopic site `N L x` of a macro vertex.
    pub fn site(&self, basis: &AdaptedBasis, x: &[i64]) -> Vec<i64> {
        basis
            .apply_int(&self.z, x)
            .into_iter()
            .map(|v| v * self.n as i64)
            .collect()
    }

    /// Smallest window holding every anchor ball and every BFS range.
    pub fn micro_window(&self) -> Result<BoxWindow> {
        self.validate()?;
        let basis = self.basis()?;
        let d = self.z.len();
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        for x in self.macro_vertices() {
            for (i, s) in self.site(&basis, &x).into_iter().enumerate() {
                lo[i] = lo[i].min(s);
                hi[i] = hi[i].max(s);
            }
        }
        let outer = match self.anchor_rule {
            AnchorRule::GiantCluster => 0,
            AnchorRule::ReachesSphere { outer } => outer as i64,
        };
        let r = self.anchor_radius().floor() as i64;
        let grow = (self.cutoff() as i64 + r).max(outer) + 1;
        let origin: Vec<i64> = lo.iter().map(|v| v - grow).collect();
        let sides: Vec<usize> = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| (h - l + 2 * grow + 1) as usize)
            .collect();
        make_box(&sides, &origin)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacroEdge {
    pub from: Vec<i64>,
    pub to: Vec<i64>,
    pub open: bool,
    /// Anchor-to-anchor distance when at most the cutoff.
    pub distance: Option<u32>,
}

/// Indicators of `D(anchor(N L x), anchor(N L y)) <= N M mu(r) (1 + eta)`
/// over the nearest-neighbour edges of the macro window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroEdgeField {
    pub params: MacroParams,
    pub edges: Vec<MacroEdge>,
    /// Macro vertices with an empty anchor; their edges are closed.
    pub empty_anchors: usize,
}

impl MacroEdgeField {
    pub fn open_fraction(&self) -> f64 {
        self.edges.iter().filter(|e| e.open).count() as f64 / self.edges.len() as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

/// Evaluates every macro edge of `params.macro_side^d` vertices on a
/// window containing [`MacroParams::micro_window`].
pub fn macro_edge_field(
    config: &Configuration,
    params: &MacroParams,
    labels: &ClusterLabels,
) -> Result<MacroEdgeField> {
    params.validate()?;
    let need = params.micro_window()?;
    let w = config.window();
    if w.d() != need.d() {
        return Err(invalid("config", "dimension differs from the direction"));
    }
    for i in 0..w.d() {
        let (lo, hi) = (need.origin()[i], need.origin()[i] + need.side(i) as i64);
        if lo < w.origin()[i] || hi > w.origin()[i] + w.side(i) as i64 {
            return Err(Error::Clipped(format!(
                "macro window needs {:?} with sides {:?}",
                need.origin(),
                need.sides()
            )));
        }
    }
    let basis = params.basis()?;
    let vertices = params.macro_vertices();
    let d = params.z.len();
    let anchors = vertices
        .iter()
        .map(|x| {
            anchor_point(
                config,
                labels,
                &params.site(&basis, x),
                params.anchor_radius(),
                params.anchor_rule,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let side = params.macro_side;
    let stride = |i: usize| side.pow(i as u32);
    let cutoff = params.cutoff();
    let rows: Vec<Vec<MacroEdge>> = (0..vertices.len())
        .into_par_iter()
        .map(|k| {
            let forward: Vec<usize> = (0..d)
                .filter(|&i| (vertices[k][i] as usize) + 1 < side)
                .map(|i| k + stride(i))
                .collect();
            if forward.is_empty() {
                return Vec::new();
            }
            let field = (!anchors[k].empty).then(|| distance_field_from(config, anchors[k].index, Some(cutoff)));
            forward
                .into_iter()
                .map(|j| {
                    let distance = match &field {
                        Some(f) if !anchors[j].empty => {
                            let dist = f.distances()[anchors[j].index];
                            (dist != UNREACHABLE).then_some(dist)
                        }
                        _ => None,
                    };
                    MacroEdge {
                        from: vertices[k].clone(),
                        to: vertices[j].clone(),
                        open: distance.is_some(),
                        distance,
                    }
                })
                .collect()
        })
        .collect();
    Ok(MacroEdgeField {
        params: params.clone(),
        edges: rows.into_iter().flatten().collect(),
        empty_anchors: anchors.iter().filter(|a| a.empty).count(),
    })
}

/// Integer directions `z` with `z_1 >= .. >= z_d >= 0` and `||z||_1 = M`,
/// in lexicographically decreasing order.
pub fn fundamental_macro_directions(d: usize, m: i64) -> Vec<Vec<i64>> {
    fn rec(rest: i64, cap: i64, slots: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if slots == 0 {
            if rest == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for v in (0..=cap.min(rest)).rev() {
            cur.push(v);
            rec(rest - v, v, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, m, d, &mut Vec::new(), &mut out);
    out
}

/// Parameters of [`estimate_pbar`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbarParams {
    pub p: f64,
    pub d: usize,
    pub ns: Vec<u64>,
    pub m: i64,
    pub eta: f64,
    pub replicas: u64,
    pub master_seed: u64,
    pub macro_side: usize,
    #[serde(default)]
    pub anchor_rule: AnchorRule,
    #[serde(default)]
    pub policy: WindowPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbarPoint {
    pub n: u64,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl PbarPoint {
    fn half_width(&self) -> f64 {
        (self.ci_hi - self.ci_lo) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbarCurve {
    pub rhat_id: String,
    pub z: Vec<i64>,
    pub mu_rhat: f64,
    pub points: Vec<PbarPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbarReport {
    pub curves: Vec<PbarCurve>,
    /// Pointwise minimum over directions; the interval is the minimiser's.
    pub min_curve: Vec<PbarPoint>,
    /// Every curve lies within the joint half-widths of the minimum.
    pub uniform: bool,
    /// The threshold uses the estimated gauge in place of the true norm.
    pub mu_source: String,
}

impl PbarReport {
    /// CSV with columns `N,mean,ci_lo,ci_hi,rhat_id`; the minimum curve has
    /// id `min`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,mean,ci_lo,ci_hi,rhat_id\n");
        let rows = self
            .curves
            .iter()
            .flat_map(|c| c.points.iter().map(move |p| (p, c.rhat_id.as_str())))
            .chain(self.min_curve.iter().map(|p| (p, "min")));
        for (pt, id) in rows {
            out.push_str(&format!("{},{},{},{},{}\n", pt.n, pt.mean, pt.ci_lo, pt.ci_hi, id));
        }
        out
    }
}

/// `p(N)`: mean macro-edge indicator for every fundamental direction on the
/// `(1/M)`-grid and every mesh in `ns`.
pub fn estimate_pbar(params: &PbarParams, ball: &NormBall) -> Result<PbarReport> {
    if params.ns.is_empty() {
        return Err(invalid("ns", "grid of meshes is empty"));
    }
    if params.replicas == 0 {
        return Err(invalid("replicas", "must be positive"));
    }
    if ball.d() != params.d {
        return Err(invalid("d", "dimension differs from the ball"));
    }
    let mut curves = Vec::new();
    for (k, z) in fundamental_macro_directions(params.d, params.m).into_iter().enumerate() {
        let master = sub_seed(params.master_seed, k as u64);
        let mut points = Vec::new();
        let mut mu_rhat = 0.0;
        for (s, &n) in params.ns.iter().enumerate() {
            let mut mp = MacroParams::new(n, params.m, params.eta, z.clone(), ball)?;
            mp.macro_side = params.macro_side;
            mp.anchor_rule = params.anchor_rule;
            mu_rhat = mp.mu_rhat;
            let window = mp.micro_window()?;
            if window.vertex_count() > params.policy.max_vertices {
                return Err(Error::ResourceExhausted {
                    required: window.vertex_count(),
                    budget: params.policy.max_vertices,
                });
            }
            let values = (0..params.replicas)
                .into_par_iter()
                .map(|i| -> Result<f64> {
                    let seed = sub_seed(master, crate::estimators::seed_index(s, params.replicas, i));
                    let conf = sample_configuration(&window, params.p, seed)?;
                    let labels = label_clusters(&conf);
                    Ok(macro_edge_field(&conf, &mp, &labels)?.open_fraction())
                })
                .collect::<Result<Vec<f64>>>()?;
            let ci = mean_interval(&values);
            points.push(PbarPoint {
                n,
                mean: ci.mean,
                ci_lo: ci.lo,
                ci_hi: ci.hi,
            });
        }
        curves.push(PbarCurve {
            rhat_id: z.iter().map(i64::to_string).collect::<Vec<_>>().join("_"),
            z,
            mu_rhat,
            points,
        });
    }
    let min_curve: Vec<PbarPoint> = (0..params.ns.len())
        .map(|s| {
            *curves
                .iter()
                .map(|c| &c.points[s])
                .min_by(|a, b| a.mean.total_cmp(&b.mean))
                .expect("at least one direction")
        })
        .collect();
    let uniform = curves.iter().all(|c| {
        c.points
            .iter()
            .zip(&min_curve)
            .all(|(p, m)| p.mean - m.mean <= p.half_width() + m.half_width() + 1e-12)
    });
    Ok(PbarReport {
        curves,
        min_curve,
        uniform,
        mu_source: "estimated_gauge".into(),
    })
}
