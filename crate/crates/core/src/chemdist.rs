//! Chemical distances: BFS distance fields, wet regions, half-space passage
//! times and crossing times of adapted boxes.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{adapted_basis, NormBall};
use crate::lattice::{make_box, BoxWindow, Configuration, MAX_DIM};

/// Distance value of vertices that are not reached.
pub const UNREACHABLE: u32 = u32::MAX;

const DUMP_MAGIC: &[u8; 4] = b"PLDF";
const DUMP_VERSION: u32 = 1;

/// Breadth-first search over open edges.
///
/// All `sources` start at distance 0. A vertex is entered only when `enter`
/// accepts it; `visit(v, dist)` runs once per reached vertex, in order of
/// nondecreasing distance, and stops the search by returning `true`.
/// Vertices beyond `cutoff` are left unreached.
fn bfs(
    config: &Configuration,
    sources: &[usize],
    cutoff: u32,
    enter: impl Fn(usize) -> bool,
    mut visit: impl FnMut(usize, u32) -> bool,
) -> Vec<u32> {
    let n = config.window().vertex_count();
    let mut dist = vec![UNREACHABLE; n];
    let mut queue: Vec<u32> = Vec::with_capacity(1024);
    for &s in sources {
        if dist[s] == UNREACHABLE {
            dist[s] = 0;
            queue.push(s as u32);
            if visit(s, 0) {
                return dist;
            }
        }
    }
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head] as usize;
        head += 1;
        let next = dist[v] + 1;
        if next > cutoff {
            continue;
        }
        let mut stop = false;
        config.for_each_open_neighbor(v, |u| {
            if stop || dist[u] != UNREACHABLE || !enter(u) {
                return;
            }
            dist[u] = next;
            queue.push(u as u32);
            stop = visit(u, next);
        });
        if stop {
            break;
        }
    }
    dist
}

fn l1_between(w: &BoxWindow, a: usize, b: usize) -> u32 {
    let mut ca = [0usize; MAX_DIM];
    let mut cb = [0usize; MAX_DIM];
    w.local_coords(a, &mut ca);
    w.local_coords(b, &mut cb);
    (0..w.d()).map(|i| ca[i].abs_diff(cb[i]) as u32).sum()
}

/// BFS distances from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    window: BoxWindow,
    source: usize,
    dist: Vec<u32>,
    cutoff: Option<u32>,
    boundary_contact: bool,
}

/// Exact chemical distances from `source` inside the window, up to `cutoff`.
pub fn distance_field(config: &Configuration, source: &[i64], cutoff: Option<u32>) -> Result<DistanceField> {
    let src = config.window().require_index(source)?;
    Ok(distance_field_from(config, src, cutoff))
}

/// [`distance_field`] from a vertex index.
pub fn distance_field_from(config: &Configuration, source: usize, cutoff: Option<u32>) -> DistanceField {
    let w = config.window();
    let mut contact = false;
    let dist = bfs(
        config,
        &[source],
        cutoff.unwrap_or(UNREACHABLE - 1),
        |_| true,
        |v, _| {
            contact |= w.is_boundary(v);
            false
        },
    );
    DistanceField {
        window: w.clone(),
        source,
        dist,
        cutoff,
        boundary_contact: contact,
    }
}

impl DistanceField {
    pub fn window(&self) -> &BoxWindow {
        &self.window
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn cutoff(&self) -> Option<u32> {
        self.cutoff
    }

    /// Some finite distance was assigned to a boundary vertex of the window.
    pub fn boundary_contact(&self) -> bool {
        self.boundary_contact
    }

    /// Raw distances with [`UNREACHABLE`] for unreached vertices.
    pub fn distances(&self) -> &[u32] {
        &self.dist
    }

    pub fn get(&self, v: usize) -> Option<u32> {
        match self.dist[v] {
            UNREACHABLE => None,
            d => Some(d),
        }
    }

    pub fn get_point(&self, point: &[i64]) -> Option<u32> {
        self.window.index_of(point).and_then(|v| self.get(v))
    }

    /// Number of reached vertices.
    pub fn reached(&self) -> usize {
        self.dist.iter().filter(|&&d| d != UNREACHABLE).count()
    }

    /// Binary dump: magic `PLDF`, version, `d`, sides, origin, source index,
    /// cutoff (`u32::MAX` when absent), then one little-endian `u32` per
    /// vertex in row-major order (last axis fastest).
    pub fn write_binary(&self, mut out: impl Write) -> std::io::Result<()> {
        out.write_all(DUMP_MAGIC)?;
        out.write_all(&DUMP_VERSION.to_le_bytes())?;
        out.write_all(&(self.window.d() as u32).to_le_bytes())?;
        for &s in self.window.sides() {
            out.write_all(&(s as u64).to_le_bytes())?;
        }
        for &o in self.window.origin() {
            out.write_all(&o.to_le_bytes())?;
        }
        out.write_all(&(self.source as u64).to_le_bytes())?;
        out.write_all(&self.cutoff.unwrap_or(UNREACHABLE).to_le_bytes())?;
        out.write_all(&[u8::from(self.boundary_contact)])?;
        let mut buf = Vec::with_capacity(self.dist.len() * 4);
        for &d in &self.dist {
            buf.extend_from_slice(&d.to_le_bytes());
        }
        out.write_all(&buf)
    }

    /// Reads a dump produced by [`DistanceField::write_binary`].
    pub fn read_binary(mut input: impl Read) -> Result<Self> {
        fn io(e: std::io::Error) -> Error {
            invalid("dump", e.to_string())
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b4).map_err(io)?;
        if &b4 != DUMP_MAGIC {
            return Err(invalid("dump", "bad magic"));
        }
        input.read_exact(&mut b4).map_err(io)?;
        if u32::from_le_bytes(b4) != DUMP_VERSION {
            return Err(invalid("dump", "unsupported version"));
        }
        input.read_exact(&mut b4).map_err(io)?;
        let d = u32::from_le_bytes(b4) as usize;
        if d > MAX_DIM {
            return Err(invalid("dump", "dimension too large"));
        }
        let mut sides = Vec::with_capacity(d);
        for _ in 0..d {
            input.read_exact(&mut b8).map_err(io)?;
            sides.push(u64::from_le_bytes(b8) as usize);
        }
        let mut origin = Vec::with_capacity(d);
        for _ in 0..d {
            input.read_exact(&mut b8).map_err(io)?;
            origin.push(i64::from_le_bytes(b8));
        }
        let window = make_box(&sides, &origin)?;
        input.read_exact(&mut b8).map_err(io)?;
        let source = u64::from_le_bytes(b8) as usize;
        if source >= window.vertex_count() {
            return Err(invalid("dump", "source index out of range"));
        }
        input.read_exact(&mut b4).map_err(io)?;
        let cutoff = match u32::from_le_bytes(b4) {
            UNREACHABLE => None,
            c => Some(c),
        };
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag).map_err(io)?;
        let mut raw = vec![0u8; window.vertex_count() * 4];
        input.read_exact(&mut raw).map_err(io)?;
        let dist = raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(DistanceField {
            window,
            source,
            dist,
            cutoff,
            boundary_contact: flag[0] != 0,
        })
    }

    /// CSV with one row per vertex: coordinates `x0..x{d-1}` and `dist`,
    /// unreached vertices written as `inf`.
    pub fn to_csv(&self) -> String {
        let d = self.window.d();
        let mut out: String = (0..d).map(|i| format!("x{i},")).collect();
        out.push_str("dist\n");
        for v in 0..self.window.vertex_count() {
            for c in self.window.coords_of(v) {
                out.push_str(&c.to_string());
                out.push(',');
            }
            match self.get(v) {
                Some(x) => out.push_str(&x.to_string()),
                None => out.push_str("inf"),
            }
            out.push('\n');
        }
        out
    }
}

/// `D(x, y)` inside the window, `None` when no open path joins them.
pub fn chemical_distance(config: &Configuration, x: &[i64], y: &[i64]) -> Result<Option<u32>> {
    let w = config.window();
    let (a, b) = (w.require_index(x)?, w.require_index(y)?);
    Ok(pair_distance(config, a, b, None).distance)
}

/// Outcome of a targeted search inside a finite window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probe {
    /// Window distance to the target, if reached within the cutoff.
    pub distance: Option<u32>,
    /// Lower bound on the length of any path that leaves the window:
    /// the minimum over reached boundary vertices `b` of their distance plus
    /// the fewest steps from `b` to the target. `None` when the search met
    /// no boundary vertex.
    pub escape_bound: Option<u32>,
}

impl Probe {
    /// The window distance equals the distance in `Z^d`.
    pub fn is_exact(&self) -> bool {
        match (self.distance, self.escape_bound) {
            (_, None) => true,
            (Some(d), Some(e)) => e >= d,
            (None, Some(_)) => false,
        }
    }

    /// Certain lower bound on the distance in `Z^d` (infinite when the
    /// search and its escape bound both say so).
    pub fn lower_bound(&self) -> u32 {
        let d = self.distance.unwrap_or(UNREACHABLE);
        d.min(self.escape_bound.unwrap_or(UNREACHABLE))
    }
}

/// Distance between two vertices with early exit when `target` is reached.
pub fn pair_distance(config: &Configuration, source: usize, target: usize, cutoff: Option<u32>) -> Probe {
    let w = config.window();
    let mut found = None;
    let mut escape: Option<u32> = None;
    bfs(
        config,
        &[source],
        cutoff.unwrap_or(UNREACHABLE - 1),
        |_| true,
        |v, d| {
            if w.is_boundary(v) {
                let e = d.saturating_add(l1_between(w, v, target));
                escape = Some(escape.map_or(e, |x| x.min(e)));
            }
            if v == target {
                found = Some(d);
                return true;
            }
            false
        },
    );
    Probe {
        distance: found,
        escape_bound: escape,
    }
}

/// `B_t`: vertices at finite distance at most `t` from the source.
pub fn wet_region(field: &DistanceField, t: f64) -> Result<Vec<usize>> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be nonnegative, got {t}")));
    }
    let level = t.floor().min(f64::from(UNREACHABLE - 1)) as u32;
    if let Some(c) = field.cutoff {
        if c < level {
            return Err(Error::CutoffTooSmall {
                cutoff: c,
                requested: t,
            });
        }
    }
    Ok(field
        .dist
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= level)
        .map(|(v, _)| v)
        .collect())
}

/// `{z : <normal, z> > level}` with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    normal: Vec<f64>,
    level: f64,
}

const HALFSPACE_TOL: f64 = 1e-9;

impl HalfSpace {
    /// `normal` is rescaled to unit length; `level` refers to the unit normal.
    pub fn new(normal: &[f64], level: f64) -> Result<Self> {
        let norm = normal.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() || !level.is_finite() {
            return Err(invalid("normal", "must be a finite nonzero vector"));
        }
        Ok(HalfSpace {
            normal: normal.iter().map(|x| x / norm).collect(),
            level,
        })
    }

    /// Half-space beyond the hyperplane through `point` orthogonal to `normal`.
    pub fn through(normal: &[f64], point: &[f64]) -> Result<Self> {
        let mut hs = HalfSpace::new(normal, 0.0)?;
        hs.level = hs.functional(point);
        Ok(hs)
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn functional(&self, z: &[f64]) -> f64 {
        self.normal.iter().zip(z).map(|(a, b)| a * b).sum()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.functional(z) > self.level + HALFSPACE_TOL
    }

    pub fn contains_lattice(&self, z: &[i64]) -> bool {
        let f: f64 = self.normal.iter().zip(z).map(|(a, &b)| a * b as f64).sum();
        f > self.level + HALFSPACE_TOL
    }

    /// Fewest lattice steps from `z` into the open side.
    fn steps_from(&self, z: &[i64]) -> u32 {
        let f: f64 = self.normal.iter().zip(z).map(|(a, &b)| a * b as f64).sum();
        let gap = self.level + HALFSPACE_TOL - f;
        if gap < 0.0 {
            return 0;
        }
        let step = self.normal.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        ((gap / step).floor() + 1.0).min(f64::from(UNREACHABLE - 1)) as u32
    }
}

/// First passage time from a source to the open side of a half-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassageTime {
    pub time: Option<u32>,
    /// A path leaving the window could be shorter than `time` (or the
    /// search died at the window boundary); enlarge the window.
    pub exhausted: bool,
}

/// `inf { D(source, z) : z in hs }`, searched inside the window.
pub fn hyperplane_passage_time(config: &Configuration, source: &[i64], hs: &HalfSpace) -> Result<PassageTime> {
    let w = config.window();
    let src = w.require_index(source)?;
    if hs.contains_lattice(source) {
        return Err(Error::SourceBeyondHyperplane);
    }
    let mut found = None;
    let mut escape = UNREACHABLE;
    bfs(
        config,
        &[src],
        UNREACHABLE - 1,
        |_| true,
        |v, d| {
            let z = w.coords_of(v);
            if hs.contains_lattice(&z) {
                found = Some(d);
                return true;
            }
            if w.is_boundary(v) {
                escape = escape.min(d.saturating_add(hs.steps_from(&z)));
            }
            false
        },
    );
    let exhausted = match found {
        Some(t) => escape < t,
        None => escape != UNREACHABLE,
    };
    Ok(PassageTime { time: found, exhausted })
}

/// Parallelepiped `T = { v : k_m <= <v, n_m>/<y_m, n_m> < k_m + alpha_m }`
/// built on directions `y_m` and normals `n_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxFrame {
    directions: Vec<Vec<f64>>,
    normals: Vec<Vec<f64>>,
    corner: Vec<i64>,
    sides: Vec<f64>,
}

/// Float tolerance on the box coordinates; ties go to the lower-inclusive side.
pub const FRAME_TOL: f64 = 1e-9;

/// Position of a vertex relative to a [`BoxFrame`] and one of its axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameRegion {
    Inside,
    /// Outside `T`, below the box along the axis, within range on the others.
    Below,
    /// Outside `T`, at or above the far side along the axis.
    Above,
    Elsewhere,
}

impl BoxFrame {
    pub fn new(directions: Vec<Vec<f64>>, normals: Vec<Vec<f64>>, corner: Vec<i64>, sides: Vec<f64>) -> Result<Self> {
        let d = corner.len();
        if directions.len() != d || normals.len() != d || sides.len() != d {
            return Err(invalid(
                "frame",
                "directions, normals, corner and sides must have length d",
            ));
        }
        if directions.iter().chain(&normals).any(|v| v.len() != d) {
            return Err(invalid("frame", "vectors must have length d"));
        }
        if sides.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(invalid("sides", "must be positive and finite"));
        }
        for (y, n) in directions.iter().zip(&normals) {
            let c: f64 = y.iter().zip(n).map(|(a, b)| a * b).sum();
            if !(c > FRAME_TOL) {
                return Err(invalid(
                    "frame",
                    "each direction must have positive product with its normal",
                ));
            }
        }
        let m = DMatrix::from_fn(d, d, |i, j| normals[i][j]);
        if m.determinant().abs() < 1e-12 {
            return Err(invalid("normals", "must be linearly independent"));
        }
        Ok(BoxFrame {
            directions,
            normals,
            corner,
            sides,
        })
    }

    /// Frame adapted to `y`: `n_1` is the support normal of `ball` at `y`,
    /// and `(y_m, n_m) = (g_m y, g_m n_1)` for the adapted basis of `n_1`.
    pub fn adapted(ball: &NormBall, y: &[f64], corner: Vec<i64>, sides: Vec<f64>) -> Result<Self> {
        let support = ball.support_normal(y)?;
        let basis = adapted_basis(&support.normal)?;
        let yn = {
            let norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
            y.iter().map(|x| x / norm).collect::<Vec<_>>()
        };
        let directions = basis.transforms().iter().map(|g| g.apply(&yn)).collect();
        let normals = basis.transforms().iter().map(|g| g.apply(&support.normal)).collect();
        BoxFrame::new(directions, normals, corner, sides)
    }

    pub fn d(&self) -> usize {
        self.corner.len()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    pub fn corner(&self) -> &[i64] {
        &self.corner
    }

    pub fn sides(&self) -> &[f64] {
        &self.sides
    }

    /// `<v, n_m> / <y_m, n_m>` for every axis.
    pub fn coordinates(&self, v: &[i64]) -> Vec<f64> {
        self.normals
            .iter()
            .zip(&self.directions)
            .map(|(n, y)| {
                let num: f64 = n.iter().zip(v).map(|(a, &b)| a * b as f64).sum();
                let den: f64 = n.iter().zip(y).map(|(a, b)| a * b).sum();
                num / den
            })
            .collect()
    }

    fn in_range(&self, m: usize, s: f64) -> bool {
        let lo = self.corner[m] as f64;
        s >= lo - FRAME_TOL && s < lo + self.sides[m] - FRAME_TOL
    }

    pub fn contains(&self, v: &[i64]) -> bool {
        self.coordinates(v)
            .iter()
            .enumerate()
            .all(|(m, &s)| self.in_range(m, s))
    }

    /// Region of `v` for axis `m`, ignoring the adjacency requirement of the
    /// borders.
    fn slab_region(&self, v: &[i64], m: usize) -> FrameRegion {
        let s = self.coordinates(v);
        if (0..self.d()).filter(|&j| j != m).any(|j| !self.in_range(j, s[j])) {
            return FrameRegion::Elsewhere;
        }
        let lo = self.corner[m] as f64;
        if s[m] < lo - FRAME_TOL {
            FrameRegion::Below
        } else if s[m] >= lo + self.sides[m] - FRAME_TOL {
            FrameRegion::Above
        } else {
            FrameRegion::Inside
        }
    }

    /// Region of `v` for axis `m`; `Below`/`Above` are the borders of the
    /// box (they require an ℓ¹ neighbour inside `T`).
    pub fn region(&self, v: &[i64], m: usize) -> FrameRegion {
        match self.slab_region(v, m) {
            FrameRegion::Inside => FrameRegion::Inside,
            FrameRegion::Elsewhere => FrameRegion::Elsewhere,
            r => {
                let mut u = v.to_vec();
                for i in 0..self.d() {
                    for delta in [-1, 1] {
                        u[i] += delta;
                        let hit = self.contains(&u);
                        u[i] -= delta;
                        if hit {
                            return r;
                        }
                    }
                }
                FrameRegion::Elsewhere
            }
        }
    }

    /// Integer bounding box `[lo, hi]` of `T` grown by one in every axis.
    pub fn bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        let d = self.d();
        let n = DMatrix::from_fn(d, d, |i, j| self.normals[i][j]);
        let inv = n.try_inverse().expect("normals checked independent");
        let scale: Vec<f64> = self
            .normals
            .iter()
            .zip(&self.directions)
            .map(|(n, y)| n.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for mask in 0..(1usize << d) {
            let rhs = nalgebra::DVector::from_fn(d, |m, _| {
                let s = self.corner[m] as f64 + if mask >> m & 1 == 1 { self.sides[m] } else { 0.0 };
                s * scale[m]
            });
            let p = &inv * rhs;
            for i in 0..d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        (
            lo.iter().map(|x| x.floor() as i64 - 1).collect(),
            hi.iter().map(|x| x.ceil() as i64 + 1).collect(),
        )
    }
}

/// Membership tags of a frame inside a window.
const TAG_NONE: u8 = 0;
const TAG_INSIDE: u8 = 1;
const TAG_BELOW: u8 = 2;
const TAG_ABOVE: u8 = 3;

fn frame_tags(window: &BoxWindow, frame: &BoxFrame, m: usize) -> Result<Vec<u8>> {
    let d = window.d();
    if frame.d() != d {
        return Err(invalid("frame", "dimension differs from the window"));
    }
    if m >= d {
        return Err(invalid("m", format!("axis {m} out of range")));
    }
    let (lo, hi) = frame.bounding_box();
    if !window.contains(&lo) || !window.contains(&hi) {
        return Err(Error::Clipped(format!(
            "box with bounding corners {lo:?}..{hi:?} does not fit the window"
        )));
    }
    let mut tags = vec![TAG_NONE; window.vertex_count()];
    let mut cur = lo.clone();
    loop {
        let v = window.index_of(&cur).expect("bounding box inside window");
        tags[v] = match frame.slab_region(&cur, m) {
            FrameRegion::Inside => TAG_INSIDE,
            FrameRegion::Below => TAG_BELOW,
            FrameRegion::Above => TAG_ABOVE,
            FrameRegion::Elsewhere => TAG_NONE,
        };
        let mut i = 0;
        loop {
            if i == d {
                break;
            }
            cur[i] += 1;
            if cur[i] <= hi[i] {
                break;
            }
            cur[i] = lo[i];
            i += 1;
        }
        if i == d {
            break;
        }
    }
    // Borders keep only slab vertices with a neighbour in T.
    for v in 0..tags.len() {
        if tags[v] == TAG_BELOW || tags[v] == TAG_ABOVE {
            let mut adjacent = false;
            window.for_each_neighbor(v, |u, _| adjacent |= tags[u] == TAG_INSIDE);
            if !adjacent {
                tags[v] = TAG_NONE;
            }
        }
    }
    Ok(tags)
}

/// Crossing time of the box in direction `m`: the shortest open path from
/// the lower border to the upper border whose other vertices all lie in `T`.
pub fn box_crossing_time(config: &Configuration, frame: &BoxFrame, m: usize) -> Result<Option<u32>> {
    let tags = frame_tags(config.window(), frame, m)?;
    let sources: Vec<usize> = (0..tags.len()).filter(|&v| tags[v] == TAG_BELOW).collect();
    let mut found = None;
    bfs(
        config,
        &sources,
        UNREACHABLE - 1,
        |u| tags[u] == TAG_INSIDE || tags[u] == TAG_ABOVE,
        |v, d| {
            if tags[v] == TAG_ABOVE {
                found = Some(d);
                return true;
            }
            false
        },
    );
    Ok(found)
}

/// Vertices of `T` and of its two borders along `m`, as window indices.
pub fn frame_members(window: &BoxWindow, frame: &BoxFrame, m: usize) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let tags = frame_tags(window, frame, m)?;
    let pick = |t: u8| (0..tags.len()).filter(|&v| tags[v] == t).collect::<Vec<_>>();
    Ok((pick(TAG_INSIDE), pick(TAG_BELOW), pick(TAG_ABOVE)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_box, make_window, sample_configuration};

    fn full(w: &BoxWindow) -> Configuration {
        Configuration::from_fn(w, |_| true)
    }

    /// Shortest simple open path by exhaustive depth-first enumeration.
    fn simple_path_oracle(config: &Configuration, s: usize) -> Vec<u32> {
        let w = config.window();
        let mut best = vec![UNREACHABLE; w.vertex_count()];
        let mut on_path = vec![false; w.vertex_count()];
        fn dfs(c: &Configuration, v: usize, len: u32, on: &mut Vec<bool>, best: &mut Vec<u32>) {
            best[v] = best[v].min(len);
            on[v] = true;
            let mut next = Vec::new();
            c.for_each_open_neighbor(v, |u| next.push(u));
            for u in next {
                if !on[u] {
                    dfs(c, u, len + 1, on, best);
                }
            }
            on[v] = false;
        }
        dfs(config, s, 0, &mut on_path, &mut best);
        best
    }

    #[test]
    fn full_grid_gives_l1() {
        let w = make_window(2, 9, &[-4, -4]).unwrap();
        let f = distance_field(&full(&w), &[0, 0], None).unwrap();
        for v in 0..w.vertex_count() {
            let c = w.coords_of(v);
            assert_eq!(f.get(v), Some((c[0].abs() + c[1].abs()) as u32));
        }
        assert!(f.boundary_contact());
        assert_eq!(
            chemical_distance(&full(&make_window(2, 8, &[0, 0]).unwrap()), &[0, 0], &[3, 4]).unwrap(),
            Some(7)
        );
    }

    #[test]
    fn closed_grid_is_unreachable() {
        let w = make_window(2, 5, &[0, 0]).unwrap();
        let c = Configuration::from_fn(&w, |_| false);
        let f = distance_field(&c, &[2, 2], None).unwrap();
        assert_eq!(f.reached(), 1);
        assert_eq!(f.get_point(&[2, 2]), Some(0));
        assert!(!f.boundary_contact());
        assert_eq!(chemical_distance(&c, &[2, 2], &[2, 2]).unwrap(), Some(0));
    }

    #[test]
    fn exhaustive_two_by_three() {
        let w = make_box(&[2, 3], &[0, 0]).unwrap();
        assert_eq!(w.edge_count(), 7);
        for mask in 0u32..(1 << 7) {
            let c = Configuration::from_fn(&w, |e| mask >> e & 1 == 1);
            for s in 0..w.vertex_count() {
                let f = distance_field_from(&c, s, None);
                assert_eq!(
                    f.distances(),
                    simple_path_oracle(&c, s).as_slice(),
                    "mask {mask} source {s}"
                );
            }
        }
    }

    #[test]
    fn exhaustive_two_cube() {
        let w = make_window(3, 2, &[0, 0, 0]).unwrap();
        for mask in 0u32..(1 << 12) {
            let c = Configuration::from_fn(&w, |e| mask >> e & 1 == 1);
            let f = distance_field_from(&c, 0, None);
            assert_eq!(f.distances(), simple_path_oracle(&c, 0).as_slice());
        }
    }

    #[test]
    fn symmetric_on_random_configurations() {
        let w = make_window(2, 8, &[0, 0]).unwrap();
        let mut checked = 0;
        for seed in 0..10 {
            let c = sample_configuration(&w, 0.6, seed).unwrap();
            for i in 0..100u64 {
                let a = (crate::lattice::splitmix64(seed * 1000 + i) % 64) as usize;
                let b = (crate::lattice::splitmix64(seed * 1000 + i + 500) % 64) as usize;
                assert_eq!(
                    pair_distance(&c, a, b, None).distance,
                    pair_distance(&c, b, a, None).distance
                );
                checked += 1;
            }
        }
        assert_eq!(checked, 1000);
    }

    #[test]
    fn wet_regions() {
        let w = make_window(2, 11, &[-5, -5]).unwrap();
        let f = distance_field(&full(&w), &[0, 0], None).unwrap();
        assert_eq!(wet_region(&f, 2.0).unwrap().len(), 13);
        assert_eq!(wet_region(&f, 0.0).unwrap(), vec![w.index_of(&[0, 0]).unwrap()]);
        let cut = distance_field(&full(&w), &[0, 0], Some(3)).unwrap();
        assert!(matches!(wet_region(&cut, 4.0), Err(Error::CutoffTooSmall { .. })));
        assert_eq!(wet_region(&cut, 3.5).unwrap().len(), 25);
        for seed in 0..100 {
            let c = sample_configuration(&w, 0.6, seed).unwrap();
            let f = distance_field(&c, &[0, 0], None).unwrap();
            let b5 = wet_region(&f, 5.0).unwrap();
            let b9: std::collections::HashSet<_> = wet_region(&f, 9.0).unwrap().into_iter().collect();
            assert!(b5.iter().all(|v| b9.contains(v)));
        }
    }

    #[test]
    fn pair_probe_escape_bound() {
        let w = make_window(2, 5, &[0, 0]).unwrap();
        let p = pair_distance(&full(&w), 0, w.index_of(&[4, 4]).unwrap(), None);
        assert_eq!(p.distance, Some(8));
        assert!(p.is_exact());
    }

    #[test]
    fn hyperplane_on_full_grid() {
        let w = make_window(2, 41, &[-20, -20]).unwrap();
        let c = full(&w);
        for r in [0.0, 0.5, 3.0, 7.3] {
            let hs = HalfSpace::new(&[1.0, 0.0], r).unwrap();
            let t = hyperplane_passage_time(&c, &[0, 0], &hs).unwrap();
            assert_eq!(t.time, Some(r.floor() as u32 + 1));
            assert!(!t.exhausted);
        }
        // Diagonal: (x + y)/sqrt2 > 3/sqrt2 needs x + y >= 4.
        let hs = HalfSpace::through(&[1.0, 1.0], &[1.5, 1.5]).unwrap();
        assert_eq!(hyperplane_passage_time(&c, &[0, 0], &hs).unwrap().time, Some(4));
        let hs = HalfSpace::new(&[1.0, 0.0], -1.0).unwrap();
        assert!(matches!(
            hyperplane_passage_time(&c, &[0, 0], &hs),
            Err(Error::SourceBeyondHyperplane)
        ));
        let closed = Configuration::from_fn(&w, |_| false);
        let hs = HalfSpace::new(&[1.0, 0.0], 2.0).unwrap();
        let t = hyperplane_passage_time(&closed, &[0, 0], &hs).unwrap();
        assert_eq!(
            t,
            PassageTime {
                time: None,
                exhausted: false
            }
        );
        let small = make_window(2, 5, &[-2, -2]).unwrap();
        let hs = HalfSpace::new(&[1.0, 0.0], 10.0).unwrap();
        assert!(hyperplane_passage_time(&full(&small), &[0, 0], &hs).unwrap().exhausted);
    }

    fn axis_frame(corner: Vec<i64>, sides: Vec<f64>) -> BoxFrame {
        BoxFrame::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            corner,
            sides,
        )
        .unwrap()
    }

    /// Floyd–Warshall over the graph of open edges whose inner endpoints lie in T.
    fn crossing_oracle(c: &Configuration, frame: &BoxFrame, m: usize) -> Option<u32> {
        let w = c.window();
        let (inside, below, above) = frame_members(w, frame, m).unwrap();
        let nodes: Vec<usize> = inside.iter().chain(&below).chain(&above).copied().collect();
        let pos = |v: usize| nodes.iter().position(|&x| x == v);
        let k = nodes.len();
        let mut dist = vec![vec![UNREACHABLE as u64; k]; k];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = 0;
        }
        let is_inside = |v: usize| inside.contains(&v);
        for e in 0..w.edge_count() {
            if !c.is_open(e) {
                continue;
            }
            let (a, b) = w.edge_endpoints(e);
            if let (Some(i), Some(j)) = (pos(a), pos(b)) {
                // Border vertices are path ends only, so border-border edges
                // are kept (a path of length one) but cannot be chained.
                dist[i][j] = 1;
                dist[j][i] = 1;
            }
        }
        for via in 0..k {
            if !is_inside(nodes[via]) {
                continue;
            }
            for i in 0..k {
                for j in 0..k {
                    let alt = dist[i][via] + dist[via][j];
                    if alt < dist[i][j] {
                        dist[i][j] = alt;
                    }
                }
            }
        }
        let mut best = UNREACHABLE as u64;
        for s in &below {
            for t in &above {
                best = best.min(dist[pos(*s).unwrap()][pos(*t).unwrap()]);
            }
        }
        (best < UNREACHABLE as u64).then_some(best as u32)
    }

    #[test]
    fn crossing_full_grid_axis_box() {
        let w = make_window(2, 12, &[-1, -1]).unwrap();
        let frame = axis_frame(vec![1, 1], vec![5.0, 3.0]);
        let (inside, below, above) = frame_members(&w, &frame, 0).unwrap();
        assert_eq!(inside.len(), 15);
        assert_eq!(below.len(), 3);
        assert_eq!(above.len(), 3);
        assert_eq!(box_crossing_time(&full(&w), &frame, 0).unwrap(), Some(6));
        assert_eq!(box_crossing_time(&full(&w), &frame, 1).unwrap(), Some(4));
        let closed = Configuration::from_fn(&w, |_| false);
        assert_eq!(box_crossing_time(&closed, &frame, 0).unwrap(), None);
        let clipped = axis_frame(vec![9, 1], vec![5.0, 3.0]);
        assert!(matches!(
            box_crossing_time(&full(&w), &clipped, 0),
            Err(Error::Clipped(_))
        ));
    }

    #[test]
    fn crossing_matches_oracle_and_is_antitone() {
        let w = make_window(2, 12, &[-6, -6]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let frame = BoxFrame::new(
            vec![vec![s, s], vec![-s, s]],
            vec![vec![s, s], vec![-s, s]],
            vec![-2, -2],
            vec![4.5, 3.5],
        )
        .unwrap();
        for seed in 0..40 {
            let c = sample_configuration(&w, 0.65, seed).unwrap();
            for m in 0..2 {
                let t = box_crossing_time(&c, &frame, m).unwrap();
                assert_eq!(t, crossing_oracle(&c, &frame, m), "seed {seed} axis {m}");
                let closed: Vec<usize> = (0..w.edge_count()).filter(|&e| !c.is_open(e)).collect();
                let e = closed[seed as usize % closed.len()];
                let t2 = box_crossing_time(&c.with_edge(e, true), &frame, m).unwrap();
                assert!(t2.unwrap_or(UNREACHABLE) <= t.unwrap_or(UNREACHABLE));
            }
        }
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let w = make_window(2, 4, &[0, 0]).unwrap();
        let c = sample_configuration(&w, 0.5, 3).unwrap();
        let f = distance_field(&c, &[1, 1], Some(4)).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(DistanceField::read_binary(buf.as_slice()).unwrap(), f);
        assert!(DistanceField::read_binary(&b"XXXX"[..]).is_err());
        let closed = Configuration::from_fn(&w, |_| false);
        let csv = distance_field(&closed, &[0, 0], None).unwrap().to_csv();
        assert!(csv.starts_with("x0,x1,dist\n0,0,0\n1,0,inf\n"));
    }
}
