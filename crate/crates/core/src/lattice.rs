//! Finite windows of the hypercubic lattice and Bernoulli edge configurations.
//!
//! A [`BoxWindow`] is the set of vertices `origin + Π_i {0, .., side_i - 1}`
//! with free boundary (usually a cube, `side_i = side`). Vertices are indexed
//! with axis 0 varying fastest. Edges are indexed axis-major: all edges
//! parallel to `e_0` first, then `e_1`, and so on; within one axis the lower
//! endpoint is ranked in mixed radix where that axis has extent `side_a - 1`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest dimension a window can be built in.
pub const MAX_DIM: usize = 8;

/// Vertex indices are stored as `u32` by the cluster and distance layers.
const MAX_VERTICES: usize = u32::MAX as usize - 1;

/// A box `origin + Π_i {0, .., side_i - 1}` of `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WindowSpec", into = "WindowSpec")]
pub struct BoxWindow {
    d: usize,
    sides: Vec<usize>,
    origin: Vec<i64>,
    strides: Vec<usize>,
    vertex_count: usize,
    /// Index of the first edge parallel to each axis, plus the total.
    axis_offsets: Vec<usize>,
    /// `edge_strides[a][i]`: weight of coordinate `i` in the rank of an edge
    /// parallel to axis `a`.
    edge_strides: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct WindowSpec {
    sides: Vec<usize>,
    origin: Vec<i64>,
}

impl TryFrom<WindowSpec> for BoxWindow {
    type Error = Error;
    fn try_from(s: WindowSpec) -> Result<Self> {
        make_box(&s.sides, &s.origin)
    }
}

impl From<BoxWindow> for WindowSpec {
    fn from(w: BoxWindow) -> Self {
        WindowSpec {
            sides: w.sides,
            origin: w.origin,
        }
    }
}

/// Builds the cubic window `origin + {0, .., side-1}^d`.
pub fn make_window(d: usize, side: usize, origin: &[i64]) -> Result<BoxWindow> {
    if d < 2 {
        return Err(invalid("d", format!("dimension must be at least 2, got {d}")));
    }
    if origin.len() != d {
        return Err(invalid(
            "origin",
            format!("expected {d} coordinates, got {}", origin.len()),
        ));
    }
    make_box(&vec![side; d], origin)
}

/// Builds a rectangular window with `sides[i]` vertices along axis `i`.
pub fn make_box(sides: &[usize], origin: &[i64]) -> Result<BoxWindow> {
    let d = sides.len();
    if d < 2 {
        return Err(invalid("d", format!("dimension must be at least 2, got {d}")));
    }
    if d > MAX_DIM {
        return Err(invalid("d", format!("dimension must be at most {MAX_DIM}, got {d}")));
    }
    if let Some(&s) = sides.iter().find(|&&s| s < 2) {
        return Err(invalid("side", format!("side must be at least 2, got {s}")));
    }
    if origin.len() != d {
        return Err(invalid(
            "origin",
            format!("expected {d} coordinates, got {}", origin.len()),
        ));
    }
    let overflow = || Error::WindowOverflow {
        d,
        side: *sides.iter().max().unwrap(),
    };
    let mut strides = Vec::with_capacity(d);
    let mut acc = 1usize;
    for &s in sides {
        strides.push(acc);
        acc = acc.checked_mul(s).ok_or_else(overflow)?;
    }
    let vertex_count = acc;
    if vertex_count > MAX_VERTICES {
        return Err(overflow());
    }
    let mut axis_offsets = vec![0usize];
    for &s in sides {
        let per_axis = (vertex_count / s) * (s - 1);
        let next = axis_offsets
            .last()
            .unwrap()
            .checked_add(per_axis)
            .ok_or_else(overflow)?;
        axis_offsets.push(next);
    }
    let edge_strides = (0..d)
        .map(|a| {
            let mut acc = 1usize;
            (0..d)
                .map(|i| {
                    let s = acc;
                    acc *= if i == a { sides[i] - 1 } else { sides[i] };
                    s
                })
                .collect()
        })
        .collect();
    Ok(BoxWindow {
        d,
        sides: sides.to_vec(),
        origin: origin.to_vec(),
        strides,
        vertex_count,
        axis_offsets,
        edge_strides,
    })
}

impl BoxWindow {
    /// Window of side `2 * half_width + 1` centred on `center`.
    pub fn centered(center: &[i64], half_width: usize) -> Result<Self> {
        let h = half_width as i64;
        let origin: Vec<i64> = center.iter().map(|c| c - h).collect();
        make_window(center.len(), 2 * half_width + 1, &origin)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of vertices along `axis`.
    pub fn side(&self, axis: usize) -> usize {
        self.sides[axis]
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn origin(&self) -> &[i64] {
        &self.origin
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.axis_offsets[self.d]
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        point.len() == self.d
            && point
                .iter()
                .zip(&self.origin)
                .zip(&self.sides)
                .all(|((&x, &o), &s)| x >= o && x - o < s as i64)
    }

    /// Index of a lattice point, or `None` if it lies outside.
    pub fn index_of(&self, point: &[i64]) -> Option<usize> {
        if !self.contains(point) {
            return None;
        }
        Some(
            point
                .iter()
                .zip(&self.origin)
                .zip(&self.strides)
                .map(|((&x, &o), &s)| (x - o) as usize * s)
                .sum(),
        )
    }

    /// Like [`index_of`](Self::index_of) but reports an error.
    pub fn require_index(&self, point: &[i64]) -> Result<usize> {
        self.index_of(point)
            .ok_or_else(|| Error::OutsideWindow { point: point.to_vec() })
    }

    /// Local coordinates (offsets from the origin) of a vertex index.
    #[inline]
    pub fn local_coords(&self, mut index: usize, out: &mut [usize]) {
        for (c, &s) in out.iter_mut().zip(&self.sides) {
            *c = index % s;
            index /= s;
        }
    }

    pub fn coords_of(&self, index: usize) -> Vec<i64> {
        let mut local = [0usize; MAX_DIM];
        self.local_coords(index, &mut local);
        (0..self.d).map(|i| self.origin[i] + local[i] as i64).collect()
    }

    pub fn is_boundary(&self, index: usize) -> bool {
        let mut local = [0usize; MAX_DIM];
        self.local_coords(index, &mut local);
        local[..self.d]
            .iter()
            .zip(&self.sides)
            .any(|(&c, &s)| c == 0 || c + 1 == s)
    }

    /// ℓ^∞ distance from a point to the complement of the window interior,
    /// i.e. how many steps it can move along any axis before leaving.
    pub fn margin_of(&self, point: &[i64]) -> Option<usize> {
        if !self.contains(point) {
            return None;
        }
        point
            .iter()
            .zip(&self.origin)
            .zip(&self.sides)
            .map(|((&x, &o), &s)| {
                let c = (x - o) as usize;
                c.min(s - 1 - c)
            })
            .min()
    }

    /// Rank of the edge from local coordinates `c` to `c + e_axis`.
    #[inline]
    pub(crate) fn edge_rank(&self, c: &[usize], axis: usize) -> usize {
        let es = &self.edge_strides[axis];
        self.axis_offsets[axis] + c[..self.d].iter().zip(es).map(|(&x, &s)| x * s).sum::<usize>()
    }

    /// Index of the edge between vertex `v` and `v + e_axis`, if both lie in
    /// the window.
    pub fn edge_index(&self, v: usize, axis: usize) -> Option<usize> {
        if axis >= self.d || v >= self.vertex_count {
            return None;
        }
        let mut c = [0usize; MAX_DIM];
        self.local_coords(v, &mut c);
        (c[axis] + 1 < self.sides[axis]).then(|| self.edge_rank(&c, axis))
    }

    /// Index of the edge joining two neighbouring vertices.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let axis = self.strides.iter().position(|&s| s == hi - lo)?;
        let e = self.edge_index(lo, axis)?;
        (self.edge_endpoints(e) == (lo, hi)).then_some(e)
    }

    /// Endpoints `(v, v + e_axis)` of an edge index, with its axis.
    pub fn edge_endpoints_axis(&self, edge: usize) -> (usize, usize, usize) {
        assert!(edge < self.edge_count(), "edge index {edge} out of range");
        let axis = self.axis_offsets.partition_point(|&o| o <= edge) - 1;
        let mut rest = edge - self.axis_offsets[axis];
        let mut v = 0;
        for i in 0..self.d {
            let ext = if i == axis { self.sides[i] - 1 } else { self.sides[i] };
            v += (rest % ext) * self.strides[i];
            rest /= ext;
        }
        (v, v + self.strides[axis], axis)
    }

    pub fn edge_endpoints(&self, edge: usize) -> (usize, usize) {
        let (u, v, _) = self.edge_endpoints_axis(edge);
        (u, v)
    }

    /// Calls `f(neighbor, edge)` for every lattice neighbour of `v` inside
    /// the window.
    #[inline]
    pub fn for_each_neighbor(&self, v: usize, mut f: impl FnMut(usize, usize)) {
        let mut c = [0usize; MAX_DIM];
        self.local_coords(v, &mut c);
        for a in 0..self.d {
            let s = self.strides[a];
            if c[a] + 1 < self.sides[a] {
                f(v + s, self.edge_rank(&c, a));
            }
            if c[a] > 0 {
                f(v - s, self.edge_rank(&c, a) - self.edge_strides[a][a]);
            }
        }
    }
}

/// One Bernoulli edge field on a window.
///
/// Immutable once built; identical `(window, p, seed)` triples give identical
/// states bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    window: BoxWindow,
    p: f64,
    seed: u64,
    bits: Vec<u64>,
}

/// Samples every edge of `window` independently open with probability `p`.
///
/// Edges are drawn in index order from a ChaCha8 stream seeded with `seed`;
/// an edge is open when a uniform 32-bit draw is below `p * 2^32`.
pub fn sample_configuration(window: &BoxWindow, p: f64, seed: u64) -> Result<Configuration> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("p", format!("probability must lie in [0, 1], got {p}")));
    }
    let n = window.edge_count();
    let mut bits = vec![0u64; n.div_ceil(64)];
    if p >= 1.0 {
        bits.iter_mut().for_each(|w| *w = u64::MAX);
        clear_tail(&mut bits, n);
    } else if p > 0.0 {
        let threshold = (p * 4294967296.0) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, word) in bits.iter_mut().enumerate() {
            let count = (n - i * 64).min(64);
            let mut w = 0u64;
            for b in 0..count {
                if u64::from(rng.next_u32()) < threshold {
                    w |= 1 << b;
                }
            }
            *word = w;
        }
    }
    Ok(Configuration {
        window: window.clone(),
        p,
        seed,
        bits,
    })
}

fn clear_tail(bits: &mut [u64], n: usize) {
    if n % 64 != 0 {
        if let Some(last) = bits.last_mut() {
            *last &= (1u64 << (n % 64)) - 1;
        }
    }
}

impl Configuration {
    /// Builds a configuration from an explicit edge predicate (hand-built
    /// test fixtures, exhaustive enumeration). `p` is recorded as NaN.
    pub fn from_fn(window: &BoxWindow, mut open: impl FnMut(usize) -> bool) -> Self {
        let n = window.edge_count();
        let mut bits = vec![0u64; n.div_ceil(64)];
        for e in 0..n {
            if open(e) {
                bits[e / 64] |= 1 << (e % 64);
            }
        }
        Configuration {
            window: window.clone(),
            p: f64::NAN,
            seed: 0,
            bits,
        }
    }

    /// Copy of this configuration with one edge set to `open`.
    pub fn with_edge(&self, edge: usize, open: bool) -> Self {
        let mut next = self.clone();
        if open {
            next.bits[edge / 64] |= 1 << (edge % 64);
        } else {
            next.bits[edge / 64] &= !(1 << (edge % 64));
        }
        next
    }

    pub fn window(&self) -> &BoxWindow {
        &self.window
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn is_open(&self, edge: usize) -> bool {
        self.bits[edge / 64] >> (edge % 64) & 1 == 1
    }

    pub fn open_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn open_fraction(&self) -> f64 {
        self.open_count() as f64 / self.window.edge_count() as f64
    }

    /// Raw state words, one bit per edge in index order.
    pub fn state_words(&self) -> &[u64] {
        &self.bits
    }

    /// Calls `f(neighbor)` for every neighbour joined to `v` by an open edge.
    #[inline]
    pub fn for_each_open_neighbor(&self, v: usize, mut f: impl FnMut(usize)) {
        self.window.for_each_neighbor(v, |u, e| {
            if self.is_open(e) {
                f(u)
            }
        });
    }
}

/// A master seed together with a replica index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    pub master_seed: u64,
    pub replica_index: u64,
}

impl SeedStream {
    pub fn new(master_seed: u64, replica_index: u64) -> Self {
        SeedStream {
            master_seed,
            replica_index,
        }
    }

    pub fn seed(&self) -> u64 {
        derive_seed(*self)
    }
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replica `replica_index` under `master_seed`.
///
/// This is the `(replica_index + 1)`-th output of a SplitMix64 generator
/// started at `master_seed`. The state advance is injective in the index and
/// the output function is a bijection, so distinct indices never collide.
pub fn derive_seed(stream: SeedStream) -> u64 {
    let state = stream
        .master_seed
        .wrapping_add(stream.replica_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    splitmix64(state)
}

/// Shorthand for `derive_seed(SeedStream::new(master, index))`.
pub fn sub_seed(master: u64, index: u64) -> u64 {
    derive_seed(SeedStream::new(master, index))
}
