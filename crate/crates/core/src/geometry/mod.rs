//! Lattice symmetries, adapted bases, norm-ball polytopes and Hausdorff
//! distances.

mod ball;
mod hausdorff;
mod hull;

pub use ball::{BallConstants, DirectionValue, Facet, NormBall, SupportData};
pub use hausdorff::{hausdorff_distance, hausdorff_points, LatticeSet};

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// `x -> sum_i sign_i x_{perm_i} e_i`, an element of the symmetry group of
/// `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignedPermutation {
    perm: Vec<usize>,
    signs: Vec<i8>,
}

impl SignedPermutation {
    pub fn new(perm: Vec<usize>, signs: Vec<i8>) -> Result<Self> {
        let d = perm.len();
        if signs.len() != d {
            return Err(invalid("signs", "length must match the permutation"));
        }
        let mut seen = vec![false; d];
        for &p in &perm {
            if p >= d || seen[p] {
                return Err(invalid("perm", "not a permutation of 0..d"));
            }
            seen[p] = true;
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(invalid("signs", "entries must be +1 or -1"));
        }
        Ok(SignedPermutation { perm, signs })
    }

    pub fn identity(d: usize) -> Self {
        SignedPermutation {
            perm: (0..d).collect(),
            signs: vec![1; d],
        }
    }

    pub fn d(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p) && self.signs.iter().all(|&s| s == 1)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.perm
            .iter()
            .zip(&self.signs)
            .map(|(&p, &s)| f64::from(s) * x[p])
            .collect()
    }

    pub fn apply_int(&self, x: &[i64]) -> Vec<i64> {
        self.perm
            .iter()
            .zip(&self.signs)
            .map(|(&p, &s)| i64::from(s) * x[p])
            .collect()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SignedPermutation) -> SignedPermutation {
        let perm = self.perm.iter().map(|&p| other.perm[p]).collect();
        let signs = self
            .perm
            .iter()
            .zip(&self.signs)
            .map(|(&p, &s)| s * other.signs[p])
            .collect();
        SignedPermutation { perm, signs }
    }

    pub fn inverse(&self) -> SignedPermutation {
        let d = self.d();
        let mut perm = vec![0; d];
        let mut signs = vec![1; d];
        for i in 0..d {
            perm[self.perm[i]] = i;
            signs[self.perm[i]] = self.signs[i];
        }
        SignedPermutation { perm, signs }
    }
}

/// All `2^d d!` signed permutations. Permutations run in lexicographic order,
/// and for each one the sign patterns run from all plus upwards (bit `i` of
/// the pattern index flips coordinate `i`), so the identity comes first.
pub fn signed_permutations(d: usize) -> Vec<SignedPermutation> {
    let mut out = Vec::with_capacity((1 << d) * (1..=d).product::<usize>());
    for perm in (0..d).permutations(d) {
        for mask in 0..(1usize << d) {
            let signs = (0..d).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect();
            out.push(SignedPermutation {
                perm: perm.clone(),
                signs,
            });
        }
    }
    out
}

/// `inf { ||A y||_1 : ||y||_1 = 1 }`: the reciprocal of the largest column
/// ℓ¹ norm of `A^{-1}`, or 0 when `A` is singular.
pub fn conorm_l1(a: &DMatrix<f64>) -> f64 {
    assert!(a.is_square(), "conorm needs a square matrix");
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let n = a.nrows() as i32;
    if a.determinant().abs() <= 1e-12 * scale.powi(n) {
        return 0.0;
    }
    match a.clone().try_inverse() {
        Some(inv) => {
            let worst = (0..inv.ncols())
                .map(|j| inv.column(j).iter().map(|x| x.abs()).sum::<f64>())
                .fold(0.0f64, f64::max);
            1.0 / worst
        }
        None => 0.0,
    }
}

/// Largest dimension for which [`adapted_basis`] enumerates exhaustively.
pub const ADAPTED_BASIS_MAX_DIM: usize = 4;

/// Linear map `L` with columns `g_1 x, .., g_d x` (`g_1` the identity)
/// chosen to maximise the ℓ¹ co-norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptedBasis {
    x: Vec<f64>,
    transforms: Vec<SignedPermutation>,
    /// Row-major entries of `L`.
    matrix: Vec<Vec<f64>>,
    conorm: f64,
    ratio: f64,
}

impl AdaptedBasis {
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// `g_1, .., g_d`.
    pub fn transforms(&self) -> &[SignedPermutation] {
        &self.transforms
    }

    /// Row-major matrix of `L`.
    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn conorm(&self) -> f64 {
        self.conorm
    }

    /// `conorm / ||x||_1`.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// `L y`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `L y` for an integer `x` and integer `y`, exact.
    pub fn apply_int(&self, x: &[i64], y: &[i64]) -> Vec<i64> {
        let d = x.len();
        let mut out = vec![0i64; d];
        for (g, &c) in self.transforms.iter().zip(y) {
            for (o, v) in out.iter_mut().zip(g.apply_int(x)) {
                *o += c * v;
            }
        }
        out
    }
}

/// Exhaustive search over `(g_2, .., g_d)` for the basis of `x` with the
/// largest ℓ¹ co-norm; ties go to the first tuple in lexicographic order of
/// indices into [`signed_permutations`].
///
/// The co-norm does not change when columns are permuted or negated, so the
/// search runs over sets of images `g x` up to sign. Each set is represented
/// by the smallest index realising each of its images, in increasing order,
/// which is exactly the lexicographically first tuple of the full search.
pub fn adapted_basis(x: &[f64]) -> Result<AdaptedBasis> {
    let d = x.len();
    if d == 0 || d > ADAPTED_BASIS_MAX_DIM {
        return Err(invalid(
            "x",
            format!("dimension must lie in 1..={ADAPTED_BASIS_MAX_DIM}"),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) || x.iter().all(|&v| v == 0.0) {
        return Err(invalid("x", "must be finite and nonzero"));
    }
    let group = signed_permutations(d);
    // One representative index per image class up to sign.
    let mut classes: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, g) in group.iter().enumerate() {
        let img = g.apply(x);
        let neg: Vec<f64> = img.iter().map(|v| -v).collect();
        if !classes.iter().any(|(_, c)| *c == img || *c == neg) {
            classes.push((i, img));
        }
    }
    let own = classes
        .iter()
        .position(|(_, c)| c.as_slice() == x)
        .expect("identity image present");
    let others: Vec<usize> = (0..classes.len()).filter(|&c| c != own).collect();
    let l1: f64 = x.iter().map(|v| v.abs()).sum();

    let build = |cols: &[usize]| {
        let mut m = DMatrix::zeros(d, d);
        for (j, &c) in cols.iter().enumerate() {
            for i in 0..d {
                m[(i, j)] = classes[c].1[i];
            }
        }
        m
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    if d == 1 {
        best = Some((l1, vec![own]));
    } else {
        for combo in others.iter().copied().combinations(d - 1) {
            let mut cols = vec![own];
            cols.extend(&combo);
            let value = conorm_l1(&build(&cols));
            // Compare by the representative tuple of group indices.
            let mut key: Vec<usize> = combo.iter().map(|&c| classes[c].0).collect();
            key.sort_unstable();
            let better = match &best {
                None => true,
                Some((bv, bk)) => value > bv + 1e-12 || ((value - bv).abs() <= 1e-12 && key < bk[1..].to_vec()),
            };
            if better {
                let mut full = vec![0];
                full.extend(key);
                best = Some((value, full));
            }
        }
    }
    let (conorm, key) = best.expect("at least one candidate");
    let transforms: Vec<SignedPermutation> = key.iter().map(|&i| group[i].clone()).collect();
    let columns: Vec<Vec<f64>> = transforms.iter().map(|g| g.apply(x)).collect();
    let matrix = (0..d).map(|i| (0..d).map(|j| columns[j][i]).collect()).collect();
    Ok(AdaptedBasis {
        x: x.to_vec(),
        transforms,
        matrix,
        conorm,
        ratio: conorm / l1,
    })
}

/// Integer version of [`adapted_basis`].
pub fn adapted_basis_int(x: &[i64]) -> Result<AdaptedBasis> {
    adapted_basis(&x.iter().map(|&v| v as f64).collect::<Vec<_>>())
}

/// Smallest adapted-basis ratio found over a set of sampled directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEnvelope {
    pub ratio: f64,
    pub witness: Vec<f64>,
    pub samples: usize,
}

/// Minimum of [`AdaptedBasis::ratio`] over `samples` directions drawn
/// uniformly from the ℓ¹ unit sphere. Every sampled ratio is at least the
/// dimension constant, so the result bounds it from above.
pub fn sampled_ratio_envelope(d: usize, samples: usize, seed: u64) -> Result<RatioEnvelope> {
    if d == 0 {
        return Err(invalid("d", "dimension must be positive"));
    }
    if samples == 0 {
        return Err(invalid("samples", "at least one direction is required"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = RatioEnvelope {
        ratio: f64::INFINITY,
        witness: Vec::new(),
        samples,
    };
    for _ in 0..samples {
        // Signed exponentials normalised by their sum are uniform on the ℓ¹ sphere.
        let raw: Vec<f64> = (0..d)
            .map(|_| {
                let magnitude = -(1.0 - rng.random::<f64>()).ln();
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            })
            .collect();
        let total: f64 = raw.iter().map(|v| v.abs()).sum();
        if total <= 0.0 {
            continue;
        }
        let x: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let basis = adapted_basis(&x)?;
        if basis.ratio() < best.ratio {
            best.ratio = basis.ratio();
            best.witness = x;
        }
    }
    Ok(best)
}
