//! Literature values of percolation thresholds.
//!
//! These are only used for warnings and for choosing test points; no
//! estimator reads them.

/// Bond percolation threshold of `Z^2` (exact).
pub const P_C_2: f64 = 0.5;
/// Bond percolation threshold of `Z^3` (numerical estimate).
pub const P_C_3: f64 = 0.2488;
/// Oriented bond percolation threshold of `Z^2` (numerical estimate).
pub const ORIENTED_P_C_2: f64 = 0.6447;

/// Critical probability for bond percolation in dimension `d`, if known.
pub fn critical_probability(d: usize) -> Option<f64> {
    match d {
        2 => Some(P_C_2),
        3 => Some(P_C_3),
        _ => None,
    }
}

/// Returns a warning message when `p` is not supercritical.
pub fn subcritical_warning(p: f64, d: usize) -> Option<String> {
    let pc = critical_probability(d)?;
    (p <= pc).then(|| format!("p = {p} is not above p_c({d}) ~ {pc}; no infinite cluster"))
}
