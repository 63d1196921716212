//! Fixtures shared by the benchmarks.

use percolab::lattice::{sample_configuration, BoxWindow, Configuration};

/// Configuration on `[-half, half]^d` at density `p`.
pub fn fixture(d: usize, half: usize, p: f64, seed: u64) -> Configuration {
    let window = BoxWindow::centered(&vec![0; d], half).expect("valid window");
    sample_configuration(&window, p, seed).expect("valid density")
}
