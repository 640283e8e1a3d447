//! Fixtures shared by the benchmarks in `benches/`.

use gapdefect_core::{golden_mean, PotentialSpec};
use std::f64::consts::PI;

/// Kronig–Penney, `A = 40`, period φ, constant defect `22π²/(√5 φ)`.
pub fn kp_example() -> PotentialSpec {
    let phi = golden_mean();
    PotentialSpec::kronig_penney(40.0, phi, 22.0 * PI * PI / (5f64.sqrt() * phi)).expect("valid spec")
}

/// Smooth periodic cell, for the Runge–Kutta path.
pub fn polynomial_example() -> PotentialSpec {
    use gapdefect_core::Piece;
    PotentialSpec::new(
        1.3,
        vec![Piece::new(0.0, 0.6, vec![-8.0, 30.0, -23.0]), Piece::new(0.6, 1.3, vec![12.0, -4.0])],
        vec![Piece::new(0.0, 1.0, vec![5.0, -3.0, 2.0])],
    )
    .expect("valid spec")
}
