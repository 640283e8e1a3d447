//! Defect eigenvalues in the spectral gaps of one-dimensional periodic
//! Schrödinger operators with a dislocation.

pub mod diophantine;
pub mod error;
pub mod mat2;
pub mod oracle;
pub mod potential;
pub mod evans;
pub mod floquet;
pub mod gapcount;
pub mod propagator;

pub use diophantine::{
    continued_fraction, convergents, exceptional_analysis, fa_quadratic, form_solutions, modular_transform,
    residuals, ApproxHit, ContinuedFraction, QuadraticIrrational, RealNumber, Unimodular,
};
pub use error::{Error, Result};
pub use evans::{evans, evans_roots_in_gap, EvansRoot, GapEigenPair};
pub use floquet::{discriminant, gaps, GapInterval, SpectralPosition};
pub use gapcount::{count_gap, count_range, CountParams, CountReport};
pub use mat2::{Mat2, Sym2, J};
pub use oracle::{gap_count_oracle, gap_count_oracle_auto, BoxDiscretization, OracleCount, OracleParams};
pub use potential::{golden_mean, Piece, Polynomial, PotentialSpec, Segment};
pub use propagator::{
    defect_transfer, kp_closed_form, monodromy_periodic, phi_matrix, propagate, theta_matrix, HamiltonianAt,
    Transfer,
};
