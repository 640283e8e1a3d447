//! Evans function `f(E) = ⟨v₋, J N(E, 1) v₊⟩` and its roots in the gaps.
//!
//! `v₊` spans the solutions decaying at −∞ (eigenvalue `λ₊`, `|λ₊| > 1`),
//! `v₋` those decaying at +∞. A defect eigenvalue is an energy where the
//! defect transfer maps one onto a multiple of the other.

use crate::error::{Error, Result};
use crate::floquet::{excess, gap_coordinate_map, GapInterval};
use crate::mat2::{dot, j_apply, normalize, Mat2};
use crate::potential::PotentialSpec;
use crate::propagator::{defect_transfer_with_theta, monodromy_with_phi, Transfer, DEFAULT_TOL};
use rayon::prelude::*;
use serde::Serialize;

pub const DEFAULT_GRID_N: usize = 256;
pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
/// Largest refinement factor applied to `grid_n` before giving up.
const MAX_REFINE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEigenPair {
    pub v_plus: [f64; 2],
    pub v_minus: [f64; 2],
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

fn flip(v: [f64; 2]) -> [f64; 2] {
    [-v[0], -v[1]]
}

/// Unit vector with the larger-magnitude component positive.
fn canonical(v: [f64; 2]) -> [f64; 2] {
    let v = normalize(v);
    if v[0].abs() >= v[1].abs() {
        if v[0] < 0.0 { flip(v) } else { v }
    } else if v[1] < 0.0 {
        flip(v)
    } else {
        v
    }
}

/// Unit eigenvector of `m` for the eigenvalue `lambda`.
fn eigenvector(m: &Mat2, lambda: f64) -> [f64; 2] {
    let a = [m.m12, lambda - m.m11];
    let b = [lambda - m.m22, m.m21];
    let v = if a[0].hypot(a[1]) >= b[0].hypot(b[1]) { a } else { b };
    if v == [0.0, 0.0] {
        // m is a multiple of the identity
        return [1.0, 0.0];
    }
    canonical(v)
}

impl GapEigenPair {
    /// Flip signs so both vectors point the same way as `reference`.
    pub fn aligned_with(mut self, reference: &GapEigenPair) -> GapEigenPair {
        if dot(self.v_plus, reference.v_plus) < 0.0 {
            self.v_plus = flip(self.v_plus);
        }
        if dot(self.v_minus, reference.v_minus) < 0.0 {
            self.v_minus = flip(self.v_minus);
        }
        self
    }

    /// Eigenvector residual `max ‖M v± − λ± v±‖`.
    pub fn residual(&self, m: &Mat2) -> f64 {
        let r = |v: [f64; 2], l: f64| {
            let w = m.apply(v);
            (w[0] - l * v[0]).hypot(w[1] - l * v[1])
        };
        r(self.v_plus, self.lambda_plus).max(r(self.v_minus, self.lambda_minus))
    }
}

/// Eigen-decomposition of a unimodular matrix with `tr² > 4`.
///
/// `λ₋` is taken as `1/λ₊`, and `√(k² − 4)` is formed as
/// `√((k − 2)(k + 2))`, which keeps both accurate close to a band edge.
pub fn gap_eigenpair(m: &Mat2) -> Result<GapEigenPair> {
    let k = m.trace();
    let d = excess(k);
    if !(d > 0.0) {
        return Err(Error::NotInGap { energy: f64::NAN, excess: d });
    }
    let lambda_plus = 0.5 * (k + k.signum() * d.sqrt());
    let lambda_minus = 1.0 / lambda_plus;
    Ok(GapEigenPair {
        v_plus: eigenvector(m, lambda_plus),
        v_minus: eigenvector(m, lambda_minus),
        lambda_plus,
        lambda_minus,
    })
}

/// Limit of both eigenvectors at a band edge, where `M − (±I)` has rank one.
pub fn edge_eigenvector(m: &Mat2) -> [f64; 2] {
    eigenvector(m, m.trace().signum())
}

/// `⟨v₋, J P v₊⟩`.
pub fn skew_pairing(v_minus: [f64; 2], p: &Mat2, v_plus: [f64; 2]) -> f64 {
    dot(v_minus, j_apply(p.apply(v_plus)))
}

/// Evans function at `e` with the canonical eigenvector signs.
pub fn evans(spec: &PotentialSpec, e: f64) -> Result<f64> {
    generalized_evans(spec, e, 1.0)
}

/// `f(E, x) = ⟨v₋, J N(E, x) v₊⟩`.
pub fn generalized_evans(spec: &PotentialSpec, e: f64, x: f64) -> Result<f64> {
    let m = monodromy_with_phi(spec, e, DEFAULT_TOL).u;
    let pair = gap_eigenpair(&m).map_err(|_| Error::NotInGap {
        energy: e,
        excess: excess(m.trace()),
    })?;
    let n = defect_transfer_with_theta(spec, e, x, DEFAULT_TOL)?.u;
    Ok(skew_pairing(pair.v_minus, &n, pair.v_plus))
}

/// Hellmann–Feynman rotation rates `(α₊, α₋)` with `∂v± = α± J v±`, for a
/// matrix `p` with derivative `p_e` and eigen-pair `pair`.
pub fn hf_coefficients(p: &Mat2, p_e: &Mat2, pair: &GapEigenPair) -> Result<(f64, f64)> {
    let rate = |v: [f64; 2], l: f64| -> Result<f64> {
        let denom = 1.0 - l * l;
        if denom == 0.0 {
            return Err(Error::NotInGap {
                energy: f64::NAN,
                excess: excess(p.trace()),
            });
        }
        Ok(l * skew_pairing(v, p_e, v) / denom)
    };
    Ok((rate(pair.v_plus, pair.lambda_plus)?, rate(pair.v_minus, pair.lambda_minus)?))
}

/// Everything needed at one energy of a gap scan.
#[derive(Debug, Clone, Copy)]
struct Sample {
    e: f64,
    monodromy: Transfer,
    defect: Transfer,
    pair: GapEigenPair,
}

impl Sample {
    fn at(spec: &PotentialSpec, e: f64, edge: bool) -> Result<Sample> {
        let monodromy = monodromy_with_phi(spec, e, DEFAULT_TOL);
        let defect = defect_transfer_with_theta(spec, e, 1.0, DEFAULT_TOL)?;
        let pair = match gap_eigenpair(&monodromy.u) {
            Ok(p) if !edge => p,
            _ => {
                let v = edge_eigenvector(&monodromy.u);
                let l = monodromy.u.trace().signum();
                GapEigenPair {
                    v_plus: v,
                    v_minus: v,
                    lambda_plus: l,
                    lambda_minus: l,
                }
            }
        };
        Ok(Sample {
            e,
            monodromy,
            defect,
            pair,
        })
    }

    fn f(&self) -> f64 {
        skew_pairing(self.pair.v_minus, &self.defect.u, self.pair.v_plus)
    }
}

/// One point of an Evans scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub energy: f64,
    /// Gap coordinate, or `√(E_0 − E)` on the semi-infinite gap.
    pub coordinate: f64,
    pub f: f64,
}

/// A simple root of the Evans function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvansRoot {
    pub energy: f64,
    /// `N v₊ = μ v₋` at the root.
    pub mu: f64,
    /// `sign(f_E)` from the analytic derivative.
    pub fe_sign: i8,
    pub f_e: f64,
    pub f_value: f64,
}

/// Lower cutoff for the semi-infinite gap: `E_0 − max(10, 2 max|q|)`.
pub fn semi_infinite_cutoff(spec: &PotentialSpec, gap: &GapInterval) -> f64 {
    gap.e_hi - (2.0 * spec.max_abs()).max(10.0)
}

/// Energies and coordinates of the scan grid, `n + 1` points.
fn grid(spec: &PotentialSpec, gap: &GapInterval, n: usize) -> Result<Vec<(f64, f64)>> {
    if gap.is_semi_infinite() {
        let s_max = (gap.e_hi - semi_infinite_cutoff(spec, gap)).sqrt();
        Ok((0..=n)
            .map(|i| {
                let s = s_max * (n - i) as f64 / n as f64;
                let e = if i == n { gap.e_hi } else { gap.e_hi - s * s };
                (e, s)
            })
            .collect())
    } else {
        gap_coordinate_map(spec, gap, crate::floquet::DEFAULT_QUAD_TOL)?.uniform_grid(n)
    }
}

/// Samples along the grid with eigenvector signs fixed by continuity from
/// the middle of the gap outwards.
fn aligned_samples(spec: &PotentialSpec, gap: &GapInterval, pts: &[(f64, f64)]) -> Result<Vec<Sample>> {
    let n = pts.len() - 1;
    let mut samples: Vec<Sample> = pts
        .par_iter()
        .enumerate()
        .map(|(i, &(e, _))| {
            let is_edge = i == n || (i == 0 && !gap.is_semi_infinite());
            Sample::at(spec, e, is_edge)
        })
        .collect::<Result<_>>()?;
    let mid = n / 2;
    for i in (0..mid).rev() {
        let r = samples[i + 1].pair;
        samples[i].pair = samples[i].pair.aligned_with(&r);
    }
    for i in mid + 1..=n {
        let r = samples[i - 1].pair;
        samples[i].pair = samples[i].pair.aligned_with(&r);
    }
    Ok(samples)
}

/// `f` on `grid_n + 1` points of the gap, uniform in the gap coordinate.
pub fn evans_scan(spec: &PotentialSpec, gap: &GapInterval, grid_n: usize) -> Result<Vec<ScanPoint>> {
    let pts = grid(spec, gap, grid_n.max(2))?;
    let samples = aligned_samples(spec, gap, &pts)?;
    Ok(samples
        .iter()
        .zip(&pts)
        .map(|(s, &(e, c))| ScanPoint {
            energy: e,
            coordinate: c,
            f: s.f(),
        })
        .collect())
}

fn refine_root(spec: &PotentialSpec, left: &Sample, right: &Sample, root_tol: f64) -> Result<Sample> {
    let (mut a, mut b) = (left.e, right.e);
    let fa = left.f();
    let mut best = *left;
    loop {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || b - a <= root_tol {
            break;
        }
        let mut s = Sample::at(spec, m, false)?;
        s.pair = s.pair.aligned_with(&left.pair);
        let fm = s.f();
        best = s;
        if fm == 0.0 {
            break;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(best)
}

/// Analytic `f_E = μ α₋ − α₊/μ − ⟨v₊, Θ v₊⟩/μ` at a root.
fn derivative_at(s: &Sample) -> Result<(f64, f64)> {
    let m_e = s.monodromy.energy_derivative();
    let (ap, am) = hf_coefficients(&s.monodromy.u, &m_e, &s.pair)?;
    let mu = dot(s.pair.v_minus, s.defect.u.apply(s.pair.v_plus));
    let theta = s.defect.phi.quad(s.pair.v_plus);
    Ok((mu * am - ap / mu - theta / mu, mu))
}

/// All sign-change roots of `f` inside `gap`.
pub fn evans_roots_in_gap(spec: &PotentialSpec, gap: &GapInterval, grid_n: usize, root_tol: f64) -> Result<Vec<EvansRoot>> {
    if !(root_tol > 0.0) {
        return Err(Error::NonPositiveTolerance(root_tol));
    }
    let mut n = grid_n.max(4);
    loop {
        let pts = grid(spec, gap, n)?;
        let samples = aligned_samples(spec, gap, &pts)?;
        let fs: Vec<f64> = samples.iter().map(Sample::f).collect();
        let cells: Vec<usize> = (0..n)
            .filter(|&i| {
                let (l, r) = (fs[i], fs[i + 1]);
                l != 0.0 && (r == 0.0 && i + 1 < n || l * r < 0.0)
            })
            .collect();
        let crowded = cells.windows(2).find(|w| w[1] - w[0] < 2);
        if let Some(w) = crowded {
            if n < grid_n.max(4) * MAX_REFINE {
                n *= 2;
                continue;
            }
            return Err(Error::GridTooCoarse(samples[w[0]].e, samples[w[1]].e));
        }
        return cells
            .par_iter()
            .map(|&i| {
                let s = refine_root(spec, &samples[i], &samples[i + 1], root_tol)?;
                let (f_e, mu) = derivative_at(&s)?;
                Ok(EvansRoot {
                    energy: s.e,
                    mu,
                    fe_sign: if f_e > 0.0 { 1 } else { -1 },
                    f_e,
                    f_value: s.f(),
                })
            })
            .collect();
    }
}

/// Analytic `f_E` at a root, checked against a central difference of `f`
/// with consistently oriented eigenvectors.
/// Analytic and finite-difference `f_E` at a root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub analytic: f64,
    pub numeric: f64,
    pub rel: f64,
}

/// Checks the analytic `f_E` against a Richardson-extrapolated central
/// difference; fails above `1e-5` relative.
pub fn evans_e_derivative_at_root(spec: &PotentialSpec, root: &EvansRoot, gap: &GapInterval) -> Result<DerivativeCheck> {
    let s = Sample::at(spec, root.energy, false)?;
    let (analytic, _) = derivative_at(&s)?;
    let room = (root.energy - gap.e_lo).min(gap.e_hi - root.energy);
    let h = (1e-4 * (1.0 + root.energy.abs())).min(0.02 * room);
    let side = |e: f64| -> Result<f64> {
        let mut t = Sample::at(spec, e, false)?;
        t.pair = t.pair.aligned_with(&s.pair);
        Ok(t.f())
    };
    let central = |h: f64| -> Result<f64> { Ok((side(root.energy + h)? - side(root.energy - h)?) / (2.0 * h)) };
    // Richardson step removes the O(h²) term, which matters near an edge
    let numeric = (4.0 * central(0.5 * h)? - central(h)?) / 3.0;
    let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs());
    if rel > 1e-5 {
        return Err(Error::DerivativeMismatch { analytic, numeric, rel });
    }
    Ok(DerivativeCheck { analytic, numeric, rel })
}

/// A zero of `x ↦ f(E, x)` at a band-edge energy, with `k_def(E, x)² − 4`
/// there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeXRoot {
    pub x: f64,
    pub defect_excess: f64,
}

/// Zeros of `x ↦ ⟨v, J N(E, x) v⟩` on `(0, 1]` at a band edge `E`, where
/// `v` is the common limit of `v±`.
pub fn edge_x_roots(spec: &PotentialSpec, e_edge: f64, n_x: usize) -> Result<Vec<EdgeXRoot>> {
    let v = edge_eigenvector(&monodromy_with_phi(spec, e_edge, DEFAULT_TOL).u);
    let f = |x: f64| -> Result<(f64, f64)> {
        let n = defect_transfer_with_theta(spec, e_edge, x, DEFAULT_TOL)?.u;
        Ok((skew_pairing(v, &n, v), n.trace()))
    };
    let xs: Vec<f64> = (0..=n_x).map(|i| i as f64 / n_x as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f(x).map(|p| p.0)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 1..n_x {
        if vals[i] * vals[i + 1] < 0.0 || vals[i + 1] == 0.0 {
            let (mut a, mut b) = (xs[i], xs[i + 1]);
            let fa = vals[i];
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if (f(m)?.0 > 0.0) == (fa > 0.0) {
                    a = m;
                } else {
                    b = m;
                }
            }
            let x = 0.5 * (a + b);
            out.push(EdgeXRoot {
                x,
                defect_excess: excess(f(x)?.1),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{gap, gaps};
    use crate::potential::{golden_mean, Piece};
    use std::f64::consts::PI;

    fn kp(qd: f64) -> PotentialSpec {
        PotentialSpec::kronig_penney(40.0, golden_mean(), qd).unwrap()
    }

    fn kp_example() -> PotentialSpec {
        kp(22.0 * PI * PI / (5f64.sqrt() * golden_mean()))
    }

    #[test]
    fn eigenpair_of_diagonal() {
        let p = gap_eigenpair(&Mat2::new(2.0, 0.0, 0.0, 0.5)).unwrap();
        assert_eq!(p.lambda_plus, 2.0);
        assert_eq!(p.lambda_minus, 0.5);
        assert_eq!(p.v_plus, [1.0, 0.0]);
        assert_eq!(p.v_minus, [0.0, 1.0]);
    }

    #[test]
    fn eigenpair_of_symmetric() {
        let m = Mat2::new(1.0, 1.0, 1.0, 2.0);
        let p = gap_eigenpair(&m).unwrap();
        let s5 = 5f64.sqrt();
        assert!((p.lambda_plus - (3.0 + s5) / 2.0).abs() < 1e-15);
        assert!((p.lambda_minus - (3.0 - s5) / 2.0).abs() < 1e-15);
        assert!(dot(p.v_plus, p.v_minus).abs() < 1e-15);
        assert!(p.residual(&m) < 1e-14);
        assert!(gap_eigenpair(&Mat2::new(1.0, 1.0, -1.0, 0.0)).is_err());
    }

    #[test]
    fn kp_gap_eigenpairs() {
        let spec = kp(0.0);
        for g in gaps(&spec, 300.0, 0.5, 1e-8).unwrap().iter().skip(1) {
            for i in 1..10 {
                let e = g.e_lo + g.width() * i as f64 / 10.0;
                let m = crate::propagator::monodromy_periodic(&spec, e);
                let p = gap_eigenpair(&m).unwrap();
                assert!(p.lambda_minus.abs() < 1.0 && p.lambda_plus.abs() > 1.0);
                assert!((p.lambda_plus * p.lambda_minus - 1.0).abs() < 1e-9);
                assert!(p.residual(&m) < 1e-8, "gap {} E = {e}", g.index);
            }
        }
    }

    #[test]
    fn hf_signs_and_rotation() {
        let spec = kp_example();
        let qmax = spec.defect_range().1;
        for g in gaps(&spec, 300.0, 0.5, 1e-8).unwrap().iter().skip(1) {
            for i in 1..8 {
                let e = g.e_lo + g.width() * i as f64 / 8.0;
                let t = monodromy_with_phi(&spec, e, 1e-12);
                let pair = gap_eigenpair(&t.u).unwrap();
                let (ap, am) = hf_coefficients(&t.u, &t.energy_derivative(), &pair).unwrap();
                assert!(ap > 0.0 && am < 0.0, "gap {} E = {e}", g.index);

                // dv/dE ≈ α J v
                let h = 1e-6 * g.width();
                let at = |x: f64| gap_eigenpair(&monodromy_with_phi(&spec, x, 1e-13).u).unwrap().aligned_with(&pair);
                let (p1, p0) = (at(e + h), at(e - h));
                let dv = [(p1.v_plus[0] - p0.v_plus[0]) / (2.0 * h), (p1.v_plus[1] - p0.v_plus[1]) / (2.0 * h)];
                let pred = j_apply(pair.v_plus);
                let err = (dv[0] - ap * pred[0]).hypot(dv[1] - ap * pred[1]);
                assert!(err < 1e-5 * (1.0 + ap.abs()), "rotation mismatch {err} vs α₊ = {ap}");

                // defect analogue with N(E, x) for E above the defect potential
                if e > qmax {
                    let d = defect_transfer_with_theta(&spec, e, 1.0, 1e-12).unwrap();
                    if let Ok(dp) = gap_eigenpair(&d.u) {
                        let (bp, bm) = hf_coefficients(&d.u, &d.energy_derivative(), &dp).unwrap();
                        assert!(bp > 0.0 && bm < 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn delta_signs_in_classically_allowed_region() {
        // x-derivative N_x = J H N gives the δ± rotation rates
        let spec = kp_example();
        let e = 70.0;
        for &x in &[0.2, 0.5, 0.9] {
            let n = defect_transfer_with_theta(&spec, e, x, 1e-12).unwrap().u;
            if let Ok(p) = gap_eigenpair(&n) {
                let w = e - spec.eval_defect(x).unwrap();
                let n_x = crate::mat2::J * Mat2::new(w, 0.0, 0.0, 1.0) * n;
                let (dp, dm) = hf_coefficients(&n, &n_x, &p).unwrap();
                assert!(dp > 0.0 && dm < 0.0);
            }
        }
    }

    #[test]
    fn generalized_evans_examples() {
        let spec = kp_example();
        let g = gap(&spec, 4, 0.5, 1e-8).unwrap().unwrap();
        let e = g.midpoint();
        let m = crate::propagator::monodromy_periodic(&spec, e);
        let p = gap_eigenpair(&m).unwrap();
        let f0 = generalized_evans(&spec, e, 0.0).unwrap();
        assert_eq!(f0, dot(p.v_minus, j_apply(p.v_plus)));
        assert!(f0.abs() > 0.0);
        assert_eq!(generalized_evans(&spec, e, 1.0).unwrap(), evans(&spec, e).unwrap());
        assert!(evans(&spec, g.e_hi + 1.0).is_err());
        assert!(generalized_evans(&spec, e, 1.5).is_err());
    }

    #[test]
    fn no_defect_means_no_roots() {
        // period 1, defect equal to one period of the lattice
        let periodic = vec![Piece::constant(0.0, 0.5, -10.0), Piece::constant(0.5, 1.0, 10.0)];
        let spec = PotentialSpec::new(1.0, periodic.clone(), periodic).unwrap();
        for g in gaps(&spec, 200.0, 0.5, 1e-8).unwrap() {
            assert!(evans_roots_in_gap(&spec, &g, 128, 1e-12).unwrap().is_empty(), "gap {}", g.index);
            if !g.is_semi_infinite() {
                let e = g.midpoint();
                let p = gap_eigenpair(&crate::propagator::monodromy_periodic(&spec, e)).unwrap();
                let f = evans(&spec, e).unwrap();
                assert!((f - p.lambda_plus * dot(p.v_minus, j_apply(p.v_plus))).abs() < 1e-9 * p.lambda_plus.abs());
            }
        }
    }

    #[test]
    fn free_problem_semi_infinite_gap() {
        let spec = PotentialSpec::free(1.0).unwrap();
        let g = &gaps(&spec, 10.0, 0.5, 1e-8).unwrap()[0];
        for e in [-5.0, -1.0, -0.01] {
            assert!(evans(&spec, e).unwrap().abs() > 0.0);
        }
        assert!(evans_roots_in_gap(&spec, g, 64, 1e-12).unwrap().is_empty());
    }

    #[test]
    fn kp_example_roots() {
        let spec = kp_example();
        let g4 = gap(&spec, 4, 0.5, 1e-8).unwrap().unwrap();
        let roots = evans_roots_in_gap(&spec, &g4, 256, 1e-12).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0].energy - 65.742).abs() < 1e-2);
        assert!((roots[1].energy - 71.737).abs() < 1e-2);
        for r in &roots {
            assert!(r.f_value.abs() < 1e-9);
            assert!(r.fe_sign as f64 * r.mu < 0.0);
            let fe = evans_e_derivative_at_root(&spec, r, &g4).unwrap().analytic;
            assert!(fe != 0.0);
        }
        let g12 = gap(&spec, 12, 0.5, 1e-8).unwrap().unwrap();
        let roots = evans_roots_in_gap(&spec, &g12, 256, 1e-12).unwrap();
        assert_eq!(roots.len(), 2);
        for r in &roots {
            evans_e_derivative_at_root(&spec, r, &g12).unwrap();
        }
    }

    #[test]
    fn branch_continuity_along_scan() {
        let spec = kp_example();
        let g = gap(&spec, 9, 0.5, 1e-8).unwrap().unwrap();
        let pts = grid(&spec, &g, 128).unwrap();
        let s = aligned_samples(&spec, &g, &pts).unwrap();
        for w in s.windows(2) {
            assert!(dot(w[0].pair.v_plus, w[1].pair.v_plus) > 0.0);
            assert!(dot(w[0].pair.v_minus, w[1].pair.v_minus) > 0.0);
        }
    }

    #[test]
    fn edge_roots_in_x_lie_in_defect_resolvent() {
        let spec = kp(0.0)
            .with_defect(vec![Piece::new(0.0, 1.0, vec![30.0, -20.0, 15.0])])
            .unwrap();
        for g in gaps(&spec, 250.0, 0.5, 1e-8).unwrap().iter().skip(1) {
            for e in [g.e_lo, g.e_hi] {
                for r in edge_x_roots(&spec, e, 400).unwrap() {
                    assert!(r.defect_excess >= -1e-6, "E = {e}, x = {}: {}", r.x, r.defect_excess);
                }
            }
        }
    }

    #[test]
    fn edge_limit_of_f_tilde_derivative_is_finite() {
        let spec = kp_example();
        let g = gap(&spec, 12, 0.5, 1e-8).unwrap().unwrap();
        let scan = evans_scan(&spec, &g, 512).unwrap();
        let d0 = (scan[1].f - scan[0].f) / (scan[1].coordinate - scan[0].coordinate);
        let d1 = (scan[2].f - scan[1].f) / (scan[2].coordinate - scan[1].coordinate);
        assert!(d0.is_finite() && d0 != 0.0);
        assert!((d0 - d1).abs() < 0.2 * d0.abs());
    }
}
