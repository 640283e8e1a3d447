//! Fundamental solutions of `(u, p)' = J H (u, p)` with `H = diag(E − q, 1)`.
//!
//! Constant pieces are propagated in closed form. Polynomial pieces use an
//! adaptive Dormand–Prince 5(4) pair on the augmented state `(U, Φ)`.

use crate::error::{Error, Result};
use crate::mat2::{Mat2, Sym2};
use crate::potential::{PotentialSpec, Segment};

pub const DEFAULT_TOL: f64 = 1e-10;

/// `H(E, x) = diag(E − q(x), 1)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HamiltonianAt {
    pub energy: f64,
    pub q: f64,
}

impl HamiltonianAt {
    pub fn new(energy: f64, q: f64) -> Self {
        HamiltonianAt { energy, q }
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(self.energy - self.q, 0.0, 0.0, 1.0)
    }

    /// `E > q`, equivalently `H` positive definite.
    pub fn classically_allowed(&self) -> bool {
        self.energy > self.q
    }

    pub fn is_positive_definite(&self) -> bool {
        self.classically_allowed()
    }
}

/// Transfer matrix over an interval together with
/// `Φ = ∫ Uᵗ diag(1, 0) U`, so that `∂_E U = U J Φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer {
    pub u: Mat2,
    pub phi: Sym2,
}

impl Transfer {
    pub const IDENTITY: Transfer = Transfer {
        u: Mat2::IDENTITY,
        phi: Sym2::ZERO,
    };

    /// `self` followed by `next`.
    pub fn then(&self, next: &Transfer) -> Transfer {
        Transfer {
            u: next.u * self.u,
            phi: self.phi + next.phi.congruence(&self.u),
        }
    }

    /// `∂_E U = U J Φ`.
    pub fn energy_derivative(&self) -> Mat2 {
        self.u * crate::mat2::J * self.phi.to_mat()
    }
}

/// `cos`-like and `sin/√w`-like solutions of `y'' = −w y` at `x = L`.
fn cs(w: f64, l: f64) -> (f64, f64) {
    let z = w * l * l;
    if z.abs() < 1e-4 {
        let c = 1.0 - z / 2.0 * (1.0 - z / 12.0 * (1.0 - z / 30.0));
        let s = l * (1.0 - z / 6.0 * (1.0 - z / 20.0 * (1.0 - z / 42.0)));
        (c, s)
    } else if w > 0.0 {
        let om = w.sqrt();
        let (sn, cn) = (om * l).sin_cos();
        (cn, sn / om)
    } else {
        let k = (-w).sqrt();
        ((k * l).cosh(), (k * l).sinh() / k)
    }
}

/// `∫_0^L s(y)² dy`.
fn int_s2(w: f64, l: f64, c: f64, s: f64) -> f64 {
    let z = w * l * l;
    if z.abs() < 1.0 {
        // Σ (−1)^{k+1} 2^{2k−1} z^{k−1} L³ / ((2k)! (2k+1)) with the k = 1 term L³/3
        let mut term = l * l * l / 3.0;
        let mut sum = term;
        for k in 1..40 {
            let k = k as f64;
            // ratio between consecutive coefficients
            term *= -4.0 * z * (2.0 * k + 1.0) / ((2.0 * k + 1.0) * (2.0 * k + 2.0) * (2.0 * k + 3.0));
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        (l - c * s) / (2.0 * w)
    }
}

/// Closed-form transfer across a constant piece of length `l` with `w = E − q`.
pub fn constant_piece(w: f64, l: f64) -> Transfer {
    let (c, s) = cs(w, l);
    Transfer {
        u: Mat2::new(c, s, -w * s, c),
        phi: Sym2::new(0.5 * (l + c * s), 0.5 * s * s, int_s2(w, l, c, s)),
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MAX_STEPS: usize = 2_000_000;

/// Adaptive DP45 from `x0` to `x1`. `on_step` sees each accepted state.
fn dp45<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    x0: f64,
    x1: f64,
    mut y: [f64; N],
    tol: f64,
    hmax: f64,
    mut on_step: impl FnMut(&[f64; N], &[f64; N]),
) -> Result<[f64; N]> {
    let mut x = x0;
    let mut h = hmax.min(x1 - x0);
    let mut k = [[0.0; N]; 7];
    let mut steps = 0;
    while x < x1 {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::Quadrature(format!("step limit reached at x = {x}")));
        }
        let last = x + h >= x1;
        if last {
            h = x1 - x;
        }
        k[0] = f(x, &y);
        for s in 1..7 {
            let mut ys = y;
            for (i, yi) in ys.iter_mut().enumerate() {
                *yi += h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            k[s] = f(x + C[s] * h, &ys);
        }
        let mut y5 = y;
        let mut err: f64 = 0.0;
        for i in 0..N {
            let d5: f64 = (0..7).map(|s| B5[s] * k[s][i]).sum();
            let d4: f64 = (0..7).map(|s| B4[s] * k[s][i]).sum();
            y5[i] += h * d5;
            let scale = tol * (1.0 + y[i].abs().max(y5[i].abs()));
            err = err.max((h * (d5 - d4)).abs() / scale);
        }
        if !err.is_finite() {
            return Err(Error::Quadrature("non-finite state".into()));
        }
        if err <= 1.0 {
            on_step(&y, &y5);
            x = if last { x1 } else { x + h };
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * factor).min(hmax);
        if h < 1e-14 * (1.0 + x.abs()) {
            return Err(Error::Quadrature(format!("step size underflow at x = {x}")));
        }
    }
    Ok(y)
}

/// Step cap that keeps each step under a quarter oscillation.
fn step_cap(seg: &Segment, e: f64) -> f64 {
    let (lo, _) = seg.poly.range_on(seg.x0 - seg.offset, seg.x1 - seg.offset);
    let w = (e - lo).abs().max(1.0);
    (0.25 * std::f64::consts::PI / w.sqrt()).min(seg.len())
}

fn polynomial_piece(seg: &Segment, e: f64, tol: f64) -> Result<Transfer> {
    let rhs = |x: f64, y: &[f64; 7]| {
        let w = e - seg.eval(x);
        [y[2], y[3], -w * y[0], -w * y[1], y[0] * y[0], y[0] * y[1], y[1] * y[1]]
    };
    let y0 = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let y = dp45(rhs, seg.x0, seg.x1, y0, tol, step_cap(seg, e), |_, _| {})?;
    let u = Mat2::new(y[0], y[1], y[2], y[3]).symplectic_correct();
    Ok(Transfer {
        u,
        phi: Sym2::new(y[4], y[5], y[6]),
    })
}

fn segment_transfer(seg: &Segment, e: f64, tol: f64) -> Result<Transfer> {
    match seg.constant_value() {
        Some(q) => Ok(constant_piece(e - q, seg.len())),
        None => polynomial_piece(seg, e, tol),
    }
}

fn check_inputs(pieces: &[Segment], x0: f64, x1: f64, tol: f64) -> Result<Vec<Segment>> {
    if !(tol > 0.0) {
        return Err(Error::NonPositiveTolerance(tol));
    }
    if !(x1 >= x0) {
        return Err(Error::OutOfRange {
            name: "x1",
            value: x1,
            range: format!("[{x0}, ∞)"),
        });
    }
    let mut segs: Vec<Segment> = pieces.iter().filter_map(|s| s.clipped(x0, x1)).collect();
    segs.sort_by(|a, b| a.x0.total_cmp(&b.x0));
    if x1 == x0 {
        return Ok(Vec::new());
    }
    let slack = 1e-12 * (1.0 + x0.abs().max(x1.abs()));
    let mut at = x0;
    for s in &segs {
        if s.x0 > at + slack {
            return Err(Error::NotCovering { x0, x1 });
        }
        at = at.max(s.x1);
    }
    if segs.is_empty() || at < x1 - slack {
        return Err(Error::NotCovering { x0, x1 });
    }
    // drop overlap so each point is traversed once
    let mut out: Vec<Segment> = Vec::with_capacity(segs.len());
    let mut at = x0;
    for mut s in segs {
        if s.x1 <= at {
            continue;
        }
        s.x0 = at;
        at = s.x1;
        out.push(s);
    }
    Ok(out)
}

/// Transfer matrix and `Φ` from `x0` to `x1`.
pub fn propagate_with_phi(pieces: &[Segment], e: f64, x0: f64, x1: f64, tol: f64) -> Result<Transfer> {
    let segs = check_inputs(pieces, x0, x1, tol)?;
    let mut t = Transfer::IDENTITY;
    for s in &segs {
        t = t.then(&segment_transfer(s, e, tol)?);
    }
    Ok(t)
}

/// Fundamental matrix `U(x1)` with `U(x0) = I`.
pub fn propagate(pieces: &[Segment], e: f64, x0: f64, x1: f64, tol: f64) -> Result<Mat2> {
    propagate_with_phi(pieces, e, x0, x1, tol).map(|t| t.u)
}

/// Number of zeros of `u` in `(x0, x1]` for the solution starting from
/// `init = (u, p)` at `x0`, and the (rescaled) final state.
pub fn count_zeros(
    pieces: &[Segment],
    e: f64,
    x0: f64,
    x1: f64,
    init: [f64; 2],
    tol: f64,
) -> Result<(usize, [f64; 2])> {
    let segs = check_inputs(pieces, x0, x1, tol)?;
    let mut v = init;
    let mut zeros = 0;
    for s in &segs {
        let (n, next) = match s.constant_value() {
            Some(q) => constant_zeros(e - q, s.len(), v),
            None => polynomial_zeros(s, e, tol, v)?,
        };
        zeros += n;
        let norm = next[0].hypot(next[1]);
        v = if norm > 0.0 { [next[0] / norm, next[1] / norm] } else { next };
    }
    Ok((zeros, v))
}

fn constant_zeros(w: f64, l: f64, v: [f64; 2]) -> (usize, [f64; 2]) {
    let (c, s) = cs(w, l);
    let next = [c * v[0] + s * v[1], -w * s * v[0] + c * v[1]];
    let pi = std::f64::consts::PI;
    if w * l * l > 1e-4 {
        let om = w.sqrt();
        // u = R sin(ω x + θ)
        let theta = v[0].atan2(v[1] / om);
        let n = ((theta + om * l) / pi).floor() - (theta / pi).floor();
        (n.max(0.0) as usize, next)
    } else {
        // at most one zero
        let n = usize::from(v[0] != 0.0 && v[0] * next[0] <= 0.0);
        (n, next)
    }
}

fn polynomial_zeros(seg: &Segment, e: f64, tol: f64, v: [f64; 2]) -> Result<(usize, [f64; 2])> {
    let rhs = |x: f64, y: &[f64; 2]| [y[1], -(e - seg.eval(x)) * y[0]];
    let mut zeros = 0;
    let y = dp45(rhs, seg.x0, seg.x1, v, tol, step_cap(seg, e), |a, b| {
        if a[0] != 0.0 && a[0] * b[0] <= 0.0 {
            zeros += 1;
        }
    })?;
    Ok((zeros, y))
}

/// Monodromy `M(E) = U(E, a)` of the periodic part.
pub fn monodromy_periodic(spec: &PotentialSpec, e: f64) -> Mat2 {
    monodromy_with_phi(spec, e, DEFAULT_TOL).u
}

/// Monodromy together with `Φ(E)`.
pub fn monodromy_with_phi(spec: &PotentialSpec, e: f64, tol: f64) -> Transfer {
    propagate_with_phi(&spec.periodic_segments(), e, 0.0, spec.period(), tol)
        .expect("validated spec covers one period")
}

/// `Φ(E) = ∫_0^a Uᵗ diag(1, 0) U`.
pub fn phi_matrix(spec: &PotentialSpec, e: f64, tol: f64) -> Result<Sym2> {
    propagate_with_phi(&spec.periodic_segments(), e, 0.0, spec.period(), tol).map(|t| t.phi)
}

fn check_defect_x(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            name: "x",
            value: x,
            range: "[0, 1]".into(),
        });
    }
    Ok(())
}

/// Defect transfer `N(E, x)` and `Θ(E, x)`.
pub fn defect_transfer_with_theta(spec: &PotentialSpec, e: f64, x: f64, tol: f64) -> Result<Transfer> {
    check_defect_x(x)?;
    if x == 0.0 {
        return Ok(Transfer::IDENTITY);
    }
    propagate_with_phi(&spec.defect_segments(), e, 0.0, x, tol)
}

/// `N(E, x)`; the identity at `x = 0`.
pub fn defect_transfer(spec: &PotentialSpec, e: f64, x: f64) -> Result<Mat2> {
    defect_transfer_with_theta(spec, e, x, DEFAULT_TOL).map(|t| t.u)
}

/// `Θ(E, x) = ∫_0^x Nᵗ diag(1, 0) N`.
pub fn theta_matrix(spec: &PotentialSpec, e: f64, x: f64, tol: f64) -> Result<Sym2> {
    defect_transfer_with_theta(spec, e, x, tol).map(|t| t.phi)
}

/// Kronig–Penney monodromy written out as the product of the two well and
/// barrier factors, each over half a period.
pub fn kp_closed_form(amplitude: f64, a: f64, e: f64) -> Mat2 {
    let factor = |w: f64| -> Mat2 {
        let l = 0.5 * a;
        if w == 0.0 {
            Mat2::new(1.0, l, 0.0, 1.0)
        } else if w > 0.0 {
            let r = w.sqrt();
            let (sn, cn) = (r * l).sin_cos();
            Mat2::new(cn, sn / r, -r * sn, cn)
        } else {
            let r = (-w).sqrt();
            let (sh, ch) = ((r * l).sinh(), (r * l).cosh());
            Mat2::new(ch, sh / r, r * sh, ch)
        }
    };
    factor(e - amplitude) * factor(e + amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{golden_mean, Piece};
    use std::f64::consts::PI;

    fn close(a: &Mat2, b: &Mat2, tol: f64) -> bool {
        (*a - *b).max_abs() < tol
    }

    #[test]
    fn free_half_turn() {
        let segs = vec![Segment::constant(0.0, 1.0, 0.0)];
        let m = propagate(&segs, PI * PI, 0.0, 1.0, 1e-10).unwrap();
        assert!(close(&m, &Mat2::new(-1.0, 0.0, 0.0, -1.0), 1e-14));
    }

    #[test]
    fn shear_at_turning_energy() {
        let segs = vec![Segment::constant(0.0, 2.5, 3.0)];
        let m = propagate(&segs, 3.0, 0.0, 2.5, 1e-10).unwrap();
        assert_eq!(m, Mat2::new(1.0, 2.5, 0.0, 1.0));
        let near = propagate(&segs, 3.0 + 1e-9, 0.0, 2.5, 1e-10).unwrap();
        assert!(close(&near, &m, 1e-8));
    }

    /// Classical RK4 with fixed step, combined by Richardson extrapolation.
    fn rk4_oracle(q: impl Fn(f64) -> f64, e: f64, x1: f64, n: usize) -> Mat2 {
        let run = |n: usize| {
            let h = x1 / n as f64;
            let f = |x: f64, y: [f64; 4]| {
                let w = e - q(x);
                [y[2], y[3], -w * y[0], -w * y[1]]
            };
            let mut y = [1.0, 0.0, 0.0, 1.0];
            for i in 0..n {
                let x = i as f64 * h;
                let add = |y: [f64; 4], k: [f64; 4], s: f64| {
                    [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2], y[3] + s * k[3]]
                };
                let k1 = f(x, y);
                let k2 = f(x + h / 2.0, add(y, k1, h / 2.0));
                let k3 = f(x + h / 2.0, add(y, k2, h / 2.0));
                let k4 = f(x + h, add(y, k3, h));
                for j in 0..4 {
                    y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
                }
            }
            Mat2::new(y[0], y[1], y[2], y[3])
        };
        let coarse = run(n);
        let fine = run(2 * n);
        fine + (fine - coarse).scale(1.0 / 15.0)
    }

    #[test]
    fn linear_potential_matches_rk4() {
        let segs = vec![Segment {
            x0: 0.0,
            x1: 1.0,
            offset: 0.0,
            poly: crate::potential::Polynomial::new(vec![0.0, 1.0]),
        }];
        let m = propagate(&segs, 2.0, 0.0, 1.0, 1e-12).unwrap();
        assert!((m.det() - 1.0).abs() < 1e-11);
        let oracle = rk4_oracle(|x| x, 2.0, 1.0, 400);
        assert!(close(&m, &oracle, 1e-9), "{m:?} vs {oracle:?}");
    }

    #[test]
    fn kp_product_matches_generic_propagation() {
        let phi = golden_mean();
        let spec = PotentialSpec::kronig_penney(40.0, phi, 0.0).unwrap();
        for &e in &[0.0, -35.0, 40.0, -40.0, 12.5, 300.0] {
            let a = kp_closed_form(40.0, phi, e);
            let b = monodromy_periodic(&spec, e);
            assert!((a.trace() - b.trace()).abs() < 1e-10, "E = {e}");
            assert!(close(&a, &b, 1e-9 * (1.0 + a.max_abs())));
        }
        let free = kp_closed_form(0.0, 2.0, 3.0);
        assert!((free.trace() - 2.0 * (2.0 * 3f64.sqrt()).cos()).abs() < 1e-14);
    }

    #[test]
    fn free_discriminant() {
        let spec = PotentialSpec::free(PI).unwrap();
        assert!((monodromy_periodic(&spec, 1.0).trace() + 2.0).abs() < 1e-14);
        let spec = PotentialSpec::free(1.7).unwrap();
        for i in 1..50 {
            let e = 0.37 * i as f64;
            let k = monodromy_periodic(&spec, e).trace();
            assert!((k - 2.0 * (1.7 * e.sqrt()).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn defect_transfer_examples() {
        let spec = PotentialSpec::kronig_penney(40.0, golden_mean(), 5.0).unwrap();
        assert_eq!(defect_transfer(&spec, 7.0, 0.0).unwrap(), Mat2::IDENTITY);
        let n = defect_transfer(&spec, 7.0, 1.0).unwrap();
        assert!((n.trace() - 2.0 * 2f64.sqrt().cos()).abs() < 1e-14);
        let n = defect_transfer(&spec, 1.0, 1.0).unwrap();
        assert!((n.trace() - 2.0 * 2f64.cosh()).abs() < 1e-13);
        assert!(defect_transfer(&spec, 1.0, 1.2).is_err());
        assert_eq!(theta_matrix(&spec, 1.0, 0.0, 1e-10).unwrap(), Sym2::ZERO);
    }

    #[test]
    fn phi_small_period_limit() {
        let spec = PotentialSpec::new(
            1e-4,
            vec![Piece::constant(0.0, 1e-4, 3.0)],
            vec![Piece::constant(0.0, 1.0, 0.0)],
        )
        .unwrap();
        let p = phi_matrix(&spec, 10.0, 1e-10).unwrap();
        assert!((p.xx - 1e-4).abs() < 1e-11);
        assert!(p.xy.abs() < 1e-8 && p.yy.abs() < 1e-11);
    }

    fn central_difference(f: impl Fn(f64) -> Mat2, e: f64, h: f64) -> Mat2 {
        (f(e + h) - f(e - h)).scale(0.5 / h)
    }

    #[test]
    fn phi_matches_central_difference() {
        let spec = PotentialSpec::new(
            1.3,
            vec![
                Piece::constant(0.0, 0.4, -5.0),
                Piece::new(0.4, 1.3, vec![1.0, 2.0, -1.5]),
            ],
            vec![Piece::new(0.0, 1.0, vec![2.0, 0.0, 3.0])],
        )
        .unwrap();
        for &e in &[-8.0, -1.0, 2.0, 17.0, 60.0] {
            let t = monodromy_with_phi(&spec, e, 1e-12);
            let fd = central_difference(|x| propagate(&spec.periodic_segments(), x, 0.0, 1.3, 1e-13).unwrap(), e, 1e-4);
            let an = t.energy_derivative();
            assert!(close(&an, &fd, 1e-6 * (1.0 + an.max_abs())), "E = {e}: {an:?} vs {fd:?}");
            let (lo, _) = t.phi.eigenvalues();
            assert!(lo > 0.0);

            let d = defect_transfer_with_theta(&spec, e, 0.7, 1e-12).unwrap();
            let fd = central_difference(|x| defect_transfer_with_theta(&spec, x, 0.7, 1e-13).unwrap().u, e, 1e-4);
            assert!(close(&d.energy_derivative(), &fd, 1e-6 * (1.0 + fd.max_abs())));
        }
    }

    #[test]
    fn small_w_series_is_continuous() {
        for &l in &[0.3, 1.0, 2.0] {
            for &w in &[1e-3, -1e-3, 0.5 / (l * l), -0.5 / (l * l)] {
                let z = w * l * l;
                let below = constant_piece(w * (1.0 - 1e-9), l);
                let above = constant_piece(w * (1.0 + 1e-9), l);
                assert!((below.phi.yy - above.phi.yy).abs() < 1e-8 * l * l * l, "z = {z}");
                // compare against direct formula where it is well conditioned
                let (c, s) = cs(w, l);
                if z.abs() > 0.1 {
                    let direct = (l - c * s) / (2.0 * w);
                    assert!((int_s2(w, l, c, s) - direct).abs() < 1e-12 * l.powi(3));
                }
            }
        }
    }

    #[test]
    fn zero_counting_constant_and_polynomial() {
        // free: u = sin(√E x)/√E has floor(√E L / π) zeros in (0, L]
        let segs = vec![Segment::constant(0.0, 3.0, 0.0)];
        let (n, _) = count_zeros(&segs, 20.0, 0.0, 3.0, [0.0, 1.0], 1e-10).unwrap();
        assert_eq!(n, (20f64.sqrt() * 3.0 / PI).floor() as usize);
        // same potential expressed as a degree-1 polynomial with zero slope term split
        let poly = vec![Segment {
            x0: 0.0,
            x1: 3.0,
            offset: 0.0,
            poly: crate::potential::Polynomial { coeffs: vec![0.0, 0.0] },
        }];
        let (m, _) = count_zeros(&poly, 20.0, 0.0, 3.0, [0.0, 1.0], 1e-10).unwrap();
        assert_eq!(m, n);
        let (n, _) = count_zeros(&segs, -4.0, 0.0, 3.0, [1.0, -5.0], 1e-10).unwrap();
        assert_eq!(n, 1);
    }

    #[test]
    fn rejects_bad_input() {
        let segs = vec![Segment::constant(0.0, 1.0, 0.0)];
        assert!(propagate(&segs, 1.0, 0.0, 1.0, 0.0).is_err());
        assert!(propagate(&segs, 1.0, 0.0, 2.0, 1e-10).is_err());
        let holes = vec![Segment::constant(0.0, 0.4, 0.0), Segment::constant(0.5, 1.0, 0.0)];
        assert!(propagate(&holes, 1.0, 0.0, 1.0, 1e-10).is_err());
    }

    #[test]
    fn composition() {
        let spec = PotentialSpec::kronig_penney(40.0, golden_mean(), 5.0).unwrap();
        let segs = spec.full_segments(-4.0, 6.0);
        for &e in &[-20.0, 3.0, 70.0] {
            let whole = propagate(&segs, e, -4.0, 6.0, 1e-10).unwrap();
            let a = propagate(&segs, e, -4.0, 0.3, 1e-10).unwrap();
            let b = propagate(&segs, e, 0.3, 6.0, 1e-10).unwrap();
            assert!(close(&(b * a), &whole, 1e-9 * whole.max_abs().max(1.0)));
        }
    }
}
