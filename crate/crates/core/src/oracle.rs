//! Brute-force checks: a finite-volume Dirichlet box for the full
//! dislocation operator, counted exactly with Sturm sequences, and shooting
//! for Dirichlet spectra on an interval.
//!
//! The box is `[−n_L a, 1 + n_R a]` on a piecewise-uniform grid (spacing
//! `a/n_per` in the lattice, `1/n_def` on the defect). The discrete operator
//! is the symmetric pencil `A u = E W u` with
//!
//! ```text
//! A_ii = 1/h₋ + 1/h₊ + ∫_{cell i} q,   A_{i,i+1} = −1/h₊,   W_ii = (h₋ + h₊)/2
//! ```
//!
//! where cell `i` is the dual cell `[x_i − h₋/2, x_i + h₊/2]`. Counting is done
//! inside the *discrete* operator's own gap, so the discretization shifts the
//! gap and the eigenvalues together.
//!
//! A Dirichlet end placed at a period boundary carries a surface state at
//! each cell Dirichlet eigenvalue that falls inside the gap (it is an exact
//! Floquet solution vanishing at every period boundary, and decays away from
//! exactly one of the two ends). Those are counted with the one-cell problem
//! and subtracted.

use crate::error::{Error, Result};
use crate::evans::gap_eigenpair;
use crate::floquet::{EdgeKind, GapInterval};
use crate::potential::{PotentialSpec, Segment};
use crate::propagator::{count_zeros, monodromy_periodic, DEFAULT_TOL};
use rayon::prelude::*;
use serde::Serialize;

/// Grid and extent of one Dirichlet box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoxDiscretization {
    pub periods_left: usize,
    pub periods_right: usize,
    /// Grid cells per lattice period.
    pub n_per: usize,
    /// Grid cells across the defect.
    pub n_def: usize,
}

impl BoxDiscretization {
    pub fn l_left(&self, spec: &PotentialSpec) -> f64 {
        self.periods_left as f64 * spec.period()
    }

    pub fn l_right(&self, spec: &PotentialSpec) -> f64 {
        self.periods_right as f64 * spec.period()
    }

    /// Number of interior unknowns.
    pub fn n_grid(&self) -> usize {
        (self.periods_left + self.periods_right) * self.n_per + self.n_def - 1
    }

    /// Largest grid spacing.
    pub fn h(&self, spec: &PotentialSpec) -> f64 {
        (spec.period() / self.n_per as f64).max(1.0 / self.n_def as f64)
    }

    pub fn validate(&self, spec: &PotentialSpec) -> Result<()> {
        let min_piece = spec
            .periodic_pieces()
            .iter()
            .chain(spec.defect_pieces())
            .map(|p| p.to - p.from)
            .fold(f64::INFINITY, f64::min);
        if self.periods_left == 0 || self.periods_right == 0 || self.n_per < 2 || self.n_def < 2 {
            return Err(Error::OutOfRange {
                name: "box",
                value: 0.0,
                range: "at least one period per side and two cells per region".into(),
            });
        }
        if self.n_grid() < 1000 {
            return Err(Error::OutOfRange {
                name: "n_grid",
                value: self.n_grid() as f64,
                range: "[1000, ∞)".into(),
            });
        }
        let h = self.h(spec);
        if h >= min_piece / 8.0 {
            return Err(Error::OutOfRange {
                name: "h",
                value: h,
                range: format!("(0, {})", min_piece / 8.0),
            });
        }
        Ok(())
    }
}

/// One node of the pencil: `(A_ii, W_ii, A_{i,i+1})`.
#[derive(Debug, Clone, Copy)]
struct Node {
    diag: f64,
    weight: f64,
    off: f64,
}

/// Node data, stored once per period and replayed.
struct Pencil {
    lattice: Vec<Node>,
    left_junction: Node,
    defect: Vec<Node>,
    right_junction: Node,
    periods_left: usize,
    periods_right: usize,
}

fn node(spec: &PotentialSpec, x: f64, h_minus: f64, h_plus: f64) -> Node {
    Node {
        diag: 1.0 / h_minus + 1.0 / h_plus + spec.integrate_full(x - 0.5 * h_minus, x + 0.5 * h_plus),
        weight: 0.5 * (h_minus + h_plus),
        off: -1.0 / h_plus,
    }
}

impl Pencil {
    fn new(spec: &PotentialSpec, b: &BoxDiscretization) -> Pencil {
        let a = spec.period();
        let hp = a / b.n_per as f64;
        let hd = 1.0 / b.n_def as f64;
        // lattice nodes sit at cell coordinate j·hp; evaluate them in the
        // left lattice one period below the defect
        let lattice = (0..b.n_per).map(|j| node(spec, -2.0 * a + j as f64 * hp, hp, hp)).collect();
        let defect = (1..b.n_def).map(|j| node(spec, j as f64 * hd, hd, hd)).collect();
        Pencil {
            lattice,
            left_junction: node(spec, 0.0, hp, hd),
            defect,
            right_junction: node(spec, 1.0, hd, hp),
            periods_left: b.periods_left,
            periods_right: b.periods_right,
        }
    }

    /// Number of eigenvalues `< e`.
    fn count_below(&self, e: f64) -> usize {
        let mut sturm = Sturm::new(e);
        let n = self.lattice.len();
        for i in 1..self.periods_left * n {
            sturm.push(&self.lattice[i % n]);
        }
        sturm.push(&self.left_junction);
        for nd in &self.defect {
            sturm.push(nd);
        }
        sturm.push(&self.right_junction);
        for i in 1..self.periods_right * n {
            sturm.push(&self.lattice[i % n]);
        }
        sturm.negatives
    }

    /// Eigenvalues `< e` of one lattice period with Dirichlet ends.
    fn cell_count_below(&self, e: f64) -> usize {
        let mut sturm = Sturm::new(e);
        for nd in &self.lattice[1..] {
            sturm.push(nd);
        }
        sturm.negatives
    }

    /// Discrete monodromy trace over one period.
    fn discrete_trace(&self, e: f64) -> f64 {
        // u_{i+1} = ((A_ii − E W_ii) u_i − A_{i,i−1} u_{i−1}) / (−A_{i,i+1})
        let n = self.lattice.len();
        let mut col1 = [1.0, 0.0]; // (u_i, u_{i−1}) starting from (1, 0)
        let mut col2 = [0.0, 1.0];
        for i in 0..n {
            let nd = &self.lattice[i];
            let prev_off = self.lattice[(i + n - 1) % n].off;
            let step = |v: [f64; 2]| [((nd.diag - e * nd.weight) * v[0] + prev_off * v[1]) / (-nd.off), v[0]];
            col1 = step(col1);
            col2 = step(col2);
        }
        col1[0] + col2[1]
    }
}

/// Inertia count of `A − E W` by the LDLᵗ recurrence.
struct Sturm {
    e: f64,
    d: f64,
    prev_off: f64,
    negatives: usize,
}

impl Sturm {
    fn new(e: f64) -> Self {
        Sturm {
            e,
            d: 1.0,
            prev_off: 0.0,
            negatives: 0,
        }
    }

    #[inline]
    fn push(&mut self, n: &Node) {
        let mut d = n.diag - self.e * n.weight - self.prev_off * self.prev_off / self.d;
        if d == 0.0 {
            d = -f64::EPSILON * (n.diag.abs() + self.e.abs() * n.weight);
        }
        if d < 0.0 {
            self.negatives += 1;
        }
        self.d = d;
        self.prev_off = n.off;
    }
}

/// Number of box eigenvalues below `e`.
pub fn box_count_below(spec: &PotentialSpec, b: &BoxDiscretization, e: f64) -> Result<usize> {
    b.validate(spec)?;
    Ok(Pencil::new(spec, b).count_below(e))
}

/// Box eigenvalues below `e_max`, each bisected to full precision.
pub fn box_eigenvalues(spec: &PotentialSpec, b: &BoxDiscretization, e_max: f64) -> Result<Vec<f64>> {
    b.validate(spec)?;
    let p = Pencil::new(spec, b);
    let lo = spec.periodic_range().0.min(spec.defect_range().0) - 1.0;
    let n = p.count_below(e_max);
    Ok((0..n)
        .into_par_iter()
        .map(|k| {
            // smallest E with count_below(E) > k
            let (mut a, mut c) = (lo, e_max);
            loop {
                let m = 0.5 * (a + c);
                if m <= a || m >= c {
                    break c;
                }
                if p.count_below(m) > k {
                    c = m;
                } else {
                    a = m;
                }
            }
        })
        .collect())
}

/// Tunables for the automatic oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleParams {
    /// Target for `h² E^{3/2} (1 + a) / 24`, the phase error of the
    /// three-point stencil across the defect and one period.
    pub phase_tol: f64,
    /// Required decay of a bound state across each half of the box.
    pub decay: f64,
    pub min_periods: usize,
    pub max_periods: usize,
    /// Window shrink, relative to `1 + |E|`.
    pub margin_rel: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            phase_tol: 2e-5,
            decay: 0.01,
            min_periods: 12,
            max_periods: 40_000,
            margin_rel: 1e-10,
        }
    }
}

/// Result of a two-box oracle count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCount {
    pub count: usize,
    pub boxes: [BoxDiscretization; 2],
    /// Eigenvalues in the window for each box, before subtraction.
    pub raw: [usize; 2],
    /// Surface states removed (cell Dirichlet eigenvalues in the window).
    pub surface: usize,
    /// Discrete counting window.
    pub window: (f64, f64),
}

/// Discrete gap edges near the continuum gap.
fn discrete_window(p: &Pencil, spec: &PotentialSpec, gap: &GapInterval, margin_rel: f64) -> Result<(f64, f64)> {
    let in_gap = |e: f64, kind: EdgeKind| {
        let k = p.discrete_trace(e);
        k.abs() > 2.0 && (k > 0.0) == (kind.trace() > 0.0)
    };
    let mid = if gap.is_semi_infinite() {
        gap.e_hi - 1.0
    } else {
        gap.midpoint()
    };
    // walk outwards from an interior point until the discrete band is hit,
    // then bisect
    let edge = |target: f64, kind: EdgeKind, dir: f64| -> Result<f64> {
        if !in_gap(mid, kind) {
            return Err(Error::OracleIndeterminate(format!(
                "grid too coarse: discrete gap {} does not contain {mid}",
                gap.index
            )));
        }
        let mut step = 1e-3 * (target - mid).abs().max(1e-3);
        let mut out = target;
        let mut inside = mid;
        while in_gap(out, kind) {
            inside = out;
            out = target + dir * step;
            step *= 2.0;
            if step > 1e6 {
                return Err(Error::OracleIndeterminate("discrete gap edge not found".into()));
            }
        }
        let (mut a, mut b) = (inside, out);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m == a || m == b {
                break;
            }
            if in_gap(m, kind) {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(a)
    };
    let hi = edge(gap.e_hi, gap.hi_kind, 1.0)?;
    let lo = match gap.lo_kind {
        Some(kind) => edge(gap.e_lo, kind, -1.0)?,
        None => crate::evans::semi_infinite_cutoff(spec, gap),
    };
    let (lo, hi) = (lo + margin_rel * (1.0 + lo.abs()), hi - margin_rel * (1.0 + hi.abs()));
    if !(lo < hi) {
        return Err(Error::OracleIndeterminate(format!("empty discrete window for gap {}", gap.index)));
    }
    Ok((lo, hi))
}

/// Count of defect eigenvalues in `gap` from two boxes sharing one lattice
/// grid. Disagreement after surface-state removal is an error.
pub fn gap_count_oracle(spec: &PotentialSpec, gap: &GapInterval, boxes: [BoxDiscretization; 2], margin_rel: f64) -> Result<OracleCount> {
    if boxes[0].n_per != boxes[1].n_per {
        return Err(Error::OracleIndeterminate("boxes must share the lattice grid".into()));
    }
    let diff = boxes[0].periods_left.abs_diff(boxes[1].periods_left) + boxes[0].periods_right.abs_diff(boxes[1].periods_right);
    if diff < 2 {
        return Err(Error::OracleIndeterminate("box sizes must differ by at least two periods".into()));
    }
    for b in &boxes {
        b.validate(spec)?;
    }
    let pencils = [Pencil::new(spec, &boxes[0]), Pencil::new(spec, &boxes[1])];
    let window = discrete_window(&pencils[0], spec, gap, margin_rel)?;
    let surface = pencils[0].cell_count_below(window.1) - pencils[0].cell_count_below(window.0);
    let raw: Vec<usize> = pencils
        .par_iter()
        .map(|p| p.count_below(window.1) - p.count_below(window.0))
        .collect();
    let counts: Vec<i64> = raw.iter().map(|&r| r as i64 - surface as i64).collect();
    if counts[0] != counts[1] || counts[0] < 0 {
        return Err(Error::OracleIndeterminate(format!(
            "gap {}: boxes give {} and {} after removing {surface} surface states",
            gap.index, counts[0], counts[1]
        )));
    }
    Ok(OracleCount {
        count: counts[0] as usize,
        boxes,
        raw: [raw[0], raw[1]],
        surface,
        window,
    })
}

/// Periods needed for `|λ₋|ⁿ ≤ decay` close to either edge of the gap.
fn periods_for_decay(spec: &PotentialSpec, gap: &GapInterval, params: &OracleParams) -> usize {
    let probe = 1e-4 * if gap.is_semi_infinite() { 1.0 } else { gap.width() };
    let mut energies = vec![gap.e_hi - probe];
    if !gap.is_semi_infinite() {
        energies.push(gap.e_lo + probe);
    }
    let mut n = params.min_periods;
    for e in energies {
        if let Ok(p) = gap_eigenpair(&monodromy_periodic(spec, e)) {
            let need = (params.decay.ln() / p.lambda_minus.abs().ln()).ceil();
            if need.is_finite() {
                n = n.max(need as usize);
            }
        }
    }
    n.min(params.max_periods)
}

/// Grid from the phase-error target.
pub fn auto_grid(spec: &PotentialSpec, gap: &GapInterval, params: &OracleParams) -> (usize, usize) {
    let a = spec.period();
    let q_min = spec.periodic_range().0.min(spec.defect_range().0);
    let e_ref = (gap.e_hi - q_min).max(1.0);
    let mut h = (params.phase_tol * 24.0 / (e_ref.powf(1.5) * (1.0 + a))).sqrt();
    let min_piece = spec
        .periodic_pieces()
        .iter()
        .chain(spec.defect_pieces())
        .map(|p| p.to - p.from)
        .fold(f64::INFINITY, f64::min);
    h = h.min(min_piece / 9.0).min(0.02);
    let n_per = 2 * ((a / h / 2.0).ceil() as usize).max(1);
    let n_def = ((1.0 / h).ceil() as usize).max(2);
    (n_per, n_def)
}

/// Oracle count with boxes and grid chosen from the gap's decay rate and
/// the phase-error target; boxes are enlarged once if they disagree.
pub fn gap_count_oracle_auto(spec: &PotentialSpec, gap: &GapInterval, params: &OracleParams) -> Result<OracleCount> {
    let (n_per, n_def) = auto_grid(spec, gap, params);
    let mut n = periods_for_decay(spec, gap, params);
    loop {
        let extra = (n / 5).max(2);
        let boxes = [
            BoxDiscretization {
                periods_left: n,
                periods_right: n,
                n_per,
                n_def,
            },
            BoxDiscretization {
                periods_left: n + extra,
                periods_right: n + extra,
                n_per,
                n_def,
            },
        ];
        match gap_count_oracle(spec, gap, boxes, params.margin_rel) {
            Err(Error::OracleIndeterminate(_)) if 2 * n <= params.max_periods => n *= 2,
            other => return other,
        }
    }
}

/// First `n_max` Dirichlet eigenvalues of `−u'' + q u` on `[0, L]`,
/// located by bisection on the number of zeros of the shooting solution.
pub fn dirichlet_spectrum(pieces: &[Segment], l: f64, n_max: usize) -> Result<Vec<f64>> {
    let count = |e: f64| -> Result<usize> {
        // zeros in (0, L]; a zero exactly at L belongs to the eigenvalue at e
        Ok(count_zeros(pieces, e, 0.0, l, [0.0, 1.0], DEFAULT_TOL)?.0)
    };
    let q_min = pieces
        .iter()
        .map(|s| s.poly.range_on(s.x0 - s.offset, s.x1 - s.offset).0)
        .fold(f64::INFINITY, f64::min);
    let lo = q_min - 1.0;
    if count(lo)? != 0 {
        return Err(Error::Bracket(format!("solution oscillates below min q at E = {lo}")));
    }
    let mut hi = lo + 1.0;
    while count(hi)? < n_max {
        hi = lo + 2.0 * (hi - lo);
        if hi > 1e12 {
            return Err(Error::Bracket("upper bracket for Dirichlet eigenvalues not found".into()));
        }
    }
    (1..=n_max)
        .into_par_iter()
        .map(|n| {
            // smallest E with at least n zeros in (0, L]
            let (mut a, mut b) = (lo, hi);
            loop {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break Ok(b);
                }
                if count(m)? >= n {
                    b = m;
                } else {
                    a = m;
                }
            }
        })
        .collect()
}
