//! Floquet discriminant, band edges, gaps, the gap coordinate and the
//! defect resolvent set.
//!
//! Band edges are located through an integer *stage* that increases by one
//! at every edge: `G_0 → 0, B_0 → 1, G_1 → 2, B_1 → 3, …`. The stage is
//! computed from the number of interior zeros of the Dirichlet solution
//! together with the sign of the discriminant, so it is exact at every
//! sample and bisection between any two samples finds every edge between
//! them, including double points.

use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::potential::{PotentialSpec, Segment};
use crate::propagator::{count_zeros, defect_transfer, monodromy_periodic, propagate, DEFAULT_TOL};
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};
use std::f64::consts::PI;
use std::sync::OnceLock;

pub const DEFAULT_EDGE_TOL: f64 = 1e-8;
pub const DEFAULT_QUAD_TOL: f64 = 1e-9;
pub const DEFAULT_SCAN_STEP: f64 = 0.5;

/// Floquet discriminant `k(E) = tr M(E)`.
pub fn discriminant(spec: &PotentialSpec, e: f64) -> f64 {
    monodromy_periodic(spec, e).trace()
}

/// `k_def(E, x) = tr N(E, x)`.
pub fn defect_discriminant(spec: &PotentialSpec, e: f64, x: f64) -> Result<f64> {
    defect_transfer(spec, e, x).map(|n| n.trace())
}

/// `k² − 4` evaluated as `(k − 2)(k + 2)`.
pub fn excess(k: f64) -> f64 {
    (k - 2.0) * (k + 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Periodic,
    Antiperiodic,
}

impl EdgeKind {
    /// `E_j` is periodic for `j ≡ 0, 3 (mod 4)`.
    pub fn of_index(j: usize) -> EdgeKind {
        match j % 4 {
            0 | 3 => EdgeKind::Periodic,
            _ => EdgeKind::Antiperiodic,
        }
    }

    /// Discriminant value at an edge of this kind.
    pub fn trace(self) -> f64 {
        match self {
            EdgeKind::Periodic => 2.0,
            EdgeKind::Antiperiodic => -2.0,
        }
    }
}

/// Where an energy sits in the periodic spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum SpectralPosition {
    /// Inside the closed band `B_n = [E_{2n}, E_{2n+1}]`.
    Band(usize),
    /// Inside the open gap `G_n`.
    Gap(usize),
}

impl SpectralPosition {
    fn from_stage(s: usize) -> Self {
        if s % 2 == 0 {
            SpectralPosition::Gap(s / 2)
        } else {
            SpectralPosition::Band(s / 2)
        }
    }

    pub fn stage(self) -> usize {
        match self {
            SpectralPosition::Gap(n) => 2 * n,
            SpectralPosition::Band(n) => 2 * n + 1,
        }
    }
}

/// Stage of `E` for the periodic problem with one period given by `segs`.
fn stage(segs: &[Segment], period: f64, e: f64, tol: f64) -> Result<usize> {
    let m = propagate(segs, e, 0.0, period, tol)?;
    let (mut nd, end) = count_zeros(segs, e, 0.0, period, [0.0, 1.0], tol)?;
    if end[0] == 0.0 && nd > 0 {
        nd -= 1;
    }
    let k = m.trace();
    if k.abs() <= 2.0 {
        return Ok(2 * nd + 1);
    }
    let odd = usize::from(k < 0.0);
    let n = if nd % 2 == odd { nd } else { nd + 1 };
    Ok(2 * n)
}

pub fn classify(spec: &PotentialSpec, e: f64) -> Result<SpectralPosition> {
    stage(&spec.periodic_segments(), spec.period(), e, DEFAULT_TOL).map(SpectralPosition::from_stage)
}

/// A located band edge `E_j`, bracketed by `[below, above]` with the gap
/// side reported as `energy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandEdge {
    pub index: usize,
    pub energy: f64,
    pub kind: EdgeKind,
    pub below: f64,
    pub above: f64,
}

/// Smallest index `j` with `stage(E) > j` switching inside `[lo, hi]`.
fn bisect_edge(segs: &[Segment], period: f64, j: usize, mut lo: f64, mut hi: f64, tol: f64) -> Result<BandEdge> {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if stage(segs, period, mid, tol)? > j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    // odd j closes a band and opens a gap; even j closes a gap
    let energy = if j % 2 == 1 { hi } else { lo };
    Ok(BandEdge {
        index: j,
        energy,
        kind: EdgeKind::of_index(j),
        below: lo,
        above: hi,
    })
}

struct Scan {
    start_stage: usize,
    edges: Vec<BandEdge>,
}

const CHUNK: usize = 256;

/// Finds all edges in `[e_start, e_stop]`, stopping early once the stage
/// exceeds `stage_stop`.
fn scan_edges(
    segs: &[Segment],
    period: f64,
    q_min: f64,
    e_start: f64,
    e_stop: f64,
    stage_stop: Option<usize>,
    scan_step: f64,
    tol: f64,
) -> Result<Scan> {
    if !(scan_step > 0.0) {
        return Err(Error::NonPositiveTolerance(scan_step));
    }
    let step_at = |e: f64| scan_step.min(PI * (e - q_min).max(1.0).sqrt() / (4.0 * period));
    let mut prev_e = e_start;
    let mut prev_s = stage(segs, period, e_start, tol)?;
    let start_stage = prev_s;
    let mut edges = Vec::new();
    while prev_e < e_stop {
        let mut es = Vec::with_capacity(CHUNK);
        let mut e = prev_e;
        while es.len() < CHUNK && e < e_stop {
            e = (e + step_at(e)).min(e_stop);
            es.push(e);
        }
        let stages: Vec<usize> = es
            .par_iter()
            .map(|&e| stage(segs, period, e, tol))
            .collect::<Result<_>>()?;
        let mut jobs = Vec::new();
        for (&e, &s) in es.iter().zip(&stages) {
            if s < prev_s {
                return Err(Error::ScanExhausted(format!(
                    "stage decreased from {prev_s} to {s} between {prev_e} and {e}"
                )));
            }
            for j in prev_s..s {
                jobs.push((j, prev_e, e));
            }
            prev_e = e;
            prev_s = s;
        }
        let found: Vec<BandEdge> = jobs
            .par_iter()
            .map(|&(j, lo, hi)| bisect_edge(segs, period, j, lo, hi, tol))
            .collect::<Result<_>>()?;
        edges.extend(found);
        if stage_stop.is_some_and(|stop| prev_s > stop) {
            break;
        }
    }
    Ok(Scan { start_stage, edges })
}

fn periodic_scan_start(spec: &PotentialSpec) -> f64 {
    spec.periodic_range().0 - 1.0
}

/// Band edges `E_0 ≤ E_1 ≤ …` not exceeding `e_max`. Empty gaps appear as
/// coincident pairs.
pub fn band_edges(spec: &PotentialSpec, e_max: f64, scan_step: f64, edge_tol: f64) -> Result<Vec<BandEdge>> {
    if !(edge_tol > 0.0) {
        return Err(Error::NonPositiveTolerance(edge_tol));
    }
    let start = periodic_scan_start(spec);
    if e_max <= start {
        return Err(Error::ScanExhausted(format!(
            "E_max = {e_max} lies below the spectrum (scan starts at {start})"
        )));
    }
    let scan = scan_edges(
        &spec.periodic_segments(),
        spec.period(),
        spec.periodic_range().0,
        start,
        e_max,
        None,
        scan_step,
        DEFAULT_TOL,
    )?;
    debug_assert_eq!(scan.start_stage, 0);
    if scan.edges.is_empty() {
        return Err(Error::ScanExhausted(format!("no band edge below E_max = {e_max}")));
    }
    Ok(scan.edges)
}

/// Band edges up to and including `E_{2 j_max}`, however far that is.
pub fn band_edges_through_gap(spec: &PotentialSpec, j_max: usize, scan_step: f64) -> Result<Vec<BandEdge>> {
    let start = periodic_scan_start(spec);
    let scan = scan_edges(
        &spec.periodic_segments(),
        spec.period(),
        spec.periodic_range().0,
        start,
        f64::MAX,
        Some(2 * j_max),
        scan_step,
        DEFAULT_TOL,
    )?;
    Ok(scan.edges.into_iter().filter(|e| e.index <= 2 * j_max).collect())
}

/// One spectral gap `G_j = (E_{2j−1}, E_{2j})`, or `(−∞, E_0)` for `j = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapInterval {
    pub index: usize,
    #[serde(serialize_with = "finite_or_null")]
    pub e_lo: f64,
    pub e_hi: f64,
    pub lo_kind: Option<EdgeKind>,
    pub hi_kind: EdgeKind,
    pub omega: Option<f64>,
}

fn finite_or_null<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_none()
    }
}

impl GapInterval {
    pub fn is_semi_infinite(&self) -> bool {
        self.index == 0
    }

    pub fn width(&self) -> f64 {
        self.e_hi - self.e_lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.e_lo + self.e_hi)
    }

    pub fn contains(&self, e: f64) -> bool {
        e > self.e_lo && e < self.e_hi
    }
}

fn pair_gaps(edges: &[BandEdge], edge_tol: f64) -> Vec<GapInterval> {
    let mut out = Vec::new();
    if let Some(e0) = edges.iter().find(|e| e.index == 0) {
        out.push(GapInterval {
            index: 0,
            e_lo: f64::NEG_INFINITY,
            e_hi: e0.energy,
            lo_kind: None,
            hi_kind: EdgeKind::Periodic,
            omega: None,
        });
    }
    for lo in edges.iter().filter(|e| e.index % 2 == 1) {
        if let Some(hi) = edges.iter().find(|e| e.index == lo.index + 1) {
            if hi.energy - lo.energy > 2.0 * edge_tol {
                out.push(GapInterval {
                    index: (lo.index + 1) / 2,
                    e_lo: lo.energy,
                    e_hi: hi.energy,
                    lo_kind: Some(lo.kind),
                    hi_kind: hi.kind,
                    omega: None,
                });
            }
        }
    }
    out
}

/// Open gaps below `e_max`, starting with the semi-infinite gap.
pub fn gaps(spec: &PotentialSpec, e_max: f64, scan_step: f64, edge_tol: f64) -> Result<Vec<GapInterval>> {
    Ok(pair_gaps(&band_edges(spec, e_max, scan_step, edge_tol)?, edge_tol))
}

/// Gaps with index `≤ j_max`; empty ones omitted.
pub fn gaps_through(spec: &PotentialSpec, j_max: usize, scan_step: f64, edge_tol: f64) -> Result<Vec<GapInterval>> {
    Ok(pair_gaps(&band_edges_through_gap(spec, j_max, scan_step)?, edge_tol))
}

/// The gap `G_j`, or `None` when it is empty.
pub fn gap(spec: &PotentialSpec, j: usize, scan_step: f64, edge_tol: f64) -> Result<Option<GapInterval>> {
    Ok(gaps_through(spec, j, scan_step, edge_tol)?.into_iter().find(|g| g.index == j))
}

fn gauss_legendre() -> &'static (Vec<f64>, Vec<f64>) {
    static GL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    GL.get_or_init(|| {
        let n = 12;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        (x, w)
    })
}

fn gl(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<f64> {
    let (x, w) = gauss_legendre();
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        s += wi * f(c + h * xi)?;
    }
    Ok(s * h)
}

/// Adaptive panels on `[a, b]` as `(breakpoints, cumulative integrals)`.
///
/// A panel is accepted once its error estimate is below `tol` relative to
/// its own share of the total, with a floor of `tol · 1e-3` of the total so
/// rounding noise in the integrand right at an edge cannot stall refinement.
fn panels(f: &impl Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let total = gl(f, a, b)?.abs().max(1e-300);
    let mut stack = vec![(a, b, gl(f, a, b)?, 0u32)];
    let mut leaves = Vec::new();
    while let Some((l, r, whole, depth)) = stack.pop() {
        let m = 0.5 * (l + r);
        let (left, right) = (gl(f, l, m)?, gl(f, m, r)?);
        let allowed = tol * total * ((r - l) / (b - a)).max(1e-3);
        if (left + right - whole).abs() <= allowed {
            leaves.push((l, m, left));
            leaves.push((m, r, right));
        } else if depth >= 60 {
            return Err(Error::Quadrature(format!("no convergence on [{l}, {r}]")));
        } else {
            stack.push((m, r, right, depth + 1));
            stack.push((l, m, left, depth + 1));
        }
    }
    leaves.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut t = vec![a];
    let mut cum = vec![0.0];
    for (_, r, v) in leaves {
        t.push(r);
        cum.push(cum.last().unwrap() + v);
    }
    Ok((t, cum))
}

/// Gap coordinate `Ẽ(E) = ∫_{E_lo}^E dE / √(k² − 4)` on one finite gap.
///
/// Each half of the gap is parametrised from its nearer edge by
/// `E = E_edge ± t²`, which turns the square-root endpoint singularity into
/// a smooth integrand in `t`.
pub struct GapCoordinate<K> {
    k: K,
    e_lo: f64,
    e_hi: f64,
    lo: (Vec<f64>, Vec<f64>),
    hi: (Vec<f64>, Vec<f64>),
}

impl<K: Fn(f64) -> f64> GapCoordinate<K> {
    pub fn from_discriminant(k: K, e_lo: f64, e_hi: f64, quad_tol: f64) -> Result<Self> {
        if !(quad_tol > 0.0) {
            return Err(Error::NonPositiveTolerance(quad_tol));
        }
        if !(e_lo.is_finite() && e_hi > e_lo) {
            return Err(Error::OutOfRange {
                name: "gap",
                value: e_lo,
                range: "finite gap required".into(),
            });
        }
        let tmax = (0.5 * (e_hi - e_lo)).sqrt();
        let lo = panels(&|t| integrand(&k, e_lo + t * t, t), 0.0, tmax, quad_tol)?;
        let hi = panels(&|t| integrand(&k, e_hi - t * t, t), 0.0, tmax, quad_tol)?;
        Ok(GapCoordinate { k, e_lo, e_hi, lo, hi })
    }

    /// `ω_j`, the coordinate length of the gap.
    pub fn omega(&self) -> f64 {
        self.lo.1.last().unwrap() + self.hi.1.last().unwrap()
    }

    fn partial(&self, lower: bool, t: f64) -> Result<f64> {
        let (ts, cum) = if lower { &self.lo } else { &self.hi };
        let i = ts.partition_point(|&b| b <= t).saturating_sub(1).min(ts.len() - 2);
        let edge = if lower { self.e_lo } else { self.e_hi };
        let sign = if lower { 1.0 } else { -1.0 };
        Ok(cum[i] + gl(&|s| integrand(&self.k, edge + sign * s * s, s), ts[i], t)?)
    }

    pub fn at(&self, e: f64) -> Result<f64> {
        if !(e >= self.e_lo && e <= self.e_hi) {
            return Err(Error::NotInGap {
                energy: e,
                excess: excess((self.k)(e)),
            });
        }
        let mid = 0.5 * (self.e_lo + self.e_hi);
        if e <= mid {
            self.partial(true, (e - self.e_lo).sqrt())
        } else {
            Ok(self.omega() - self.partial(false, (self.e_hi - e).sqrt())?)
        }
    }

    /// Inverse map `Ẽ ↦ E`.
    pub fn inverse(&self, x: f64) -> Result<f64> {
        let omega = self.omega();
        if !(0.0..=omega).contains(&x) {
            return Err(Error::OutOfRange {
                name: "gap coordinate",
                value: x,
                range: format!("[0, {omega}]"),
            });
        }
        let lo_total = *self.lo.1.last().unwrap();
        let (lower, target) = if x <= lo_total { (true, x) } else { (false, omega - x) };
        let (ts, cum) = if lower { &self.lo } else { &self.hi };
        let i = cum.partition_point(|&c| c <= target).saturating_sub(1).min(ts.len() - 2);
        let (mut a, mut b) = (ts[i], ts[i + 1]);
        let edge = if lower { self.e_lo } else { self.e_hi };
        let sign = if lower { 1.0 } else { -1.0 };
        let mut t = a + (b - a) * ((target - cum[i]) / (cum[i + 1] - cum[i])).clamp(0.0, 1.0);
        for _ in 0..100 {
            let r = self.partial(lower, t)? - target;
            if r > 0.0 {
                b = t;
            } else {
                a = t;
            }
            let g = integrand(&self.k, edge + sign * t * t, t)?;
            let newton = t - r / g;
            let next = if g > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - t).abs() <= 1e-15 * (1.0 + t) {
                t = next;
                break;
            }
            t = next;
        }
        Ok(edge + sign * t * t)
    }

    /// `n + 1` points uniform in `Ẽ` from `E_lo` to `E_hi`, as `(E, Ẽ)`.
    pub fn uniform_grid(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        let omega = self.omega();
        (0..=n)
            .map(|i| {
                let x = omega * i as f64 / n as f64;
                let e = match i {
                    0 => self.e_lo,
                    _ if i == n => self.e_hi,
                    _ => self.inverse(x)?,
                };
                Ok((e, x))
            })
            .collect()
    }
}

fn integrand(k: &impl Fn(f64) -> f64, e: f64, t: f64) -> Result<f64> {
    let d = excess(k(e));
    if d <= 0.0 {
        return Err(Error::NotInGap { energy: e, excess: d });
    }
    Ok(2.0 * t / d.sqrt())
}

/// Gap coordinate for a finite gap of `spec`.
pub fn gap_coordinate_map<'a>(
    spec: &'a PotentialSpec,
    gap: &GapInterval,
    quad_tol: f64,
) -> Result<GapCoordinate<impl Fn(f64) -> f64 + 'a>> {
    if gap.is_semi_infinite() {
        return Err(Error::OutOfRange {
            name: "gap index",
            value: 0.0,
            range: "finite gaps only".into(),
        });
    }
    GapCoordinate::from_discriminant(move |e| discriminant(spec, e), gap.e_lo, gap.e_hi, quad_tol)
}

/// `Ẽ(E)` on a finite gap.
pub fn gap_coordinate(spec: &PotentialSpec, gap: &GapInterval, e: f64, quad_tol: f64) -> Result<f64> {
    gap_coordinate_map(spec, gap, quad_tol)?.at(e)
}

/// Closed intervals (possibly single points) where `tr N(E, 1)² ≥ 4`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdefComponents {
    pub components: Vec<[f64; 2]>,
}

impl RdefComponents {
    /// Components meeting the open interval `(lo, hi)`.
    pub fn meeting_open(&self, lo: f64, hi: f64) -> impl Iterator<Item = &[f64; 2]> {
        self.components.iter().filter(move |c| c[1] > lo && c[0] < hi)
    }

    /// Whether `e` is within `tol` of some component.
    pub fn touches(&self, e: f64, tol: f64) -> bool {
        self.components.iter().any(|c| e >= c[0] - tol && e <= c[1] + tol)
    }
}

/// Components of `R_def ∩ [e_lo, e_hi]`.
///
/// `tr N(E, 1)` is the discriminant of the unit-period operator built by
/// repeating the defect, so `R_def` is the closure of that operator's gaps
/// and the same stage machinery applies. Empty gaps give point components.
pub fn rdef_components(spec: &PotentialSpec, e_lo: f64, e_hi: f64, scan_step: f64, edge_tol: f64) -> Result<RdefComponents> {
    if !(e_lo < e_hi) {
        return Err(Error::OutOfRange {
            name: "e_hi",
            value: e_hi,
            range: format!("({e_lo}, ∞)"),
        });
    }
    if !(edge_tol > 0.0) {
        return Err(Error::NonPositiveTolerance(edge_tol));
    }
    let segs = spec.defect_segments();
    let scan = scan_edges(&segs, 1.0, spec.defect_range().0, e_lo, e_hi, None, scan_step, DEFAULT_TOL)?;
    let mut components = Vec::new();
    // current component start when the scan begins inside a gap
    let mut open = (scan.start_stage % 2 == 0).then_some(e_lo);
    for edge in &scan.edges {
        if edge.index % 2 == 0 {
            // gap → band
            let start = open.take().unwrap_or(edge.below);
            components.push([start, edge.above.max(start)]);
        } else {
            open = Some(edge.below);
        }
    }
    if let Some(start) = open {
        components.push([start, e_hi]);
    }
    // merge empty-gap pairs into points and keep order
    let mut merged: Vec<[f64; 2]> = Vec::new();
    for c in components {
        match merged.last_mut() {
            Some(last) if c[0] <= last[1] + edge_tol => last[1] = last[1].max(c[1]),
            _ => merged.push(c),
        }
    }
    for c in &mut merged {
        if c[1] - c[0] <= 2.0 * edge_tol {
            let m = 0.5 * (c[0] + c[1]);
            *c = [m, m];
        }
    }
    Ok(RdefComponents { components: merged })
}

/// Defect transfer matrix `N(E, 1)` and its discriminant.
pub fn defect_monodromy(spec: &PotentialSpec, e: f64) -> Mat2 {
    defect_transfer(spec, e, 1.0).expect("x = 1 is in range")
}
