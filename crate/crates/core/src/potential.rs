//! Piecewise-polynomial periodic and defect potentials, glued into the
//! full-line dislocation potential
//!
//! ```text
//! q(x) = q_per(x)      x <= 0
//!        q_def(x)      0 < x < 1
//!        q_per(x - 1)  x >= 1
//! ```

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Polynomial `c0 + c1 x + c2 x² + …` in increasing degree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial { coeffs: vec![c] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() == 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Exact `∫_{x0}^{x1} p(x) dx`.
    pub fn integral(&self, x0: f64, x1: f64) -> f64 {
        let anti = |x: f64| {
            self.coeffs
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, &c)| acc * x + c / (k as f64 + 1.0))
                * x
        };
        anti(x1) - anti(x0)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.is_constant() {
            return Polynomial::constant(0.0);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Minimum and maximum on `[lo, hi]`. Exact up to degree 2; higher
    /// degrees are sampled and then polished by golden-section search.
    pub fn range_on(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut min = self.eval(lo).min(self.eval(hi));
        let mut max = self.eval(lo).max(self.eval(hi));
        match self.degree() {
            0 | 1 => {}
            2 => {
                let v = -self.coeffs[1] / (2.0 * self.coeffs[2]);
                if v > lo && v < hi {
                    let y = self.eval(v);
                    min = min.min(y);
                    max = max.max(y);
                }
            }
            _ => {
                let n = 256;
                let h = (hi - lo) / n as f64;
                let ys: Vec<f64> = (0..=n).map(|i| self.eval(lo + h * i as f64)).collect();
                for i in 1..n {
                    let (a, b, c) = (ys[i - 1], ys[i], ys[i + 1]);
                    let x0 = lo + h * (i - 1) as f64;
                    if b >= a && b >= c {
                        max = max.max(-golden(|x| -self.eval(x), x0, x0 + 2.0 * h).1);
                    }
                    if b <= a && b <= c {
                        min = min.min(golden(|x| self.eval(x), x0, x0 + 2.0 * h).1);
                    }
                }
            }
        }
        (min, max)
    }
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..80 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// One piece `[from, to)` of a piecewise potential. The polynomial is in the
/// cell coordinate (`x ∈ [0, a)` for the periodic part, `x ∈ [0, 1)` for the
/// defect), not relative to `from`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub from: f64,
    pub to: f64,
    pub coeffs: Vec<f64>,
}

impl Piece {
    pub fn new(from: f64, to: f64, coeffs: Vec<f64>) -> Self {
        Piece { from, to, coeffs }
    }

    pub fn constant(from: f64, to: f64, value: f64) -> Self {
        Piece::new(from, to, vec![value])
    }

    pub fn poly(&self) -> Polynomial {
        Polynomial::new(self.coeffs.clone())
    }
}

/// A piece placed on the real line: `q(x) = poly(x - offset)` on `[x0, x1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub x0: f64,
    pub x1: f64,
    pub offset: f64,
    pub poly: Polynomial,
}

impl Segment {
    pub fn constant(x0: f64, x1: f64, value: f64) -> Self {
        Segment {
            x0,
            x1,
            offset: 0.0,
            poly: Polynomial::constant(value),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.poly.eval(x - self.offset)
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.poly.is_constant().then(|| self.poly.coeffs[0])
    }

    pub fn len(&self) -> f64 {
        self.x1 - self.x0
    }

    /// Restrict to `[lo, hi] ∩ [x0, x1]`.
    pub fn clipped(&self, lo: f64, hi: f64) -> Option<Segment> {
        let a = self.x0.max(lo);
        let b = self.x1.min(hi);
        (b > a).then(|| Segment {
            x0: a,
            x1: b,
            ..self.clone()
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    period: f64,
    periodic: Vec<Piece>,
    defect: Vec<Piece>,
}

/// Periodic potential of period `a` plus a defect potential on `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialSpec {
    period: f64,
    periodic: Vec<Piece>,
    defect: Vec<Piece>,
}

const COVER_TOL: f64 = 1e-12;

fn validate_pieces(pieces: &[Piece], length: f64, what: &str) -> Result<()> {
    if pieces.is_empty() {
        return Err(Error::InvalidPotential(format!("{what}: no pieces")));
    }
    let tol = COVER_TOL * length.max(1.0);
    if pieces[0].from.abs() > tol {
        return Err(Error::InvalidPotential(format!(
            "{what}: first piece starts at {} instead of 0",
            pieces[0].from
        )));
    }
    for (i, p) in pieces.iter().enumerate() {
        if !(p.from.is_finite() && p.to.is_finite()) || p.to <= p.from {
            return Err(Error::InvalidPotential(format!(
                "{what}: piece {i} has empty or invalid interval [{}, {})",
                p.from, p.to
            )));
        }
        if p.coeffs.is_empty() || p.coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential(format!(
                "{what}: piece {i} needs finite coefficients"
            )));
        }
        if i > 0 && (p.from - pieces[i - 1].to).abs() > tol {
            return Err(Error::InvalidPotential(format!(
                "{what}: gap or overlap between pieces {} and {i}",
                i - 1
            )));
        }
    }
    let end = pieces.last().unwrap().to;
    if (end - length).abs() > tol {
        return Err(Error::InvalidPotential(format!(
            "{what}: pieces end at {end} instead of {length}"
        )));
    }
    Ok(())
}

fn locate(pieces: &[Piece], y: f64) -> &Piece {
    pieces
        .iter()
        .find(|p| y >= p.from && y < p.to)
        .unwrap_or_else(|| pieces.last().unwrap())
}

impl PotentialSpec {
    pub fn new(period: f64, periodic: Vec<Piece>, defect: Vec<Piece>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidPotential(format!(
                "period must be positive, got {period}"
            )));
        }
        validate_pieces(&periodic, period, "periodic")?;
        validate_pieces(&defect, 1.0, "defect")?;
        Ok(PotentialSpec {
            period,
            periodic,
            defect,
        })
    }

    /// Zero periodic and zero defect potential.
    pub fn free(period: f64) -> Result<Self> {
        Self::new(
            period,
            vec![Piece::constant(0.0, period, 0.0)],
            vec![Piece::constant(0.0, 1.0, 0.0)],
        )
    }

    /// Two-step Kronig–Penney cell: `-A` on `[0, a/2)`, `+A` on `[a/2, a)`,
    /// with a constant defect.
    pub fn kronig_penney(amplitude: f64, period: f64, defect_value: f64) -> Result<Self> {
        Self::new(
            period,
            vec![
                Piece::constant(0.0, 0.5 * period, -amplitude),
                Piece::constant(0.5 * period, period, amplitude),
            ],
            vec![Piece::constant(0.0, 1.0, defect_value)],
        )
    }

    /// Same periodic part, defect replaced by the given pieces.
    pub fn with_defect(&self, defect: Vec<Piece>) -> Result<Self> {
        Self::new(self.period, self.periodic.clone(), defect)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawSpec = serde_json::from_str(s)?;
        Self::new(raw.period, raw.periodic, raw.defect)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidPotential(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serialises")
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn periodic_pieces(&self) -> &[Piece] {
        &self.periodic
    }

    pub fn defect_pieces(&self) -> &[Piece] {
        &self.defect
    }

    /// `x - a·floor(x/a)`, mapped into `[0, a)`.
    pub fn reduce(&self, x: f64) -> f64 {
        let a = self.period;
        let y = x - a * (x / a).floor();
        if y >= a || y < 0.0 {
            0.0
        } else {
            y
        }
    }

    pub fn eval_periodic(&self, x: f64) -> f64 {
        let y = self.reduce(x);
        locate(&self.periodic, y).poly().eval(y)
    }

    pub fn eval_defect(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfRange {
                name: "x",
                value: x,
                range: "[0, 1]".into(),
            });
        }
        Ok(locate(&self.defect, x).poly().eval(x))
    }

    pub fn eval_full(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.eval_periodic(x)
        } else if x < 1.0 {
            locate(&self.defect, x).poly().eval(x)
        } else {
            self.eval_periodic(x - 1.0)
        }
    }

    /// `∫_0^a q_per / a`.
    pub fn periodic_mean(&self) -> f64 {
        self.periodic
            .iter()
            .map(|p| p.poly().integral(p.from, p.to))
            .sum::<f64>()
            / self.period
    }

    /// `∫_0^1 q_def`.
    pub fn defect_mean(&self) -> f64 {
        self.defect
            .iter()
            .map(|p| p.poly().integral(p.from, p.to))
            .sum()
    }

    /// Mean energy difference `Δq = ∫_0^1 q_def − (1/a) ∫_0^a q_per`.
    pub fn mean_difference(&self) -> f64 {
        self.defect_mean() - self.periodic_mean()
    }

    pub fn defect_is_constant(&self) -> bool {
        let first = self.defect[0].poly();
        first.is_constant() && self.defect.iter().all(|p| p.poly() == first)
    }

    pub fn defect_range(&self) -> (f64, f64) {
        range_of(&self.defect)
    }

    pub fn periodic_range(&self) -> (f64, f64) {
        range_of(&self.periodic)
    }

    /// `max |q|` over both parts.
    pub fn max_abs(&self) -> f64 {
        let (a, b) = self.periodic_range();
        let (c, d) = self.defect_range();
        a.abs().max(b.abs()).max(c.abs()).max(d.abs())
    }

    /// One period of `q_per` as segments on `[0, a]`.
    pub fn periodic_segments(&self) -> Vec<Segment> {
        self.periodic
            .iter()
            .map(|p| Segment {
                x0: p.from,
                x1: p.to,
                offset: 0.0,
                poly: p.poly(),
            })
            .collect()
    }

    /// The defect as segments on `[0, 1]`.
    pub fn defect_segments(&self) -> Vec<Segment> {
        self.defect
            .iter()
            .map(|p| Segment {
                x0: p.from,
                x1: p.to,
                offset: 0.0,
                poly: p.poly(),
            })
            .collect()
    }

    /// Periodic segments tiling `[x0, x1]` for an arbitrary window, with the
    /// cell origin at `origin` (so `q(x) = q_per(x - origin)`).
    pub fn periodic_segments_on(&self, origin: f64, x0: f64, x1: f64) -> Vec<Segment> {
        let a = self.period;
        let first = ((x0 - origin) / a).floor() as i64;
        let last = ((x1 - origin) / a).ceil() as i64;
        let mut out = Vec::new();
        for cell in first..last {
            let base = origin + a * cell as f64;
            for p in &self.periodic {
                let seg = Segment {
                    x0: base + p.from,
                    x1: base + p.to,
                    offset: base,
                    poly: p.poly(),
                };
                if let Some(s) = seg.clipped(x0, x1) {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Segments of the full-line potential covering `[x0, x1]`.
    pub fn full_segments(&self, x0: f64, x1: f64) -> Vec<Segment> {
        let mut out = Vec::new();
        if x0 < 0.0 {
            out.extend(self.periodic_segments_on(0.0, x0, x1.min(0.0)));
        }
        if x1 > 0.0 && x0 < 1.0 {
            out.extend(
                self.defect_segments()
                    .into_iter()
                    .filter_map(|s| s.clipped(x0.max(0.0), x1.min(1.0))),
            );
        }
        if x1 > 1.0 {
            out.extend(self.periodic_segments_on(1.0, x0.max(1.0), x1));
        }
        out
    }

    /// Exact `∫_{x0}^{x1} q(x) dx` of the full-line potential.
    pub fn integrate_full(&self, x0: f64, x1: f64) -> f64 {
        self.full_segments(x0, x1)
            .iter()
            .map(|s| s.poly.integral(s.x0 - s.offset, s.x1 - s.offset))
            .sum()
    }
}

fn range_of(pieces: &[Piece]) -> (f64, f64) {
    pieces.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let (a, b) = p.poly().range_on(p.from, p.to);
        (lo.min(a), hi.max(b))
    })
}

/// The golden mean `(1 + √5)/2`.
pub fn golden_mean() -> f64 {
    0.5 * (1.0 + 5f64.sqrt())
}
