//! Real 2×2 matrices with the symplectic structure of the first-order
//! Schrödinger system, and symmetric 2×2 matrices for the energy-derivative
//! quadratures.

use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::ops::{Add, Mul, Sub};

/// Row-major real 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

/// The standard skew form `[[0, 1], [-1, 0]]`.
pub const J: Mat2 = Mat2 {
    m11: 0.0,
    m12: 1.0,
    m21: -1.0,
    m22: 0.0,
};

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        m11: 1.0,
        m12: 0.0,
        m21: 0.0,
        m22: 1.0,
    };

    pub const ZERO: Mat2 = Mat2 {
        m11: 0.0,
        m12: 0.0,
        m21: 0.0,
        m22: 0.0,
    };

    pub const fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Mat2 { m11, m12, m21, m22 }
    }

    pub fn trace(&self) -> f64 {
        self.m11 + self.m22
    }

    /// Determinant via an error-free product difference, so that matrices
    /// with large entries still report `det` to a few ulps.
    pub fn det(&self) -> f64 {
        diff_of_products(self.m11, self.m22, self.m12, self.m21)
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.m11, self.m21, self.m12, self.m22)
    }

    /// Inverse of a unimodular matrix: `adj(M)`.
    pub fn symplectic_inverse(&self) -> Mat2 {
        Mat2::new(self.m22, -self.m12, -self.m21, self.m11)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m11 * v[0] + self.m12 * v[1],
            self.m21 * v[0] + self.m22 * v[1],
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.m11
            .abs()
            .max(self.m12.abs())
            .max(self.m21.abs())
            .max(self.m22.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.m11.is_finite() && self.m12.is_finite() && self.m21.is_finite() && self.m22.is_finite()
    }

    /// `max |(MᵗJM − J)_ij|`.
    pub fn symplectic_defect(&self) -> f64 {
        let s = self.transpose() * J * *self;
        (s - J).max_abs()
    }

    /// Rescale by `1/√det` so the stored matrix is unimodular again.
    pub fn symplectic_correct(&self) -> Mat2 {
        let d = self.det();
        if d > 0.0 && d.is_finite() {
            self.scale(1.0 / d.sqrt())
        } else {
            *self
        }
    }

    pub fn to_rows(&self) -> [[f64; 2]; 2] {
        [[self.m11, self.m12], [self.m21, self.m22]]
    }
}

/// `a·b − c·d` with one rounding error (Kahan's FMA trick).
pub fn diff_of_products(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let w = c * d;
    let e = (-c).mul_add(d, w);
    let f = a.mul_add(b, -w);
    f + e
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m11 * o.m11 + self.m12 * o.m21,
            self.m11 * o.m12 + self.m12 * o.m22,
            self.m21 * o.m11 + self.m22 * o.m21,
            self.m21 * o.m12 + self.m22 * o.m22,
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m11 + o.m11,
            self.m12 + o.m12,
            self.m21 + o.m21,
            self.m22 + o.m22,
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m11 - o.m11,
            self.m12 - o.m12,
            self.m21 - o.m21,
            self.m22 - o.m22,
        )
    }
}

impl Serialize for Mat2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(2))?;
        seq.serialize_element(&[self.m11, self.m12])?;
        seq.serialize_element(&[self.m21, self.m22])?;
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Mat2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: [[f64; 2]; 2] = Deserialize::deserialize(d)?;
        Ok(Mat2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]))
    }
}

/// Symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Sym2 { xx, xy, yy }
    }

    pub fn to_mat(&self) -> Mat2 {
        Mat2::new(self.xx, self.xy, self.xy, self.yy)
    }

    /// `⟨v, S v⟩`.
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half = 0.5 * (self.xx - self.yy);
        let r = half.hypot(self.xy);
        let hi = mean + r;
        // det / hi keeps the small eigenvalue accurate when the matrix is
        // nearly singular.
        let det = diff_of_products(self.xx, self.yy, self.xy, self.xy);
        let lo = if hi > 0.0 { det / hi } else { mean - r };
        (lo, hi)
    }

    /// `Tᵗ S T`.
    pub fn congruence(&self, t: &Mat2) -> Sym2 {
        let m = t.transpose() * self.to_mat() * *t;
        Sym2::new(m.m11, 0.5 * (m.m12 + m.m21), m.m22)
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }
}

pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `J v`.
pub fn j_apply(v: [f64; 2]) -> [f64; 2] {
    [v[1], -v[0]]
}

pub fn normalize(v: [f64; 2]) -> [f64; 2] {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}
