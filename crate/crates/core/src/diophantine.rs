//! Continued fractions, rational-approximation residuals `M(N − aM)` and the
//! exceptional set `F_a` for quadratic irrationals, in exact `Q(√d)`
//! arithmetic.

use crate::error::{Error, Result};
use crate::potential::PotentialSpec;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

fn big(x: i64) -> BigInt {
    BigInt::from(x)
}

fn rat(x: BigInt) -> BigRational {
    BigRational::from_integer(x)
}

fn ser_big<S: Serializer>(x: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x.to_i64() {
        Some(v) if v.unsigned_abs() < (1 << 53) => s.serialize_i64(v),
        _ => s.serialize_str(&x.to_string()),
    }
}

/// Nearest `f64` to a rational.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let (n, d) = (r.numer().abs(), r.denom().clone());
    let shift = 64 - (n.bits() as i64 - d.bits() as i64);
    let q = if shift >= 0 { (n << shift as usize) / d } else { n / (d << (-shift) as usize) };
    let v = q.to_f64().unwrap() * 2f64.powi(-shift as i32);
    if r.is_negative() {
        -v
    } else {
        v
    }
}

/// `p + q√d` with rational `p`, `q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadElem {
    pub p: BigRational,
    pub q: BigRational,
    pub d: BigInt,
}

impl QuadElem {
    pub fn new(p: BigRational, q: BigRational, d: BigInt) -> Self {
        QuadElem { p, q, d }
    }

    pub fn from_int(x: &BigInt, d: &BigInt) -> Self {
        QuadElem::new(rat(x.clone()), BigRational::zero(), d.clone())
    }

    pub fn sqrt_d(d: &BigInt) -> Self {
        QuadElem::new(BigRational::zero(), BigRational::one(), d.clone())
    }

    pub fn add(&self, o: &QuadElem) -> QuadElem {
        QuadElem::new(&self.p + &o.p, &self.q + &o.q, self.d.clone())
    }

    pub fn sub(&self, o: &QuadElem) -> QuadElem {
        QuadElem::new(&self.p - &o.p, &self.q - &o.q, self.d.clone())
    }

    pub fn mul(&self, o: &QuadElem) -> QuadElem {
        let dd = rat(self.d.clone());
        QuadElem::new(
            &self.p * &o.p + &self.q * &o.q * dd,
            &self.p * &o.q + &self.q * &o.p,
            self.d.clone(),
        )
    }

    pub fn scale(&self, r: &BigRational) -> QuadElem {
        QuadElem::new(&self.p * r, &self.q * r, self.d.clone())
    }

    pub fn neg(&self) -> QuadElem {
        QuadElem::new(-&self.p, -&self.q, self.d.clone())
    }

    /// `p² − d q²`.
    pub fn norm(&self) -> BigRational {
        &self.p * &self.p - &self.q * &self.q * rat(self.d.clone())
    }

    pub fn recip(&self) -> QuadElem {
        let n = self.norm();
        QuadElem::new(&self.p / &n, -&self.q / &n, self.d.clone())
    }

    pub fn div(&self, o: &QuadElem) -> QuadElem {
        self.mul(&o.recip())
    }

    pub fn is_zero(&self) -> bool {
        self.p.is_zero() && self.q.is_zero()
    }

    /// Exact sign, `−1`, `0` or `1`.
    pub fn signum(&self) -> i32 {
        let sp = sign_of(&self.p);
        let sq = sign_of(&self.q);
        if sp == 0 || sq == 0 || sp == sq {
            return if sp != 0 { sp } else { sq };
        }
        let p2 = &self.p * &self.p;
        let q2d = &self.q * &self.q * rat(self.d.clone());
        match p2.cmp(&q2d) {
            Ordering::Greater => sp,
            Ordering::Less => sq,
            Ordering::Equal => 0,
        }
    }

    pub fn abs(&self) -> QuadElem {
        if self.signum() < 0 {
            self.neg()
        } else {
            self.clone()
        }
    }

    pub fn cmp_exact(&self, o: &QuadElem) -> Ordering {
        self.sub(o).signum().cmp(&0)
    }

    /// Rational enclosure of `√d` with `bits` bits after the point.
    fn sqrt_approx(&self, bits: usize) -> BigRational {
        let scaled = (&self.d << (2 * bits)).sqrt();
        BigRational::new(scaled, BigInt::one() << bits)
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.approx(200))
    }

    /// Rational approximation with error below `|q|·2^{−bits}`.
    pub fn approx(&self, bits: usize) -> BigRational {
        &self.p + &self.q * self.sqrt_approx(bits)
    }

    /// Decimal expansion with `digits` digits after the point, truncated.
    pub fn to_decimal(&self, digits: usize) -> String {
        let bits = digits * 4 + 64 + self.q.numer().bits() as usize;
        let v = self.approx(bits);
        let scale = BigInt::from(10).pow(digits as u32);
        let scaled = (v.abs() * rat(scale.clone())).floor().to_integer();
        let (int, frac) = scaled.div_rem(&scale);
        let sign = if v.is_negative() { "-" } else { "" };
        format!("{sign}{int}.{:0>width$}", frac.to_string(), width = digits)
    }
}

fn sign_of(r: &BigRational) -> i32 {
    if r.is_positive() {
        1
    } else if r.is_negative() {
        -1
    } else {
        0
    }
}

impl fmt::Display for QuadElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}·√{}", self.p, self.q, self.d)
    }
}

/// Root of `n1 x² + n2 x + n3` selected by the sign of the square root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuadraticIrrational {
    pub n1: i64,
    pub n2: i64,
    pub n3: i64,
    /// `+1` for `(−n2 + √d)/(2 n1)`, `−1` for the other root.
    pub root_sign: i8,
}

impl QuadraticIrrational {
    pub fn new(n1: i64, n2: i64, n3: i64, root_sign: i8) -> Result<Self> {
        if n1 == 0 {
            return Err(Error::InvalidQuadratic("leading coefficient is zero".into()));
        }
        if root_sign != 1 && root_sign != -1 {
            return Err(Error::InvalidQuadratic("root sign must be ±1".into()));
        }
        if n1.gcd(&n2).gcd(&n3) != 1 {
            return Err(Error::InvalidQuadratic(format!("({n1}, {n2}, {n3}) are not coprime")));
        }
        let d = big(n2) * big(n2) - big(4) * big(n1) * big(n3);
        if !d.is_positive() {
            return Err(Error::InvalidQuadratic(format!("discriminant {d} is not positive")));
        }
        if d.sqrt().pow(2) == d {
            return Err(Error::InvalidQuadratic(format!("discriminant {d} is a perfect square")));
        }
        Ok(QuadraticIrrational { n1, n2, n3, root_sign })
    }

    /// The golden mean, root of `x² − x − 1`.
    pub fn golden() -> Self {
        QuadraticIrrational::new(1, -1, -1, 1).unwrap()
    }

    pub fn discriminant(&self) -> BigInt {
        big(self.n2) * big(self.n2) - big(4) * big(self.n1) * big(self.n3)
    }

    /// `a` as an element of `Q(√d)`.
    pub fn exact(&self) -> QuadElem {
        let den = big(2 * self.n1);
        QuadElem::new(
            BigRational::new(big(-self.n2), den.clone()),
            BigRational::new(big(self.root_sign as i64), den),
            self.discriminant(),
        )
    }

    pub fn value(&self) -> f64 {
        self.exact().to_f64()
    }

    /// `f'(a) = 2 n1 a + n2 = ±√d`.
    pub fn derivative_at_root(&self) -> QuadElem {
        QuadElem::sqrt_d(&self.discriminant()).scale(&rat(big(self.root_sign as i64)))
    }

    /// `n1 N² + n2 N M + n3 M²`.
    pub fn form(&self, n: &BigInt, m: &BigInt) -> BigInt {
        big(self.n1) * n * n + big(self.n2) * n * m + big(self.n3) * m * m
    }
}

/// Input for continued fractions and residuals.
#[derive(Debug, Clone, PartialEq)]
pub enum RealNumber {
    Quadratic(QuadraticIrrational),
    Rational(BigRational),
    /// Treated as the exact dyadic rational it stores.
    Float(f64),
}

impl RealNumber {
    pub fn rational(p: i64, q: i64) -> Self {
        RealNumber::Rational(BigRational::new(big(p), big(q)))
    }

    pub fn value(&self) -> f64 {
        match self {
            RealNumber::Quadratic(q) => q.value(),
            RealNumber::Rational(r) => rational_to_f64(r),
            RealNumber::Float(x) => *x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuedFraction {
    #[serde(serialize_with = "ser_bigs")]
    pub terms: Vec<BigInt>,
    /// Index where the repeating block starts, for quadratic irrationals.
    pub period_start: Option<usize>,
    pub period_len: Option<usize>,
    /// The expansion ended (rational input).
    pub terminated: bool,
}

fn ser_bigs<S: Serializer>(xs: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        match x.to_i64() {
            Some(v) => seq.serialize_element(&v)?,
            None => seq.serialize_element(&x.to_string())?,
        }
    }
    seq.end()
}

fn cf_rational(r: &BigRational, n_terms: usize) -> (Vec<BigInt>, Vec<(BigInt, BigInt)>, bool) {
    let (mut p, mut q) = (r.numer().clone(), r.denom().clone());
    let mut terms = Vec::new();
    while terms.len() < n_terms && !q.is_zero() {
        let (a, rem) = p.div_mod_floor(&q);
        terms.push(a);
        p = q;
        q = rem;
    }
    let conv = convergents(&terms);
    (terms, conv, q.is_zero())
}

/// `floor((P + √D)/Q)` for non-square `D`.
fn floor_surd(p: &BigInt, d: &BigInt, q: &BigInt) -> BigInt {
    let r = d.sqrt();
    if q.is_positive() {
        (p + &r).div_floor(q)
    } else {
        (-p - &r - BigInt::one()).div_floor(&-q)
    }
}

/// Continued fraction expansion, exact for quadratic and rational input.
/// Float input is expanded exactly as a dyadic rational, but only terms
/// whose convergent denominator `Q_k` satisfies `Q_k² < 2^52` are trusted.
pub fn continued_fraction(a: &RealNumber, n_terms: usize) -> Result<ContinuedFraction> {
    if n_terms == 0 {
        return Err(Error::OutOfRange {
            name: "n_terms",
            value: 0.0,
            range: "[1, ∞)".into(),
        });
    }
    match a {
        RealNumber::Rational(r) => {
            let (terms, _, done) = cf_rational(r, n_terms);
            Ok(ContinuedFraction {
                terms,
                period_start: None,
                period_len: None,
                terminated: done,
            })
        }
        RealNumber::Float(x) => {
            let r = BigRational::from_float(*x).ok_or_else(|| Error::OutOfRange {
                name: "a",
                value: *x,
                range: "finite".into(),
            })?;
            let (mut terms, conv, done) = cf_rational(&r, n_terms);
            let limit = BigInt::one() << 52;
            let available = conv.iter().take_while(|(_, q)| q * q < limit).count();
            if done && available == terms.len() {
                return Ok(ContinuedFraction {
                    terms,
                    period_start: None,
                    period_len: None,
                    terminated: true,
                });
            }
            terms.truncate(available);
            if available < n_terms {
                return Err(Error::PrecisionExhausted { available });
            }
            Ok(ContinuedFraction {
                terms,
                period_start: None,
                period_len: None,
                terminated: false,
            })
        }
        RealNumber::Quadratic(qi) => {
            let s = big(qi.root_sign as i64);
            let d = qi.discriminant();
            let mut p = -&s * big(qi.n2);
            let mut q = big(2) * &s * big(qi.n1);
            let mut seen: HashMap<(BigInt, BigInt), usize> = HashMap::new();
            let mut terms = Vec::new();
            let mut period = None;
            while terms.len() < n_terms || period.is_none() {
                if period.is_none() {
                    if let Some(&start) = seen.get(&(p.clone(), q.clone())) {
                        period = Some((start, terms.len() - start));
                        if terms.len() >= n_terms {
                            break;
                        }
                    } else {
                        seen.insert((p.clone(), q.clone()), terms.len());
                    }
                }
                let a_k = floor_surd(&p, &d, &q);
                let p_next = &a_k * &q - &p;
                let q_next = (&d - &p_next * &p_next) / &q;
                terms.push(a_k);
                p = p_next;
                q = q_next;
            }
            terms.truncate(n_terms);
            Ok(ContinuedFraction {
                terms,
                period_start: period.map(|p| p.0),
                period_len: period.map(|p| p.1),
                terminated: false,
            })
        }
    }
}

/// Convergents `(P_k, Q_k)` of a continued fraction.
pub fn convergents(cf: &[BigInt]) -> Vec<(BigInt, BigInt)> {
    let (mut p0, mut p1) = (BigInt::zero(), BigInt::one());
    let (mut q0, mut q1) = (BigInt::one(), BigInt::zero());
    cf.iter()
        .map(|a| {
            let p = a * &p1 + &p0;
            let q = a * &q1 + &q0;
            p0 = std::mem::replace(&mut p1, p.clone());
            q0 = std::mem::replace(&mut q1, q.clone());
            (p, q)
        })
        .collect()
}

/// One pair `(N_k, M_k)` with its residual `M_k (N_k − a M_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxHit {
    #[serde(serialize_with = "ser_big")]
    pub n: BigInt,
    #[serde(serialize_with = "ser_big")]
    pub m: BigInt,
    /// `n1 N² + n2 N M + n3 M²` for quadratic `a`.
    #[serde(serialize_with = "ser_opt_big")]
    pub form_value: Option<BigInt>,
    pub residual: f64,
    /// The residual to 30 decimal places.
    pub residual_decimal: String,
}

fn ser_opt_big<S: Serializer>(x: &Option<BigInt>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_big(v, s),
        None => s.serialize_none(),
    }
}

/// Exact residual `M (N − a M)` for quadratic or rational `a`.
pub enum ExactResidual {
    Quadratic(QuadElem),
    Rational(BigRational),
}

impl ExactResidual {
    fn to_f64(&self) -> f64 {
        match self {
            ExactResidual::Quadratic(q) => q.to_f64(),
            ExactResidual::Rational(r) => rational_to_f64(r),
        }
    }

    fn to_decimal(&self, digits: usize) -> String {
        match self {
            ExactResidual::Quadratic(q) => q.to_decimal(digits),
            ExactResidual::Rational(r) => {
                QuadElem::new(r.clone(), BigRational::zero(), big(2)).to_decimal(digits)
            }
        }
    }
}

pub fn exact_residual(a: &RealNumber, n: &BigInt, m: &BigInt) -> Result<ExactResidual> {
    Ok(match a {
        RealNumber::Quadratic(q) => {
            let av = q.exact();
            let d = av.d.clone();
            let nm = QuadElem::from_int(n, &d).sub(&av.mul(&QuadElem::from_int(m, &d)));
            ExactResidual::Quadratic(nm.mul(&QuadElem::from_int(m, &d)))
        }
        RealNumber::Rational(r) => ExactResidual::Rational(rat(m.clone()) * (rat(n.clone()) - r * rat(m.clone()))),
        RealNumber::Float(x) => {
            let r = BigRational::from_float(*x).ok_or_else(|| Error::OutOfRange {
                name: "a",
                value: *x,
                range: "finite".into(),
            })?;
            ExactResidual::Rational(rat(m.clone()) * (rat(n.clone()) - r * rat(m.clone())))
        }
    })
}

fn hit(a: &RealNumber, n: BigInt, m: BigInt) -> Result<ApproxHit> {
    let r = exact_residual(a, &n, &m)?;
    let form_value = match a {
        RealNumber::Quadratic(q) => Some(q.form(&n, &m)),
        _ => None,
    };
    Ok(ApproxHit {
        residual: r.to_f64(),
        residual_decimal: r.to_decimal(30),
        form_value,
        n,
        m,
    })
}

/// Residuals `M_k (N_k − a M_k)` for given pairs.
pub fn residuals(a: &RealNumber, pairs: &[(BigInt, BigInt)]) -> Result<Vec<ApproxHit>> {
    pairs.iter().map(|(n, m)| hit(a, n.clone(), m.clone())).collect()
}

type Pair = (BigInt, BigInt);

/// Proper automorph of the form, `[[(t − n2 u)/2, −n3 u], [n1 u, (t + n2 u)/2]]`
/// from the least `u > 0` with `t² − d u² = 4`, oriented so forward iterates
/// approach the direction `(a, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Automorph {
    pub m: [[BigInt; 2]; 2],
}

const PELL_SEARCH: i64 = 10_000_000;

impl Automorph {
    pub fn of(q: &QuadraticIrrational) -> Result<Automorph> {
        let d = q.discriminant();
        let mut found = None;
        for u in 1..=PELL_SEARCH {
            let t2 = &d * big(u) * big(u) + big(4);
            let t = t2.sqrt();
            if &t * &t == t2 {
                found = Some((t, big(u)));
                break;
            }
        }
        let (t, mut u) = found.ok_or_else(|| Error::InvalidQuadratic(format!("no automorph with u ≤ {PELL_SEARCH}")))?;
        // eigenvalue on (a, 1) is (t + u f'(a))/2; it must dominate
        if q.root_sign < 0 {
            u = -u;
        }
        let two = big(2);
        let m = [
            [(&t - big(q.n2) * &u) / &two, -big(q.n3) * &u],
            [big(q.n1) * &u, (&t + big(q.n2) * &u) / &two],
        ];
        Ok(Automorph { m })
    }

    pub fn apply(&self, p: &Pair) -> Pair {
        (
            &self.m[0][0] * &p.0 + &self.m[0][1] * &p.1,
            &self.m[1][0] * &p.0 + &self.m[1][1] * &p.1,
        )
    }

    pub fn apply_inverse(&self, p: &Pair) -> Pair {
        (
            &self.m[1][1] * &p.0 - &self.m[0][1] * &p.1,
            -&self.m[1][0] * &p.0 + &self.m[0][0] * &p.1,
        )
    }
}

/// Representative of the orbit of `p` under the automorph and `−I`: the
/// orbit is oriented so `M → +∞` forwards, and the representative is the
/// element of least positive `M` (earliest on ties).
fn orbit_rep(t: &Automorph, p: &Pair) -> Pair {
    let mut fwd = p.clone();
    for _ in 0..4 {
        fwd = t.apply(&fwd);
    }
    let mut cur = if fwd.1.is_negative() { (-&p.0, -&p.1) } else { p.clone() };
    // walk forward until M is positive and increasing
    loop {
        let next = t.apply(&cur);
        if cur.1.is_positive() && next.1 > cur.1 {
            break;
        }
        cur = next;
    }
    // then backward while M stays positive and does not grow
    loop {
        let prev = t.apply_inverse(&cur);
        if prev.1.is_positive() && prev.1 <= cur.1 {
            cur = prev;
        } else {
            break;
        }
    }
    cur
}

/// Solutions of `n1 N² + n2 N M + n3 M² = j`, one list per orbit, each
/// with `count` pairs starting from the orbit representative.
///
/// Fundamental solutions are searched in `|N|, |M| ≤ ⌈√(|j| Σ|n_i| · 10)⌉`.
pub fn form_solutions(q: &QuadraticIrrational, j: i64, count: usize) -> Result<Vec<Vec<ApproxHit>>> {
    if j == 0 || count == 0 {
        return Ok(Vec::new());
    }
    let t = Automorph::of(q)?;
    let reps = orbit_reps(q, &t, j);
    let a = RealNumber::Quadratic(*q);
    reps.into_iter()
        .map(|rep| {
            let mut out = Vec::with_capacity(count);
            let mut cur = rep;
            for _ in 0..count {
                out.push(hit(&a, cur.0.clone(), cur.1.clone())?);
                cur = t.apply(&cur);
            }
            Ok(out)
        })
        .collect()
}

fn search_bound(q: &QuadraticIrrational, j: i64) -> i64 {
    let s = (q.n1.abs() + q.n2.abs() + q.n3.abs()) as f64;
    ((j.abs() as f64) * s * 10.0).sqrt().ceil() as i64
}

fn orbit_reps(q: &QuadraticIrrational, t: &Automorph, j: i64) -> Vec<Pair> {
    let b = search_bound(q, j);
    let target = big(j);
    let mut reps: Vec<Pair> = Vec::new();
    for m in -b..=b {
        for n in -b..=b {
            let (bn, bm) = (big(n), big(m));
            if q.form(&bn, &bm) == target {
                let r = orbit_rep(t, &(bn, bm));
                if !reps.contains(&r) {
                    reps.push(r);
                }
            }
        }
    }
    reps.sort_by(|x, y| x.1.cmp(&y.1).then(x.0.cmp(&y.0)));
    reps
}

/// Whether `j` is represented by the form (exhaustive bounded search).
pub fn representable(q: &QuadraticIrrational, j: i64) -> bool {
    if j == 0 {
        return false;
    }
    let b = search_bound(q, j);
    let target = big(j);
    (-b..=b).any(|m| (-b..=b).any(|n| q.form(&big(n), &big(m)) == target))
}

/// One element `y = j / f'(a)` of `F_a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaElement {
    pub j: i64,
    pub y: f64,
    pub y_decimal: String,
}

/// `F_a ∩ {j / f'(a) : 1 ≤ |j| ≤ j_max}` for quadratic `a`, sorted by `y`.
pub fn fa_quadratic(q: &QuadraticIrrational, j_max: i64) -> Vec<FaElement> {
    let fp = q.derivative_at_root();
    let mut out: Vec<FaElement> = (-j_max..=j_max)
        .filter(|&j| j != 0 && representable(q, j))
        .map(|j| {
            let y = QuadElem::from_int(&big(j), &fp.d).div(&fp);
            FaElement {
                j,
                y: y.to_f64(),
                y_decimal: y.to_decimal(30),
            }
        })
        .collect();
    out.sort_by(|a, b| a.y.total_cmp(&b.y));
    out
}

/// `F_a` for rational `a` is `{0}`.
pub fn fa_rational() -> Vec<f64> {
    vec![0.0]
}

/// Unimodular `(m1, m2, m3, m4)` with `a = (m1 b + m2)/(m3 b + m4)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Unimodular(pub i64, pub i64, pub i64, pub i64);

impl Unimodular {
    pub const IDENTITY: Unimodular = Unimodular(1, 0, 0, 1);

    pub fn check(&self) -> Result<()> {
        let Unimodular(m1, m2, m3, m4) = *self;
        if m1 * m4 - m2 * m3 != 1 {
            return Err(Error::NotUnimodular(m1, m2, m3, m4));
        }
        Ok(())
    }

    /// Matrix product, so that `compose(g, h)` acts as `g ∘ h` on `b`.
    pub fn compose(&self, o: &Unimodular) -> Unimodular {
        let Unimodular(a1, a2, a3, a4) = *self;
        let Unimodular(b1, b2, b3, b4) = *o;
        Unimodular(a1 * b1 + a2 * b3, a1 * b2 + a2 * b4, a3 * b1 + a4 * b3, a3 * b2 + a4 * b4)
    }

    /// `b = (m4 a − m2)/(m1 − m3 a)` as a quadratic irrational.
    pub fn pull_back(&self, q: &QuadraticIrrational) -> Result<QuadraticIrrational> {
        self.check()?;
        let Unimodular(m1, m2, m3, m4) = *self;
        let (n1, n2, n3) = (q.n1, q.n2, q.n3);
        let b2 = n1 * m1 * m1 + n2 * m1 * m3 + n3 * m3 * m3;
        let b1 = 2 * n1 * m1 * m2 + n2 * (m1 * m4 + m2 * m3) + 2 * n3 * m3 * m4;
        let b0 = n1 * m2 * m2 + n2 * m2 * m4 + n3 * m4 * m4;
        let a = q.exact();
        let d = a.d.clone();
        let num = a.scale(&rat(big(m4))).sub(&QuadElem::from_int(&big(m2), &d));
        let den = QuadElem::from_int(&big(m1), &d).sub(&a.scale(&rat(big(m3))));
        let b = num.div(&den);
        // b = (−b1 + s√d)/(2 b2): s has the sign of q_b · b2
        let s = if sign_of(&b.q) * b2.signum() as i32 > 0 { 1 } else { -1 };
        let g = b2.gcd(&b1).gcd(&b0);
        let out = QuadraticIrrational::new(b2 / g, b1 / g, b0 / g, s)?;
        debug_assert_eq!(out.exact(), b);
        Ok(out)
    }

    /// `N' = m4 N − m2 M`, `M' = m1 M − m3 N`, sign-normalised to `M' > 0`.
    pub fn transform_pair(&self, n: &BigInt, m: &BigInt) -> Pair {
        let Unimodular(m1, m2, m3, m4) = *self;
        let np = big(m4) * n - big(m2) * m;
        let mp = big(m1) * m - big(m3) * n;
        if mp.is_negative() {
            (-np, -mp)
        } else {
            (np, mp)
        }
    }
}

/// Moves hits for `a` to hits for `b`, with residuals taken with respect to
/// `b`.
pub fn modular_transform(q: &QuadraticIrrational, hits: &[ApproxHit], g: Unimodular) -> Result<(QuadraticIrrational, Vec<ApproxHit>)> {
    let b = g.pull_back(q)?;
    let rb = RealNumber::Quadratic(b);
    let out = hits
        .iter()
        .map(|h| {
            let (n, m) = g.transform_pair(&h.n, &h.m);
            hit(&rb, n, m)
        })
        .collect::<Result<_>>()?;
    Ok((b, out))
}

/// `n² π² / L² + mean`.
pub fn dirichlet_asymptote(l: f64, mean_v: f64, n: u64) -> f64 {
    let k = n as f64 * PI / l;
    k * k + mean_v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `y*` is within `delta` of an element of `F_a`.
    Exceptional,
    /// Certified not within `delta` of `F_a` (quadratic or rational `a`).
    NotExceptional,
    /// Real `a`: pairs found but membership is not certified.
    CandidateHits,
    /// Real `a`: nothing found up to the search limit.
    NoHitBelowLimit,
}

/// One predicted exceptional gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceptionalGap {
    /// Periodic Dirichlet index, i.e. the gap number `n_k = N_k`.
    #[serde(serialize_with = "ser_big")]
    pub gap: BigInt,
    /// Defect Dirichlet index `m_k = M_k`.
    #[serde(serialize_with = "ser_big")]
    pub defect_index: BigInt,
    pub residual: f64,
    /// Predicted `μ_n − μ̃_m ≈ (2π²/a) m (n − a m) − Δq`.
    pub center_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceptionalReport {
    pub period: f64,
    pub delta_q: f64,
    /// `a Δq / (2π²)`.
    pub y_star: f64,
    pub verdict: Verdict,
    /// Nearest `j` with `j / f'(a)` closest to `y*` (quadratic `a`).
    pub j: Option<i64>,
    /// `delta − dist(y*, F_a)`; positive means inside.
    pub margin: Option<f64>,
    pub orbits: Vec<Vec<ExceptionalGap>>,
    /// Hits found by the search (real `a`).
    pub hits: Vec<ApproxHit>,
}

fn offsets(a: f64, dq: f64, hits: &[ApproxHit]) -> Vec<ExceptionalGap> {
    hits.iter()
        .map(|h| ExceptionalGap {
            gap: h.n.clone(),
            defect_index: h.m.clone(),
            residual: h.residual,
            center_offset: 2.0 * PI * PI / a * h.residual - dq,
        })
        .collect()
}

/// Decides whether `a Δq/(2π²)` lies in `F_a` (within `delta`) and lists
/// the predicted exceptional gaps.
///
/// `a_exact` switches to exact arithmetic; its value must match the
/// spec's period. For plain real `a` the search covers `M ≤ Q_{k_max}` and
/// its outcome is never a definitive negative.
pub fn exceptional_analysis(spec: &PotentialSpec, a_exact: Option<&RealNumber>, delta: f64, k_max: usize) -> Result<ExceptionalReport> {
    if !(delta > 0.0) {
        return Err(Error::NonPositiveTolerance(delta));
    }
    let a = spec.period();
    let dq = spec.mean_difference();
    let y_star = a * dq / (2.0 * PI * PI);
    // the proof's offset (2π²/a)·y − Δq must vanish at y = y*
    debug_assert!((2.0 * PI * PI / a * y_star - dq).abs() <= 1e-12 * (1.0 + dq.abs()));
    let mut report = ExceptionalReport {
        period: a,
        delta_q: dq,
        y_star,
        verdict: Verdict::NotExceptional,
        j: None,
        margin: None,
        orbits: Vec::new(),
        hits: Vec::new(),
    };
    let check_precision = |margin: f64| -> Result<()> {
        if margin.abs() < delta / 10.0 {
            return Err(Error::PrecisionExhausted { available: 0 });
        }
        Ok(())
    };
    let input = a_exact.cloned().unwrap_or(RealNumber::Float(a));
    if let Some(exact) = a_exact {
        let v = exact.value();
        if (v - a).abs() > 1e-12 * a {
            return Err(Error::OutOfRange {
                name: "a_exact",
                value: v,
                range: format!("must equal the period {a}"),
            });
        }
    }
    match &input {
        RealNumber::Quadratic(q) => {
            let fp = q.derivative_at_root().to_f64();
            let j = (y_star * fp).round() as i64;
            let dist = (y_star - j as f64 / fp).abs();
            let in_fa = j != 0 && representable(q, j);
            let margin = if in_fa { delta - dist } else { delta - fa_distance(q, y_star, fp) };
            check_precision(margin)?;
            report.j = Some(j);
            report.margin = Some(margin);
            if in_fa && margin > 0.0 {
                report.verdict = Verdict::Exceptional;
                report.orbits = form_solutions(q, j, k_max)?.iter().map(|o| offsets(a, dq, o)).collect();
            }
        }
        RealNumber::Rational(_) => {
            let margin = delta - y_star.abs();
            check_precision(margin)?;
            report.margin = Some(margin);
            if margin > 0.0 {
                report.verdict = Verdict::Exceptional;
            }
        }
        RealNumber::Float(x) => {
            let cf = match continued_fraction(&input, k_max.max(1)) {
                Ok(cf) => cf,
                Err(Error::PrecisionExhausted { available }) => continued_fraction(&input, available.max(1))?,
                Err(e) => return Err(e),
            };
            let conv = convergents(&cf.terms);
            let m_max = conv.last().map(|c| c.1.to_i64().unwrap_or(i64::MAX)).unwrap_or(1).clamp(1, 10_000_000);
            for m in 1..=m_max {
                let n = (x * m as f64 + y_star / m as f64).round() as i64;
                let h = hit(&input, big(n), big(m))?;
                if (h.residual - y_star).abs() < delta {
                    report.hits.push(h);
                }
            }
            report.verdict = if report.hits.is_empty() {
                Verdict::NoHitBelowLimit
            } else {
                Verdict::CandidateHits
            };
        }
    }
    Ok(report)
}

/// Distance from `y` to the nearest representable `j / f'(a)`.
fn fa_distance(q: &QuadraticIrrational, y: f64, fp: f64) -> f64 {
    let centre = (y * fp).round() as i64;
    let mut best = f64::INFINITY;
    for r in 0..=64i64 {
        for j in [centre - r, centre + r] {
            if j != 0 && representable(q, j) {
                best = best.min((y - j as f64 / fp).abs());
            }
        }
        if best.is_finite() && (r as f64) / fp.abs() > best {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| big(x)).collect()
    }

    #[test]
    fn golden_mean_cf() {
        let cf = continued_fraction(&RealNumber::Quadratic(QuadraticIrrational::golden()), 8).unwrap();
        assert_eq!(cf.terms, ints(&[1; 8]));
        assert_eq!((cf.period_start, cf.period_len), (Some(0), Some(1)));
    }

    #[test]
    fn sqrt2_cf_and_convergents() {
        let q = QuadraticIrrational::new(1, 0, -2, 1).unwrap();
        let cf = continued_fraction(&RealNumber::Quadratic(q), 6).unwrap();
        assert_eq!(cf.terms, ints(&[1, 2, 2, 2, 2, 2]));
        assert_eq!((cf.period_start, cf.period_len), (Some(1), Some(1)));
        let conv = convergents(&cf.terms[..4]);
        let expect: Vec<Pair> = [(1, 1), (3, 2), (7, 5), (17, 12)].iter().map(|&(p, q)| (big(p), big(q))).collect();
        assert_eq!(conv, expect);
    }

    #[test]
    fn rational_cf_terminates() {
        let cf = continued_fraction(&RealNumber::rational(22, 7), 10).unwrap();
        assert_eq!(cf.terms, ints(&[3, 7]));
        assert!(cf.terminated);
    }

    #[test]
    fn float_cf_precision_budget() {
        let phi = QuadraticIrrational::golden().value();
        let cf = continued_fraction(&RealNumber::Float(phi), 20).unwrap();
        assert!(cf.terms.iter().all(|t| *t == BigInt::one()));
        match continued_fraction(&RealNumber::Float(phi), 60) {
            Err(Error::PrecisionExhausted { available }) => assert!((20..60).contains(&available)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn golden_convergents_are_fibonacci() {
        let cf = continued_fraction(&RealNumber::Quadratic(QuadraticIrrational::golden()), 5).unwrap();
        let conv = convergents(&cf.terms);
        let expect: Vec<Pair> = [(1, 1), (2, 1), (3, 2), (5, 3), (8, 5)].iter().map(|&(p, q)| (big(p), big(q))).collect();
        assert_eq!(conv, expect);
        // |P/Q − a| < 1/Q² exactly
        let a = QuadraticIrrational::golden().exact();
        for (p, q) in convergents(&continued_fraction(&RealNumber::Quadratic(QuadraticIrrational::golden()), 30).unwrap().terms) {
            let d = a.d.clone();
            let err = QuadElem::from_int(&p, &d).scale(&BigRational::new(BigInt::one(), q.clone())).sub(&a).abs();
            let bound = QuadElem::new(BigRational::new(BigInt::one(), &q * &q), BigRational::zero(), d);
            assert_eq!(err.cmp_exact(&bound), Ordering::Less);
        }
    }

    #[test]
    fn convergent_residuals_alternate() {
        let q = QuadraticIrrational::golden();
        let conv = convergents(&continued_fraction(&RealNumber::Quadratic(q), 20).unwrap().terms);
        let a = RealNumber::Quadratic(q);
        for (k, (p, qq)) in conv.iter().enumerate() {
            let r = match exact_residual(&a, p, qq).unwrap() {
                ExactResidual::Quadratic(x) => x.signum(),
                _ => unreachable!(),
            };
            // P_k − a Q_k is negative for even k and positive for odd k
            assert_eq!(r, if k % 2 == 0 { -1 } else { 1 });
        }
    }

    #[test]
    fn seq_eleven_orbits() {
        let q = QuadraticIrrational::golden();
        let orbits = form_solutions(&q, 11, 4).unwrap();
        assert_eq!(orbits.len(), 2);
        let pairs = |o: &Vec<ApproxHit>| o.iter().map(|h| (h.n.to_i64().unwrap(), h.m.to_i64().unwrap())).collect::<Vec<_>>();
        assert_eq!(pairs(&orbits[0]), vec![(4, 1), (9, 5), (23, 14), (60, 37)]);
        assert_eq!(pairs(&orbits[1]), vec![(5, 2), (12, 7), (31, 19), (81, 50)]);
        assert!(form_solutions(&q, 2, 4).unwrap().is_empty());
        for o in &orbits {
            for h in o {
                assert_eq!(h.form_value, Some(big(11)));
            }
        }
    }

    #[test]
    fn residual_values() {
        let a = RealNumber::Quadratic(QuadraticIrrational::golden());
        let r = residuals(&a, &[(big(4), big(1)), (big(23), big(14))]).unwrap();
        assert!((r[0].residual - 2.381966011250105).abs() < 1e-15);
        assert!(r[0].residual_decimal.starts_with("2.3819660112501051517954131656"));
        assert!((r[1].residual - 4.8653).abs() < 1e-4);
        let rr = residuals(&RealNumber::rational(22, 7), &[(big(22), big(7))]).unwrap();
        assert_eq!(rr[0].residual, 0.0);
    }

    #[test]
    fn factorisation_identity() {
        // n1 (N − a M)(N − a' M) = j exactly
        let q = QuadraticIrrational::golden();
        let a = q.exact();
        let conj = QuadElem::new(a.p.clone(), -a.q.clone(), a.d.clone());
        for o in form_solutions(&q, 11, 6).unwrap() {
            for h in o {
                let d = &a.d;
                let x = QuadElem::from_int(&h.n, d).sub(&a.mul(&QuadElem::from_int(&h.m, d)));
                let y = QuadElem::from_int(&h.n, d).sub(&conj.mul(&QuadElem::from_int(&h.m, d)));
                let prod = x.mul(&y).scale(&rat(big(q.n1)));
                assert_eq!(prod, QuadElem::from_int(&big(11), d));
            }
        }
    }

    #[test]
    fn fa_of_golden_mean() {
        let q = QuadraticIrrational::golden();
        let fa = fa_quadratic(&q, 12);
        let pos: Vec<i64> = fa.iter().filter(|e| e.j > 0).map(|e| e.j).collect();
        assert_eq!(pos, vec![1, 4, 5, 9, 11]);
        assert!(fa.iter().any(|e| e.j == -11));
        let y11 = fa.iter().find(|e| e.j == 11).unwrap();
        assert!((y11.y - 11.0 / 5f64.sqrt()).abs() < 1e-15);
        // j and j·k² both present
        assert!(representable(&q, 4) && representable(&q, 16) && representable(&q, 11 * 4));
    }

    #[test]
    fn modular_identity_and_group_law() {
        let q = QuadraticIrrational::golden();
        let hits = &form_solutions(&q, 11, 5).unwrap()[0];
        let (b, same) = modular_transform(&q, hits, Unimodular::IDENTITY).unwrap();
        assert_eq!(b, q);
        assert_eq!(&same, hits);
        assert!(matches!(Unimodular(1, 1, 1, 0).check(), Err(Error::NotUnimodular(..))));

        let g = Unimodular(1, 1, 0, 1);
        let h = Unimodular(2, 1, 1, 1);
        let (b1, s1) = modular_transform(&q, hits, g).unwrap();
        let (b2, s2) = modular_transform(&b1, &s1, h).unwrap();
        let (b3, s3) = modular_transform(&q, hits, g.compose(&h)).unwrap();
        assert_eq!(b2.exact(), b3.exact());
        assert_eq!(s2, s3);
        // a = b + 1 for g
        assert!((b1.value() - (q.value() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn dirichlet_asymptote_examples() {
        assert!((dirichlet_asymptote(PI, 0.0, 3) - 9.0).abs() < 1e-12);
        assert!((dirichlet_asymptote(1.0, 5.0, 2) - (4.0 * PI * PI + 5.0)).abs() < 1e-12);
    }

    #[test]
    fn exceptional_analysis_examples() {
        let phi = crate::potential::golden_mean();
        let qd = 22.0 * PI * PI / (5f64.sqrt() * phi);
        let spec = PotentialSpec::kronig_penney(40.0, phi, qd).unwrap();
        let exact = RealNumber::Quadratic(QuadraticIrrational::golden());
        let r = exceptional_analysis(&spec, Some(&exact), 1e-3, 4).unwrap();
        assert_eq!(r.verdict, Verdict::Exceptional);
        assert_eq!(r.j, Some(11));
        assert_eq!(r.orbits.len(), 2);
        assert_eq!(r.orbits[0][1].gap, big(9));
        assert_eq!(r.orbits[1][2].defect_index, big(19));
        for o in &r.orbits {
            for g in o.iter().skip(1) {
                assert!(g.center_offset.abs() < 140.0 / (g.defect_index.to_f64().unwrap().powi(2)));
            }
        }

        let zero = PotentialSpec::kronig_penney(40.0, phi, 0.0).unwrap();
        let r = exceptional_analysis(&zero, Some(&exact), 1e-3, 4).unwrap();
        assert_eq!(r.verdict, Verdict::NotExceptional);

        let rational = PotentialSpec::kronig_penney(40.0, 1.5, 3.0).unwrap();
        let r = exceptional_analysis(&rational, Some(&RealNumber::rational(3, 2)), 1e-3, 4).unwrap();
        assert_eq!(r.verdict, Verdict::NotExceptional);

        let wrong = RealNumber::rational(8, 5);
        assert!(exceptional_analysis(&spec, Some(&wrong), 1e-3, 4).is_err());
        let r = exceptional_analysis(&spec, None, 1e-2, 12).unwrap();
        assert_eq!(r.verdict, Verdict::CandidateHits);
    }

    #[test]
    fn quadelem_sign_and_decimal() {
        let d = big(5);
        let x = QuadElem::new(BigRational::new(big(9), big(4)), BigRational::new(big(-1), big(1)), d.clone());
        // 9/4 − √5 ≈ 0.0139
        assert_eq!(x.signum(), 1);
        assert!(x.to_decimal(6).starts_with("0.013932"));
        assert_eq!(x.neg().signum(), -1);
        let y = x.mul(&x.recip());
        assert_eq!(y, QuadElem::from_int(&BigInt::one(), &d));
    }

    #[test]
    fn rejects_bad_quadratics() {
        assert!(QuadraticIrrational::new(1, 0, -4, 1).is_err());
        assert!(QuadraticIrrational::new(2, 2, -2, 1).is_err());
        assert!(QuadraticIrrational::new(1, 0, 1, 1).is_err());
        assert!(QuadraticIrrational::new(0, 1, 1, 1).is_err());
    }
}
