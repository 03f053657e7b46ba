//! Fixed-precision arithmetic in `Q_p` and `Q_{p²} = Q_p(α)`, `α² = u`.
//!
//! [`PadicNumber`] uses capped relative precision: a non-zero value is
//! `p^v · unit` with the unit known modulo `p^prec`. A zero carries only
//! its absolute precision. Exact zeros (from integer input) get an
//! effectively infinite absolute precision so they never limit a sum.
//!
//! `u` is always the least positive quadratic non-residue modulo `p`.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::arith::{is_prime, kronecker_prime, least_nonresidue};
use crate::error::{precondition, Error, Result};
use crate::mat::IMat2;
use crate::orders::QuadField;

/// Working precision used when none is configured.
pub const DEFAULT_PRECISION: u32 = 40;

/// Absolute precision attached to exact zeros.
const EXACT_ZERO: i64 = 1 << 40;

fn pow(p: u64, e: u32) -> BigInt {
    num_traits::pow(BigInt::from(p), e as usize)
}

/// `p`-adic valuation of a non-zero integer, and the cofactor.
fn split_p(n: &BigInt, p: u64) -> (i64, BigInt) {
    let pb = BigInt::from(p);
    let mut v = 0;
    let mut m = n.clone();
    loop {
        let (q, r) = m.div_rem(&pb);
        if !r.is_zero() {
            return (v, m);
        }
        m = q;
        v += 1;
    }
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

/// `p`-adic valuation of a non-zero rational.
pub fn valuation_rational(x: &BigRational, p: u64) -> i64 {
    assert!(!x.is_zero(), "valuation of zero");
    split_p(x.numer(), p).0 - split_p(x.denom(), p).0
}

#[derive(Clone, PartialEq, Eq)]
pub struct PadicNumber {
    p: u64,
    /// Valuation; for zero, the absolute precision.
    v: i64,
    /// Unit part in `[1, p^prec)`; zero for the zero element.
    unit: BigInt,
    prec: u32,
}

impl fmt::Debug for PadicNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            if self.v >= EXACT_ZERO / 2 {
                write!(f, "0")
            } else {
                write!(f, "O({}^{})", self.p, self.v)
            }
        } else {
            write!(
                f,
                "{}·{}^{} + O({}^{})",
                self.unit,
                self.p,
                self.v,
                self.p,
                self.v + self.prec as i64
            )
        }
    }
}

impl PadicNumber {
    /// Zero known modulo `p^abs_prec`.
    pub fn zero_mod(p: u64, abs_prec: i64) -> Self {
        PadicNumber {
            p,
            v: abs_prec,
            unit: BigInt::zero(),
            prec: 0,
        }
    }

    pub fn zero(p: u64) -> Self {
        Self::zero_mod(p, EXACT_ZERO)
    }

    /// An exact rational with `prec` digits of relative precision.
    pub fn from_rational(p: u64, x: &BigRational, prec: u32) -> Result<Self> {
        if x.is_zero() {
            return Ok(Self::zero(p));
        }
        let (vn, n) = split_p(x.numer(), p);
        let (vd, d) = split_p(x.denom(), p);
        let m = pow(p, prec);
        let dinv = mod_inverse(&d, &m)
            .ok_or_else(|| Error::Inconsistency("denominator not a p-adic unit".into()))?;
        Ok(PadicNumber {
            p,
            v: vn - vd,
            unit: (n * dinv).mod_floor(&m),
            prec,
        })
    }

    pub fn from_int(p: u64, n: i64, prec: u32) -> Self {
        Self::from_rational(p, &BigRational::from_integer(n.into()), prec)
            .expect("integers are p-adic")
    }

    pub fn from_bigint(p: u64, n: &BigInt, prec: u32) -> Self {
        Self::from_rational(p, &BigRational::from_integer(n.clone()), prec)
            .expect("integers are p-adic")
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn is_zero(&self) -> bool {
        self.unit.is_zero()
    }

    /// Valuation of a non-zero element (the absolute precision for zero).
    pub fn valuation(&self) -> i64 {
        self.v
    }

    pub fn relative_precision(&self) -> u32 {
        self.prec
    }

    pub fn absolute_precision(&self) -> i64 {
        self.v + self.prec as i64
    }

    pub fn unit(&self) -> &BigInt {
        &self.unit
    }

    fn normalise(p: u64, base_v: i64, value: BigInt, abs: i64) -> Self {
        if abs <= base_v {
            return Self::zero_mod(p, abs);
        }
        let m = pow(p, (abs - base_v) as u32);
        let s = value.mod_floor(&m);
        if s.is_zero() {
            return Self::zero_mod(p, abs);
        }
        let (k, unit) = split_p(&s, p);
        let v = base_v + k;
        PadicNumber {
            p,
            v,
            unit,
            prec: (abs - v) as u32,
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.p, o.p);
        let abs = self.absolute_precision().min(o.absolute_precision());
        if self.is_zero() {
            return Self::normalise(self.p, o.v, o.unit.clone(), abs.min(o.absolute_precision()));
        }
        if o.is_zero() {
            return Self::normalise(self.p, self.v, self.unit.clone(), abs);
        }
        let base = self.v.min(o.v);
        let lift = |x: &Self| &x.unit * pow(x.p, (x.v - base) as u32);
        Self::normalise(self.p, base, lift(self) + lift(o), abs)
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let m = pow(self.p, self.prec);
        PadicNumber {
            p: self.p,
            v: self.v,
            unit: (m - &self.unit).mod_floor(&pow(self.p, self.prec)),
            prec: self.prec,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        match (self.is_zero(), o.is_zero()) {
            (true, true) => Self::zero_mod(self.p, self.v.saturating_add(o.v).min(EXACT_ZERO)),
            (true, false) => Self::zero_mod(self.p, (self.v + o.v).min(EXACT_ZERO)),
            (false, true) => Self::zero_mod(self.p, (self.v + o.v).min(EXACT_ZERO)),
            (false, false) => {
                let prec = self.prec.min(o.prec);
                let m = pow(self.p, prec);
                PadicNumber {
                    p: self.p,
                    v: self.v + o.v,
                    unit: (&self.unit * &o.unit).mod_floor(&m),
                    prec,
                }
            }
        }
    }

    pub fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::InsufficientPrecision(format!(
                "cannot invert {self:?}"
            )));
        }
        let m = pow(self.p, self.prec);
        let unit = mod_inverse(&self.unit, &m).expect("unit part is coprime to p");
        Ok(PadicNumber {
            p: self.p,
            v: -self.v,
            unit,
            prec: self.prec,
        })
    }

    /// Exact product with an integer.
    pub fn mul_int(&self, n: i64) -> Self {
        if n == 0 {
            return Self::zero(self.p);
        }
        let (vn, m) = split_p(&BigInt::from(n), self.p);
        if self.is_zero() {
            return self.shift(vn);
        }
        let modulus = pow(self.p, self.prec);
        PadicNumber {
            p: self.p,
            v: self.v + vn,
            unit: (&self.unit * m).mod_floor(&modulus),
            prec: self.prec,
        }
    }

    /// Multiply by `p^k`.
    pub fn shift(&self, k: i64) -> Self {
        let mut out = self.clone();
        if !(out.is_zero() && out.v >= EXACT_ZERO / 2) {
            out.v += k;
        }
        out
    }

    /// Reduce precision to at most `prec` relative digits.
    pub fn truncate(&self, prec: u32) -> Self {
        if self.is_zero() || prec >= self.prec {
            return self.clone();
        }
        PadicNumber {
            p: self.p,
            v: self.v,
            unit: self.unit.mod_floor(&pow(self.p, prec)),
            prec,
        }
    }

    /// Residue modulo `p` of an element of `Z_p`.
    pub fn residue(&self) -> Result<u64> {
        if self.is_zero() {
            if self.v >= 1 {
                return Ok(0);
            }
            return Err(Error::InsufficientPrecision(format!(
                "{self:?} is not known modulo p"
            )));
        }
        if self.v < 0 {
            return Err(precondition!("{self:?} is not p-integral"));
        }
        if self.v > 0 {
            return Ok(0);
        }
        Ok((&self.unit % BigInt::from(self.p))
            .to_u64()
            .expect("residue fits"))
    }

    /// The canonical representative of `self mod p^n` in `Z[1/p] ∩ [0, p^n)`.
    pub fn truncation(&self, n: i64) -> Result<BigRational> {
        if self.absolute_precision() < n {
            return Err(Error::InsufficientPrecision(format!(
                "{self:?} is not known modulo p^{n}"
            )));
        }
        if self.is_zero() || self.v >= n {
            return Ok(BigRational::zero());
        }
        let digits = (n - self.v) as u32;
        let m = self.unit.mod_floor(&pow(self.p, digits));
        Ok(scale(BigRational::from_integer(m), self.p, self.v))
    }

    /// Equality modulo the smaller absolute precision.
    pub fn approx_eq(&self, o: &Self) -> bool {
        self.sub(o).is_zero()
    }
}

/// `x · p^k` for a rational.
pub fn scale(x: BigRational, p: u64, k: i64) -> BigRational {
    if k >= 0 {
        x * BigRational::from_integer(pow(p, k as u32))
    } else {
        x / BigRational::from_integer(pow(p, (-k) as u32))
    }
}

/// Element `x + yα` of `Q_{p²}`.
#[derive(Clone, PartialEq, Eq)]
pub struct Qp2Element {
    x: PadicNumber,
    y: PadicNumber,
    u: i64,
}

impl fmt::Debug for Qp2Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:?}] + [{:?}]·α", self.x, self.y)
    }
}

impl Qp2Element {
    pub fn new(x: PadicNumber, y: PadicNumber) -> Result<Self> {
        let p = x.p;
        if p != y.p || p == 2 || !is_prime(p) {
            return Err(Error::InvalidInput(format!(
                "Q_p² needs an odd prime, got {p}"
            )));
        }
        Ok(Qp2Element {
            x,
            y,
            u: least_nonresidue(p) as i64,
        })
    }

    /// `α` itself.
    pub fn alpha(p: u64, prec: u32) -> Result<Self> {
        Self::new(PadicNumber::zero(p), PadicNumber::from_int(p, 1, prec))
    }

    pub fn from_padic(x: PadicNumber) -> Result<Self> {
        let p = x.p;
        Self::new(x, PadicNumber::zero(p))
    }

    pub fn x(&self) -> &PadicNumber {
        &self.x
    }

    pub fn y(&self) -> &PadicNumber {
        &self.y
    }

    pub fn u(&self) -> i64 {
        self.u
    }

    pub fn prime(&self) -> u64 {
        self.x.p
    }

    /// Smallest relative precision of the two coordinates that are non-zero.
    pub fn precision(&self) -> u32 {
        match (self.x.is_zero(), self.y.is_zero()) {
            (true, true) => 0,
            (true, false) => self.y.prec,
            (false, true) => self.x.prec,
            (false, false) => self.x.prec.min(self.y.prec),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Qp2Element {
            x: self.x.add(&o.x),
            y: self.y.add(&o.y),
            u: self.u,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Qp2Element {
            x: self.x.sub(&o.x),
            y: self.y.sub(&o.y),
            u: self.u,
        }
    }

    pub fn neg(&self) -> Self {
        Qp2Element {
            x: self.x.neg(),
            y: self.y.neg(),
            u: self.u,
        }
    }

    pub fn conj(&self) -> Self {
        Qp2Element {
            x: self.x.clone(),
            y: self.y.neg(),
            u: self.u,
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let x = self.x.mul(&o.x).add(&self.y.mul(&o.y).mul_int(self.u));
        let y = self.x.mul(&o.y).add(&self.y.mul(&o.x));
        Qp2Element { x, y, u: self.u }
    }

    pub fn scale(&self, c: &PadicNumber) -> Self {
        Qp2Element {
            x: self.x.mul(c),
            y: self.y.mul(c),
            u: self.u,
        }
    }

    /// `x² − u y²`.
    pub fn norm(&self) -> PadicNumber {
        let uy2 = self.y.mul(&self.y).mul_int(self.u);
        self.x.mul(&self.x).sub(&uy2)
    }

    pub fn inv(&self) -> Result<Self> {
        let n = self.norm().inv()?;
        Ok(self.conj().scale(&n))
    }

    /// Is this in `Q_{p²} ∖ Q_p` at the working precision?
    pub fn is_unramified_point(&self) -> bool {
        !self.y.is_zero()
    }

    /// Equality up to the working precision of both sides.
    pub fn approx_eq(&self, o: &Self) -> bool {
        self.x.approx_eq(&o.x) && self.y.approx_eq(&o.y)
    }
}

/// A 2×2 matrix over `Z[1/p]` (exact rationals).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RMat2 {
    pub a: BigRational,
    pub b: BigRational,
    pub c: BigRational,
    pub d: BigRational,
}

impl RMat2 {
    pub fn new(a: BigRational, b: BigRational, c: BigRational, d: BigRational) -> Self {
        RMat2 { a, b, c, d }
    }

    pub fn identity() -> Self {
        Self::from_int(&IMat2::IDENTITY)
    }

    pub fn from_int(m: &IMat2) -> Self {
        let r = |x: i128| BigRational::from_integer(BigInt::from(x));
        RMat2::new(r(m.a), r(m.b), r(m.c), r(m.d))
    }

    pub fn det(&self) -> BigRational {
        &self.a * &self.d - &self.b * &self.c
    }

    pub fn mul(&self, o: &RMat2) -> RMat2 {
        RMat2::new(
            &self.a * &o.a + &self.b * &o.c,
            &self.a * &o.b + &self.b * &o.d,
            &self.c * &o.a + &self.d * &o.c,
            &self.c * &o.b + &self.d * &o.d,
        )
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    /// Integer matrix, when all entries are integers.
    pub fn to_int(&self) -> Option<IMat2> {
        let e = |x: &BigRational| {
            if x.is_integer() {
                x.to_integer().to_i128()
            } else {
                None
            }
        };
        Some(IMat2::new(
            e(&self.a)?,
            e(&self.b)?,
            e(&self.c)?,
            e(&self.d)?,
        ))
    }

    /// Möbius action on a real number; `None` at the pole.
    pub fn apply_f64(&self, z: num_complex::Complex64) -> num_complex::Complex64 {
        let f = |x: &BigRational| x.to_f64().expect("finite entry");
        (z * f(&self.a) + f(&self.b)) / (z * f(&self.c) + f(&self.d))
    }
}

/// `√d_K ∈ Q_{p²}` for `p` inert: `c·α` with `c² = d_K/u`, `c ≡` the least
/// positive square root modulo `p`, Hensel-lifted to `prec` digits.
pub fn embed_sqrt_dk(field: &QuadField, p: u64, prec: u32) -> Result<Qp2Element> {
    if p == 2 || !is_prime(p) {
        return Err(Error::InvalidInput(format!("p = {p} must be an odd prime")));
    }
    if prec < 2 {
        return Err(Error::InvalidInput(format!(
            "precision {prec} is below the minimum of 2"
        )));
    }
    let d_k = field.d_k() as i128;
    match kronecker_prime(d_k, p) {
        -1 => {}
        0 => return Err(precondition!("{p} ramifies in Q(sqrt {d_k})")),
        _ => return Err(precondition!("{p} splits in Q(sqrt {d_k})")),
    }
    let u = least_nonresidue(p);
    let m = pow(p, prec);
    let target =
        (BigInt::from(d_k) * mod_inverse(&BigInt::from(u), &m).expect("u is a unit")).mod_floor(&m);
    let t0 = (&target % BigInt::from(p)).to_u64().unwrap();
    let c0 = (1..p)
        .find(|c| c * c % p == t0)
        .expect("d_K/u is a square mod p");
    let mut c = BigInt::from(c0);
    let mut known = 1u32;
    while known < prec {
        known = (2 * known).min(prec);
        let mk = pow(p, known);
        let inv = mod_inverse(&(BigInt::from(2) * &c), &mk).expect("2c is a unit");
        c = (&c - (&c * &c - &target) * inv).mod_floor(&mk);
    }
    Qp2Element::new(PadicNumber::zero(p), PadicNumber::from_bigint(p, &c, prec))
}

/// `(aτ + b)/(cτ + d)` for `g` over `Z[1/p]`.
///
/// Fails with [`Error::InsufficientPrecision`] if the result keeps fewer
/// than `min_prec` relative digits.
pub fn moebius_qp2(g: &RMat2, tau: &Qp2Element, min_prec: u32) -> Result<Qp2Element> {
    if g.det().is_zero() {
        return Err(precondition!("singular matrix"));
    }
    let p = tau.prime();
    let prec = tau.precision().max(min_prec) + 8;
    let lift = |x: &BigRational| PadicNumber::from_rational(p, x, prec);
    let (a, b, c, d) = (lift(&g.a)?, lift(&g.b)?, lift(&g.c)?, lift(&g.d)?);
    let num = tau.scale(&a).add(&Qp2Element::from_padic(b)?);
    let den = tau.scale(&c).add(&Qp2Element::from_padic(d)?);
    let out = num.mul(&den.inv()?);
    let out_prec = out.precision();
    if out_prec < min_prec {
        return Err(Error::InsufficientPrecision(format!(
            "Möbius image keeps {out_prec} digits, need {min_prec}"
        )));
    }
    Ok(out)
}

/// Elements of `F_{p²} = F_p(ᾱ)`, `ᾱ² = u`, used for fast residue tracking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fp2 {
    pub x: u64,
    pub y: u64,
}

/// Arithmetic context for [`Fp2`].
#[derive(Debug, Clone, Copy)]
pub struct Fp2Field {
    p: u64,
    u: u64,
}

impl Fp2Field {
    pub fn new(p: u64) -> Result<Self> {
        if p == 2 || !is_prime(p) {
            return Err(Error::InvalidInput(format!(
                "F_p² needs an odd prime, got {p}"
            )));
        }
        Ok(Fp2Field {
            p,
            u: least_nonresidue(p),
        })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    #[inline]
    fn red(&self, n: i128) -> u64 {
        n.rem_euclid(self.p as i128) as u64
    }

    pub fn elem(&self, x: i128, y: i128) -> Fp2 {
        Fp2 {
            x: self.red(x),
            y: self.red(y),
        }
    }

    #[inline]
    pub fn add(&self, a: Fp2, b: Fp2) -> Fp2 {
        Fp2 {
            x: (a.x + b.x) % self.p,
            y: (a.y + b.y) % self.p,
        }
    }

    #[inline]
    pub fn mul(&self, a: Fp2, b: Fp2) -> Fp2 {
        let p = self.p;
        Fp2 {
            x: (a.x * b.x + self.u * (a.y * b.y % p)) % p,
            y: (a.x * b.y + a.y * b.x) % p,
        }
    }

    #[inline]
    fn inv_fp(&self, a: u64) -> u64 {
        crate::arith::mod_pow(a as i128, self.p as i128 - 2, self.p as i128) as u64
    }

    pub fn inv(&self, a: Fp2) -> Option<Fp2> {
        let p = self.p;
        let n = (a.x * a.x % p + p - self.u * (a.y * a.y % p) % p) % p;
        if n == 0 {
            return None;
        }
        let ni = self.inv_fp(n);
        Some(Fp2 {
            x: a.x * ni % p,
            y: (p - a.y) % p * ni % p,
        })
    }

    /// Möbius action of an integer matrix invertible mod `p`; `None` at the pole.
    #[inline]
    pub fn moebius(&self, g: &IMat2, t: Fp2) -> Option<Fp2> {
        let num = self.add(self.mul(self.elem(g.a, 0), t), self.elem(g.b, 0));
        let den = self.add(self.mul(self.elem(g.c, 0), t), self.elem(g.d, 0));
        Some(self.mul(num, self.inv(den)?))
    }

    /// `(x̄, ȳ)` with `ȳ ≠ 0`, numbered `x̄ + p·(ȳ − 1)` in `0..p²−p`.
    pub fn class_index(&self, t: Fp2) -> Option<usize> {
        if t.y == 0 {
            None
        } else {
            Some((t.x + self.p * (t.y - 1)) as usize)
        }
    }

    pub fn class_count(&self) -> usize {
        (self.p * self.p - self.p) as usize
    }
}
