//! Real quadratic fields over Q and their monogenic orders.
//!
//! Every element of the ring of integers is stored exactly as
//! `(x + y*sqrt(d_K)) / 2` with integers `x, y` satisfying
//! `x ≡ y*d_K (mod 2)`. With `omega_K = (t + sqrt(d_K))/2` the order of
//! conductor `f` is `O_f = Z[f*omega_K]`, of discriminant `f^2 d_K`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::{is_squarefree, ln_bigint};
use crate::error::{precondition, Error, Result};

/// Default cap on continued-fraction steps in the unit search.
pub const DEFAULT_UNIT_SEARCH_STEPS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuadField {
    squarefree: i64,
    d_k: i64,
    t: i64,
}

impl QuadField {
    /// `Q(sqrt(D))` for a squarefree `D > 1`.
    pub fn new(squarefree: i64) -> Result<Self> {
        if squarefree <= 1 {
            return Err(Error::InvalidInput(format!(
                "D = {squarefree} must exceed 1"
            )));
        }
        if !is_squarefree(squarefree as i128) {
            return Err(Error::InvalidInput(format!(
                "D = {squarefree} is not squarefree"
            )));
        }
        let (d_k, t) = if squarefree.rem_euclid(4) == 1 {
            (squarefree, 1)
        } else {
            (4 * squarefree, 0)
        };
        Ok(QuadField { squarefree, d_k, t })
    }

    /// The field whose fundamental discriminant is `d_k`.
    pub fn from_discriminant(d_k: i64) -> Result<Self> {
        if !crate::arith::is_fundamental_discriminant(d_k as i128) || d_k < 0 {
            return Err(Error::InvalidInput(format!(
                "{d_k} is not a positive fundamental discriminant"
            )));
        }
        let d = if d_k % 4 == 0 { d_k / 4 } else { d_k };
        Self::new(d)
    }

    pub fn squarefree(&self) -> i64 {
        self.squarefree
    }

    /// Fundamental discriminant `d_K = omega_{K,0}^2`.
    pub fn d_k(&self) -> i64 {
        self.d_k
    }

    /// Trace of `omega_K`.
    pub fn t(&self) -> i64 {
        self.t
    }

    /// `omega_K = (t + sqrt(d_K))/2`.
    pub fn omega(&self) -> QuadElement {
        QuadElement::from_halves(*self, self.t.into(), 1.into())
    }

    /// `omega_{K,0} = sqrt(d_K)`.
    pub fn omega0(&self) -> QuadElement {
        QuadElement::from_halves(*self, 0.into(), 2.into())
    }

    pub fn sqrt_dk(&self) -> f64 {
        (self.d_k as f64).sqrt()
    }

    pub fn order(&self, f: i64) -> Result<Order> {
        Order::new(*self, f)
    }
}

/// An algebraic integer `(x + y*sqrt(d_K))/2` of a real quadratic field.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QuadElement {
    field: QuadField,
    x: BigInt,
    y: BigInt,
}

impl fmt::Debug for QuadElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}*sqrt({}))/2", self.x, self.y, self.field.d_k)
    }
}

impl QuadElement {
    /// Build `(x + y*sqrt(d_K))/2`. Panics on a non-integral pair; use
    /// [`QuadElement::try_from_halves`] for untrusted input.
    pub fn from_halves(field: QuadField, x: BigInt, y: BigInt) -> Self {
        Self::try_from_halves(field, x, y).expect("not an algebraic integer")
    }

    pub fn try_from_halves(field: QuadField, x: BigInt, y: BigInt) -> Result<Self> {
        let parity = (&x - &y * field.d_k).is_even();
        if !parity {
            return Err(Error::InvalidInput(format!(
                "({x} + {y}*sqrt({}))/2 is not integral",
                field.d_k
            )));
        }
        Ok(QuadElement { field, x, y })
    }

    /// `m + n*sqrt(d_K)`.
    pub fn from_int_sqrt(field: QuadField, m: i64, n: i64) -> Self {
        Self::from_halves(field, BigInt::from(2 * m), BigInt::from(2 * n))
    }

    pub fn integer(field: QuadField, m: i64) -> Self {
        Self::from_halves(field, BigInt::from(2 * m), BigInt::zero())
    }

    pub fn field(&self) -> QuadField {
        self.field
    }

    /// Doubled rational part: the trace.
    pub fn x(&self) -> &BigInt {
        &self.x
    }

    /// Doubled coefficient of `sqrt(d_K)`.
    pub fn y(&self) -> &BigInt {
        &self.y
    }

    pub fn trace(&self) -> BigInt {
        self.x.clone()
    }

    pub fn norm(&self) -> BigInt {
        (&self.x * &self.x - &self.y * &self.y * self.field.d_k) / 4
    }

    pub fn conj(&self) -> Self {
        QuadElement {
            field: self.field,
            x: self.x.clone(),
            y: -&self.y,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        let x = self.x.to_f64().unwrap_or(f64::NAN);
        let y = self.y.to_f64().unwrap_or(f64::NAN);
        (x + y * self.field.sqrt_dk()) / 2.0
    }

    /// Natural log of a unit `u > 1`, robust for enormous coefficients.
    pub fn ln_unit(&self) -> f64 {
        // For a unit u > 1 with |conj(u)| < 1, u = x - conj(u) ≈ x with error
        // below 1, so ln(u) ≈ ln(x) once x is large.
        let small = self.to_f64();
        if small.is_finite() && small < 1e15 {
            return small.ln();
        }
        ln_bigint(&self.x)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = QuadElement::integer(self.field, 1);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Is this element (a real number) positive? Exact.
    pub fn is_positive(&self) -> bool {
        // sign of x + y*sqrt(d)
        let xs = self.x.signum();
        let ys = self.y.signum();
        if ys.is_zero() {
            return xs.is_positive();
        }
        if xs.is_zero() {
            return ys.is_positive();
        }
        if xs == ys {
            return xs.is_positive();
        }
        // opposite signs: compare x^2 with y^2 d
        let lhs = &self.x * &self.x;
        let rhs = &self.y * &self.y * self.field.d_k;
        if xs.is_positive() {
            lhs > rhs
        } else {
            rhs > lhs
        }
    }

    pub fn is_totally_positive(&self) -> bool {
        self.is_positive() && self.conj().is_positive()
    }
}

impl<'a> Add<&'a QuadElement> for &'a QuadElement {
    type Output = QuadElement;
    fn add(self, o: &QuadElement) -> QuadElement {
        assert_eq!(self.field, o.field);
        QuadElement {
            field: self.field,
            x: &self.x + &o.x,
            y: &self.y + &o.y,
        }
    }
}

impl<'a> Sub<&'a QuadElement> for &'a QuadElement {
    type Output = QuadElement;
    fn sub(self, o: &QuadElement) -> QuadElement {
        assert_eq!(self.field, o.field);
        QuadElement {
            field: self.field,
            x: &self.x - &o.x,
            y: &self.y - &o.y,
        }
    }
}

impl<'a> Mul<&'a QuadElement> for &'a QuadElement {
    type Output = QuadElement;
    fn mul(self, o: &QuadElement) -> QuadElement {
        assert_eq!(self.field, o.field);
        let d = self.field.d_k;
        let x = &self.x * &o.x + &self.y * &o.y * d;
        let y = &self.x * &o.y + &self.y * &o.x;
        // Both are even for algebraic integers.
        QuadElement {
            field: self.field,
            x: x / 2,
            y: y / 2,
        }
    }
}

impl Neg for &QuadElement {
    type Output = QuadElement;
    fn neg(self) -> QuadElement {
        QuadElement {
            field: self.field,
            x: -&self.x,
            y: -&self.y,
        }
    }
}

/// Split an element as `(a + y)/2` with `a` rational-integer and `y` of trace zero.
pub fn trace_zero_decomposition(elem: &QuadElement) -> (BigInt, QuadElement) {
    let a = elem.trace();
    let y = QuadElement {
        field: elem.field,
        x: BigInt::zero(),
        y: &elem.y * 2,
    };
    (a, y)
}

/// The order `O_f = Z[f*omega_K]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Order {
    field: QuadField,
    f: i64,
}

impl Order {
    pub fn new(field: QuadField, f: i64) -> Result<Self> {
        if f < 1 {
            return Err(Error::InvalidInput(format!(
                "conductor {f} must be positive"
            )));
        }
        Ok(Order { field, f })
    }

    pub fn field(&self) -> QuadField {
        self.field
    }

    pub fn conductor(&self) -> i64 {
        self.f
    }

    /// `f^2 d_K`.
    pub fn discriminant(&self) -> i64 {
        self.f * self.f * self.field.d_k
    }

    /// `O_f ⊆ O_g` iff `g | f`.
    pub fn is_suborder_of(&self, other: &Order) -> bool {
        self.field == other.field && self.f % other.f == 0
    }

    pub fn contains(&self, e: &QuadElement) -> bool {
        // (X + Y sqrt d)/2 = m + n f omega  <=>  f | Y and X ≡ Y t (mod 2)
        let f = BigInt::from(self.f);
        e.y.is_multiple_of(&f) && (&e.x - &e.y * self.field.t).is_even()
    }

    /// `f * omega_K`, the generator of the order over Z.
    pub fn generator(&self) -> QuadElement {
        let w = self.field.omega();
        QuadElement {
            field: self.field,
            x: w.x * self.f,
            y: w.y * self.f,
        }
    }
}

/// Continued-fraction search for the fundamental unit `eps > 1` of `O_K`.
///
/// Expands `omega_K` and stops at the first convergent `h/k` with
/// `N(h - k*omega_K) = ±1`; the unit is the conjugate-side element
/// `h - k*conj(omega_K)`.
pub fn fundamental_unit(field: QuadField) -> Result<QuadElement> {
    fundamental_unit_bounded(field, DEFAULT_UNIT_SEARCH_STEPS)
}

pub fn fundamental_unit_bounded(field: QuadField, max_steps: u64) -> Result<QuadElement> {
    let d = BigInt::from(field.d_k);
    let sqrt_floor = d.sqrt();
    let t = BigInt::from(field.t);
    // omega = (P + sqrt d)/Q with Q | d - P^2
    let mut p_cf = t.clone();
    let mut q_cf = BigInt::from(2);
    let (mut h_prev, mut h) = (BigInt::zero(), BigInt::one());
    let (mut k_prev, mut k) = (BigInt::one(), BigInt::zero());
    let norm_omega = (&t * &t - &d) / 4;
    for _ in 0..max_steps {
        let a = (&p_cf + &sqrt_floor).div_floor(&q_cf);
        let h_next = &a * &h + &h_prev;
        let k_next = &a * &k + &k_prev;
        h_prev = std::mem::replace(&mut h, h_next);
        k_prev = std::mem::replace(&mut k, k_next);
        let n: BigInt = &h * &h - &t * &h * &k + &k * &k * &norm_omega;
        if n.abs().is_one() {
            // h - k * conj(omega) = (2h - k t + k sqrt d)/2
            let unit = QuadElement::from_halves(field, BigInt::from(2) * &h - &k * &t, k.clone());
            return Ok(unit);
        }
        p_cf = &a * &q_cf - &p_cf;
        q_cf = (&d - &p_cf * &p_cf) / &q_cf;
    }
    Err(Error::BoundExhausted(format!(
        "no unit of Q(sqrt {}) within {max_steps} continued-fraction steps",
        field.squarefree
    )))
}

/// Generator `eps+ > 1` of the totally positive units of `O_f` (modulo ±1).
///
/// It is the least power of the fundamental unit lying in `O_f` with norm +1.
pub fn totally_positive_fundamental_unit(order: &Order) -> Result<QuadElement> {
    totally_positive_unit_bounded(order, DEFAULT_UNIT_SEARCH_STEPS)
}

pub fn totally_positive_unit_bounded(order: &Order, max_steps: u64) -> Result<QuadElement> {
    let eps = fundamental_unit_bounded(order.field, max_steps)?;
    // [O_K^x : O_f^x] divides 2f * prod(1 + 1/l) < 6 f^2 + 2 crude bound.
    let cap = (6 * order.f * order.f + 2).min(max_steps as i64);
    let mut acc = eps.clone();
    for _ in 0..cap {
        if order.contains(&acc) && acc.norm().is_one() {
            return Ok(acc);
        }
        acc = &acc * &eps;
    }
    Err(Error::BoundExhausted(format!(
        "no totally positive unit in the order of conductor {} found",
        order.f
    )))
}

/// `2 ln(eps+)` computed from the continued-fraction unit.
pub fn period_length(order: &Order) -> Result<f64> {
    Ok(2.0 * totally_positive_fundamental_unit(order)?.ln_unit())
}

pub(crate) fn check_positive_disc(disc: i64) -> Result<()> {
    if !crate::arith::is_real_quadratic_discriminant(disc as i128) {
        return Err(precondition!(
            "{disc} is not a positive non-square discriminant"
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pell_oracle(d_k: i64, y_max: i64) -> Option<(i64, i64)> {
        // smallest unit (x + y sqrt d)/2 > 1 with x, y > 0: x^2 - d y^2 = ±4
        for y in 1..=y_max {
            for s in [-4i64, 4] {
                let x2 = d_k * y * y + s;
                if x2 <= 0 {
                    continue;
                }
                let x = (x2 as f64).sqrt().round() as i64;
                for xc in [x - 1, x, x + 1] {
                    if xc > 0 && xc * xc == x2 {
                        return Some((xc, y));
                    }
                }
            }
        }
        None
    }

    #[test]
    fn make_field_examples() {
        let f5 = QuadField::new(5).unwrap();
        assert_eq!((f5.d_k(), f5.t()), (5, 1));
        let f3 = QuadField::new(3).unwrap();
        assert_eq!((f3.d_k(), f3.t()), (12, 0));
        let f2 = QuadField::new(2).unwrap();
        assert_eq!((f2.d_k(), f2.t()), (8, 0));
        for f in [f2, f3, f5] {
            let w0 = f.omega0();
            assert_eq!(&w0 * &w0, QuadElement::integer(f, f.d_k()));
        }
    }

    #[test]
    fn make_field_rejects_bad_input() {
        assert!(QuadField::new(1).is_err());
        assert!(QuadField::new(-3).is_err());
        assert!(QuadField::new(12).is_err());
    }

    #[test]
    fn trace_zero_examples() {
        let f5 = QuadField::new(5).unwrap();
        let (a, y) = trace_zero_decomposition(&f5.omega());
        assert_eq!(a, 1.into());
        assert_eq!(y, f5.omega0());

        let (a, y) = trace_zero_decomposition(&QuadElement::integer(f5, 3));
        assert_eq!(a, 6.into());
        assert!(y.is_zero());

        let f2 = QuadField::new(2).unwrap();
        let sqrt2 = QuadElement::from_halves(f2, 0.into(), 1.into());
        assert!((sqrt2.to_f64() - 2f64.sqrt()).abs() < 1e-15);
        let (a, y) = trace_zero_decomposition(&sqrt2);
        assert_eq!(a, 0.into());
        // 2 sqrt 2 = sqrt 8
        assert_eq!(y, f2.omega0());
    }

    #[test]
    fn unit_examples_match_pell_oracle() {
        for (d, x, y) in [(2i64, 2i64, 1i64), (3, 4, 1), (5, 1, 1)] {
            let field = QuadField::new(d).unwrap();
            let eps = fundamental_unit(field).unwrap();
            // stored as (x + y sqrt d_K)/2
            assert_eq!(eps.x(), &BigInt::from(x));
            assert_eq!(eps.y(), &BigInt::from(y));
            assert_eq!(pell_oracle(field.d_k(), 1000), Some((x, y)));
        }
    }

    #[test]
    fn unit_is_minimal_for_small_fields() {
        for d in 2..125i64 {
            let Ok(field) = QuadField::new(d) else {
                continue;
            };
            if field.d_k() >= 500 {
                continue;
            }
            let eps = fundamental_unit(field).unwrap();
            assert!(eps.norm().abs().is_one());
            let (x, y) = pell_oracle(field.d_k(), 1_000_000).expect("oracle bound");
            assert_eq!(
                (eps.x().clone(), eps.y().clone()),
                (BigInt::from(x), BigInt::from(y)),
                "D = {d}"
            );
        }
    }

    #[test]
    fn totally_positive_examples() {
        let cases = [(3i64, 4i64, 1i64), (2, 6, 2), (5, 3, 1)];
        for (d, x, y) in cases {
            let field = QuadField::new(d).unwrap();
            let order = field.order(1).unwrap();
            let u = totally_positive_fundamental_unit(&order).unwrap();
            assert_eq!(
                (u.x().clone(), u.y().clone()),
                (BigInt::from(x), BigInt::from(y))
            );
            assert!(u.is_totally_positive());
        }
    }

    #[test]
    fn unit_of_nonmaximal_order_lies_in_order() {
        let field = QuadField::new(5).unwrap();
        for f in 1..12 {
            let order = field.order(f).unwrap();
            let u = totally_positive_fundamental_unit(&order).unwrap();
            assert!(order.contains(&u));
            assert!(u.is_totally_positive());
            assert!(u.norm().is_one());
        }
    }

    #[test]
    fn bound_exhaustion_is_reported() {
        let field = QuadField::new(94).unwrap();
        assert!(matches!(
            fundamental_unit_bounded(field, 3),
            Err(Error::BoundExhausted(_))
        ));
    }

    #[test]
    fn suborder_relation() {
        let field = QuadField::new(5).unwrap();
        let o6 = field.order(6).unwrap();
        assert!(o6.is_suborder_of(&field.order(3).unwrap()));
        assert!(!o6.is_suborder_of(&field.order(4).unwrap()));
        assert!(o6.contains(&o6.generator()));
        assert!(!o6.contains(&field.omega()));
    }
}
