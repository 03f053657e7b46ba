//! 2×2 integer matrices acting by Möbius transformations.

use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct IMat2 {
    pub a: i128,
    pub b: i128,
    pub c: i128,
    pub d: i128,
}

impl fmt::Debug for IMat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

impl IMat2 {
    pub const IDENTITY: IMat2 = IMat2 {
        a: 1,
        b: 0,
        c: 0,
        d: 1,
    };
    /// `z -> -1/z`.
    pub const S: IMat2 = IMat2 {
        a: 0,
        b: -1,
        c: 1,
        d: 0,
    };
    /// `z -> z + 1`.
    pub const T: IMat2 = IMat2 {
        a: 1,
        b: 1,
        c: 0,
        d: 1,
    };

    pub const fn new(a: i128, b: i128, c: i128, d: i128) -> Self {
        IMat2 { a, b, c, d }
    }

    pub fn translation(k: i128) -> Self {
        IMat2::new(1, k, 0, 1)
    }

    pub fn det(&self) -> i128 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> i128 {
        self.a + self.d
    }

    /// Adjugate; equals the inverse when `det = 1`.
    pub fn adj(&self) -> Self {
        IMat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn neg(&self) -> Self {
        IMat2::new(-self.a, -self.b, -self.c, -self.d)
    }

    /// Equality in PSL₂, i.e. up to sign.
    pub fn eq_projective(&self, other: &IMat2) -> bool {
        self == other || *self == other.neg()
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        let (a, b, c, d) = (self.a as f64, self.b as f64, self.c as f64, self.d as f64);
        (z * a + b) / (z * c + d)
    }

    /// Möbius action on a real point; `None` at the pole.
    pub fn apply_real(&self, x: f64) -> Option<f64> {
        let den = self.c as f64 * x + self.d as f64;
        if den == 0.0 {
            None
        } else {
            Some((self.a as f64 * x + self.b as f64) / den)
        }
    }

    /// Product, or `None` on overflow.
    pub fn checked_mul(&self, o: &IMat2) -> Option<IMat2> {
        let dot =
            |x: i128, y: i128, z: i128, w: i128| x.checked_mul(y)?.checked_add(z.checked_mul(w)?);
        Some(IMat2::new(
            dot(self.a, o.a, self.b, o.c)?,
            dot(self.a, o.b, self.b, o.d)?,
            dot(self.c, o.a, self.d, o.c)?,
            dot(self.c, o.b, self.d, o.d)?,
        ))
    }

    pub fn entries(&self) -> [i128; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

impl Mul for IMat2 {
    type Output = IMat2;
    fn mul(self, o: IMat2) -> IMat2 {
        IMat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_satisfy_modular_relations() {
        let s2 = IMat2::S * IMat2::S;
        assert!(s2.eq_projective(&IMat2::IDENTITY));
        let st = IMat2::S * IMat2::T;
        assert!((st * st * st).eq_projective(&IMat2::IDENTITY));
    }

    #[test]
    fn action_is_a_left_action() {
        let g = IMat2::new(2, 1, 1, 1);
        let h = IMat2::new(1, -3, 0, 1);
        let z = Complex64::new(0.3, 0.7);
        let lhs = (g * h).apply(z);
        let rhs = g.apply(h.apply(z));
        assert!((lhs - rhs).norm() < 1e-14);
        assert_eq!((g * g.adj()), IMat2::IDENTITY);
    }
}
