//! Small exact integer helpers shared by the number-theoretic modules.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

pub fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd3(a: i128, b: i128, c: i128) -> i128 {
    gcd(gcd(a, b), c)
}

/// Extended gcd: returns `(g, u, v)` with `g = u*a + v*b` and `g >= 0`.
pub fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    let (mut old_r, mut r) = (a, b);
    let (mut old_s, mut s) = (1i128, 0i128);
    let (mut old_t, mut t) = (0i128, 1i128);
    while r != 0 {
        let q = old_r.div_euclid(r);
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
        (old_t, t) = (t, old_t - q * t);
    }
    if old_r < 0 {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Floor of the square root of a non-negative integer.
pub fn isqrt(n: i128) -> i128 {
    assert!(n >= 0, "isqrt of negative number");
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as i128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

pub fn is_square(n: i128) -> bool {
    n >= 0 && {
        let r = isqrt(n);
        r * r == n
    }
}

pub fn is_squarefree(n: i128) -> bool {
    let n = n.abs();
    if n == 0 {
        return false;
    }
    let mut m = n;
    let mut d = 2i128;
    while d * d <= m {
        if m % d == 0 {
            m /= d;
            if m % d == 0 {
                return false;
            }
        }
        d += 1;
    }
    true
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Kronecker symbol `(d | p)` for a prime `p` (including `p = 2`).
pub fn kronecker_prime(d: i128, p: u64) -> i32 {
    let pi = p as i128;
    if d.rem_euclid(pi) == 0 {
        return 0;
    }
    if p == 2 {
        return match d.rem_euclid(8) {
            1 | 7 => 1,
            _ => -1,
        };
    }
    // Euler's criterion.
    let r = mod_pow(d.rem_euclid(pi), (pi - 1) / 2, pi);
    if r == 1 {
        1
    } else {
        -1
    }
}

pub fn mod_pow(mut base: i128, mut exp: i128, m: i128) -> i128 {
    let mut acc = 1i128 % m;
    base = base.rem_euclid(m);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

/// Least positive quadratic non-residue modulo an odd prime.
pub fn least_nonresidue(p: u64) -> u64 {
    (2..p)
        .find(|&u| kronecker_prime(u as i128, p) == -1)
        .expect("odd prime has a non-residue")
}

/// Is `d` a discriminant of a real quadratic order (positive, non-square, 0 or 1 mod 4)?
pub fn is_real_quadratic_discriminant(d: i128) -> bool {
    d > 0 && (d.rem_euclid(4) == 0 || d.rem_euclid(4) == 1) && !is_square(d)
}

/// Decompose a real quadratic discriminant as `f^2 * d_K` with `d_K` fundamental.
pub fn split_discriminant(disc: i128) -> Option<(i128, i128)> {
    if !is_real_quadratic_discriminant(disc) {
        return None;
    }
    let mut best = (disc, 1i128);
    let mut f = 1i128;
    while f * f <= disc {
        if disc % (f * f) == 0 {
            let d = disc / (f * f);
            if is_fundamental_discriminant(d) {
                best = (d, f);
            }
        }
        f += 1;
    }
    Some(best)
}

pub fn is_fundamental_discriminant(d: i128) -> bool {
    if d == 1 || d == 0 {
        return false;
    }
    match d.rem_euclid(4) {
        1 => is_squarefree(d),
        0 => {
            let m = d / 4;
            matches!(m.rem_euclid(4), 2 | 3) && is_squarefree(m)
        }
        _ => false,
    }
}

/// Positive divisors of `n > 0`, unsorted.
pub fn divisors(n: i128) -> Vec<i128> {
    let n = n.abs();
    let mut out = Vec::new();
    let mut d = 1i128;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            if d * d != n {
                out.push(n / d);
            }
        }
        d += 1;
    }
    out
}

/// Smallest-prime-factor table for fast factorisation of many small integers.
pub struct SpfSieve {
    spf: Vec<u32>,
}

impl SpfSieve {
    pub fn new(limit: usize) -> Self {
        let mut spf = vec![0u32; limit + 1];
        for i in 2..=limit {
            if spf[i] == 0 {
                let mut j = i;
                while j <= limit {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        SpfSieve { spf }
    }

    pub fn limit(&self) -> usize {
        self.spf.len() - 1
    }

    /// Positive divisors of `n`, falling back to trial division beyond the table.
    pub fn divisors(&self, n: u64) -> Vec<i128> {
        if n as usize > self.limit() || n == 0 {
            return divisors(n as i128);
        }
        let mut out = vec![1i128];
        let mut m = n as usize;
        while m > 1 {
            let q = self.spf[m] as usize;
            let mut e = 0;
            while m % q == 0 {
                m /= q;
                e += 1;
            }
            let len = out.len();
            let mut pw = 1i128;
            for _ in 0..e {
                pw *= q as i128;
                for i in 0..len {
                    out.push(out[i] * pw);
                }
            }
        }
        out
    }
}

/// Natural logarithm of a (possibly enormous) positive big integer.
pub fn ln_bigint(x: &BigInt) -> f64 {
    assert!(x.is_positive(), "ln of non-positive integer");
    let bits = x.bits();
    if bits < 1000 {
        if let Some(v) = x.to_f64() {
            if v.is_finite() {
                return v.ln();
            }
        }
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// `floor(sqrt(n))` for big integers.
pub fn isqrt_big(n: &BigInt) -> BigInt {
    assert!(!n.is_negative());
    if n.is_zero() {
        return BigInt::zero();
    }
    n.sqrt()
}
