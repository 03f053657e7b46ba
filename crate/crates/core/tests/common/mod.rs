//! Seeded generators shared by the integration tests.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shlab::mat::IMat2;
use shlab::padic::{PadicNumber, Qp2Element, RMat2};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A word of length `len` in `S`, `T`, `T⁻¹`.
pub fn sl2_word(rng: &mut ChaCha8Rng, len: usize) -> IMat2 {
    let gens = [IMat2::S, IMat2::T, IMat2::translation(-1)];
    (0..len).fold(IMat2::IDENTITY, |acc, _| acc * gens[rng.gen_range(0..3)])
}

/// `n / (p^k·m)` with `k ∈ [−2, 2]` and `m` prime to `p`.
pub fn p_rational(rng: &mut ChaCha8Rng, p: u64) -> BigRational {
    let n: i64 = rng.gen_range(-60..=60);
    let mut m: i64 = rng.gen_range(1..=12);
    while m % p as i64 == 0 {
        m += 1;
    }
    let k: i32 = rng.gen_range(-2..=2);
    let pk = BigRational::from_integer(BigInt::from(p).pow(k.unsigned_abs()));
    let base = BigRational::new(n.into(), m.into());
    if k >= 0 {
        base * pk
    } else {
        base / pk
    }
}

/// A random element of `GL₂(Q)`.
pub fn gl2(rng: &mut ChaCha8Rng, p: u64) -> RMat2 {
    loop {
        let g = RMat2::new(
            p_rational(rng, p),
            p_rational(rng, p),
            p_rational(rng, p),
            p_rational(rng, p),
        );
        if !g.det().is_zero() {
            return g;
        }
    }
}

/// `x + yα` with rational `x`, `y ≠ 0`, known to `prec` digits.
pub fn unramified_point(rng: &mut ChaCha8Rng, p: u64, prec: u32) -> Qp2Element {
    let x = p_rational(rng, p);
    let mut y = p_rational(rng, p);
    if y.is_zero() {
        y = BigRational::one();
    }
    Qp2Element::new(
        PadicNumber::from_rational(p, &x, prec).unwrap(),
        PadicNumber::from_rational(p, &y, prec).unwrap(),
    )
    .unwrap()
}
