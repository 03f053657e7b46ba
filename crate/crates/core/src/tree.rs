//! The Bruhat–Tits tree of `PGL₂(Q_p)` with vertices modelled as balls.
//!
//! The vertex `(n, x)` is the ball `B(x, p^{−n}) ⊂ Q_p`; under the usual
//! dictionary it is the homothety class of the lattice spanned by the
//! columns `(p^n, 0)ᵗ` and `(x, 1)ᵗ`. The base vertex `v₀ = (0, 0)` is the
//! class of `Z_p²`. Neighbours of `(n, x)` are its parent ball `(n − 1, x)`
//! and its `p` children `(n + 1, x + i·p^n)`.
//!
//! A point `τ = x + yα` of the unramified locus reduces to `(v(y), x mod p^{v(y)})`:
//! the distance from `τ` to `Q_p` is `|y|`, attained at `x`.
//!
//! Matrices act on the left on both lattices and points, so
//! `red(g·τ) = g·red(τ)` is the equivariance contract checked by the tests.

use std::collections::{HashSet, VecDeque};
use std::fmt;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{precondition, Error, Result};
use crate::padic::{scale, valuation_rational, Qp2Element, RMat2};

/// Canonical representative of `x mod p^n Z_p` in `Z[1/p] ∩ [0, p^n)`.
pub fn canonical_center(x: &BigRational, n: i64, p: u64) -> BigRational {
    if x.is_zero() {
        return BigRational::zero();
    }
    let pb = BigInt::from(p);
    let mut e = 0i64;
    let mut den = x.denom().clone();
    while (&den % &pb).is_zero() {
        den /= &pb;
        e += 1;
    }
    let top = n + e;
    if top <= 0 {
        return BigRational::zero();
    }
    let modulus = num_traits::pow(pb, top as usize);
    let inv = den.mod_floor(&modulus).extended_gcd(&modulus).x;
    let m = (x.numer() * inv).mod_floor(&modulus);
    scale(BigRational::from_integer(m), p, -e)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TreeVertex {
    p: u64,
    n: i64,
    x: BigRational,
}

impl fmt::Debug for TreeVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B({}, {}^{})", self.x, self.p, -self.n)
    }
}

impl TreeVertex {
    /// The ball `B(x, p^{−n})`; `x` is canonicalised.
    pub fn new(p: u64, n: i64, x: &BigRational) -> Self {
        TreeVertex {
            p,
            n,
            x: canonical_center(x, n, p),
        }
    }

    /// `v₀ = B(0, 1)`.
    pub fn base(p: u64) -> Self {
        TreeVertex {
            p,
            n: 0,
            x: BigRational::zero(),
        }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn level(&self) -> i64 {
        self.n
    }

    pub fn center(&self) -> &BigRational {
        &self.x
    }

    /// `n mod 2`; `v₀` is even.
    pub fn parity(&self) -> u8 {
        self.n.rem_euclid(2) as u8
    }

    pub fn is_base(&self) -> bool {
        self.n == 0 && self.x.is_zero()
    }

    /// Parent ball and the `p` child balls.
    pub fn neighbours(&self) -> Vec<TreeVertex> {
        let mut out = vec![TreeVertex::new(self.p, self.n - 1, &self.x)];
        let step = scale(BigRational::one(), self.p, self.n);
        for i in 0..self.p {
            let c = &self.x + &step * BigRational::from_integer(BigInt::from(i));
            out.push(TreeVertex::new(self.p, self.n + 1, &c));
        }
        out
    }
}

/// The reduction map `red: H^unr_{p²} → vertices`.
pub fn reduce_point(tau: &Qp2Element) -> Result<TreeVertex> {
    let p = tau.prime();
    if !tau.is_unramified_point() {
        return Err(precondition!(
            "{tau:?} lies in Q_p (or y is lost to precision)"
        ));
    }
    let n = tau.y().valuation();
    let x = tau.x().truncation(n)?;
    Ok(TreeVertex { p, n, x })
}

/// `g·v`, computed on the lattice `⟨(p^n, 0)ᵗ, (x, 1)ᵗ⟩` and brought back
/// to Hermite form by column operations over `Z_p`.
pub fn act_on_vertex(g: &RMat2, v: &TreeVertex) -> Result<TreeVertex> {
    if g.det().is_zero() {
        return Err(precondition!("singular matrix"));
    }
    let p = v.p;
    let pn = scale(BigRational::one(), p, v.n);
    // columns of g·L
    let mut c1 = (&g.a * &pn, &g.c * &pn);
    let mut c2 = (&g.a * &v.x + &g.b, &g.c * &v.x + &g.d);
    let val = |z: &BigRational| {
        if z.is_zero() {
            i64::MAX
        } else {
            valuation_rational(z, p)
        }
    };
    if val(&c1.1) < val(&c2.1) {
        std::mem::swap(&mut c1, &mut c2);
    }
    // now v(c1.1) ≥ v(c2.1) and c2.1 ≠ 0
    if !c1.1.is_zero() {
        let k = &c1.1 / &c2.1;
        c1 = (&c1.0 - &k * &c2.0, BigRational::zero());
    }
    let d = c2.1.clone();
    let a = &c1.0 / &d;
    let b = &c2.0 / &d;
    if a.is_zero() {
        return Err(Error::Inconsistency("degenerate lattice".into()));
    }
    let n = valuation_rational(&a, p);
    Ok(TreeVertex::new(p, n, &b))
}

/// `g = [[1, −a], [0, p^n]]` with `a` the canonical centre of `v`, so that
/// `g·v = v₀` and `det g = p^n > 0`.
pub fn navigate_to_base(v: &TreeVertex) -> RMat2 {
    let one = BigRational::one();
    RMat2::new(
        one.clone(),
        -v.x.clone(),
        BigRational::zero(),
        scale(one, v.p, v.n),
    )
}

/// Residue of `τ` with `red(τ) = v₀` in `P¹(F_{p²}) ∖ P¹(F_p)`, as `(x̄, ȳ)`.
pub fn residue_class(tau: &Qp2Element) -> Result<(u64, u64)> {
    let v = reduce_point(tau)?;
    if !v.is_base() {
        return Err(precondition!(
            "{tau:?} reduces to {v:?}, not the base vertex"
        ));
    }
    Ok((tau.x().residue()?, tau.y().residue()?))
}

/// Graphviz description of the ball of radius `radius` around `v₀`,
/// with even vertices filled.
pub fn neighbourhood_dot(p: u64, radius: usize) -> String {
    let base = TreeVertex::base(p);
    let mut seen: HashSet<TreeVertex> = HashSet::from([base.clone()]);
    let mut queue = VecDeque::from([(base, 0usize)]);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    while let Some((v, dist)) = queue.pop_front() {
        nodes.push(v.clone());
        if dist == radius {
            continue;
        }
        for w in v.neighbours() {
            if seen.insert(w.clone()) {
                edges.push((v.clone(), w.clone()));
                queue.push_back((w, dist + 1));
            }
        }
    }
    let id = |v: &TreeVertex| format!("\"{}|{}\"", v.n, v.x);
    let mut out = String::new();
    writeln!(out, "graph bruhat_tits_p{p} {{").unwrap();
    for v in &nodes {
        let style = if v.parity() == 0 { "filled" } else { "solid" };
        writeln!(
            out,
            "  {} [label=\"n={} x={}\", style={style}];",
            id(v),
            v.n,
            v.x
        )
        .unwrap();
    }
    for (a, b) in &edges {
        writeln!(out, "  {} -- {};", id(a), id(b)).unwrap();
    }
    out.push_str("}\n");
    out
}

/// Is `x` in the ball `v`?
pub fn contains(v: &TreeVertex, x: &BigRational) -> bool {
    let d = x - &v.x;
    d.is_zero() || valuation_rational(&d, v.p) >= v.n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::{moebius_qp2, PadicNumber};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn point(p: u64, x: BigRational, y: BigRational) -> Qp2Element {
        Qp2Element::new(
            PadicNumber::from_rational(p, &x, 40).unwrap(),
            PadicNumber::from_rational(p, &y, 40).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn reduce_point_examples() {
        let v = reduce_point(&Qp2Element::alpha(3, 40).unwrap()).unwrap();
        assert!(v.is_base());
        assert_eq!(v.parity(), 0);
        let v = reduce_point(&point(3, q(2, 1), q(3, 1))).unwrap();
        assert_eq!((v.level(), v.center().clone()), (1, q(2, 1)));
        assert_eq!(v.parity(), 1);
        let v = reduce_point(&point(3, q(0, 1), q(1, 3))).unwrap();
        assert_eq!((v.level(), v.center().clone()), (-1, q(0, 1)));
        assert_eq!(v.parity(), 1);
        let real = Qp2Element::from_padic(PadicNumber::from_int(3, 5, 40)).unwrap();
        assert!(reduce_point(&real).is_err());
    }

    #[test]
    fn act_on_vertex_examples() {
        let p = 5;
        let v0 = TreeVertex::base(p);
        assert_eq!(act_on_vertex(&RMat2::identity(), &v0).unwrap(), v0);
        let diag = RMat2::new(q(1, 1), q(0, 1), q(0, 1), q(5, 1));
        let img = act_on_vertex(&diag, &v0).unwrap();
        let alpha = Qp2Element::alpha(p, 40).unwrap();
        let direct = reduce_point(&moebius_qp2(&diag, &alpha, 20).unwrap()).unwrap();
        assert_eq!(img, direct);
        assert_eq!(img.level(), -1);
        let v = TreeVertex::new(p, 2, &q(7, 1));
        let tr = RMat2::new(q(1, 1), q(3, 1), q(0, 1), q(1, 1));
        assert_eq!(
            act_on_vertex(&tr, &v).unwrap(),
            TreeVertex::new(p, 2, &q(10, 1))
        );
    }

    #[test]
    fn navigator_examples() {
        let p = 3;
        assert!(navigate_to_base(&TreeVertex::base(p)).is_identity());
        let v = TreeVertex::new(p, 2, &q(0, 1));
        let g = navigate_to_base(&v);
        assert_eq!(g, RMat2::new(q(1, 1), q(0, 1), q(0, 1), q(9, 1)));
        let tau = point(p, q(0, 1), q(9, 1));
        let moved = moebius_qp2(&g, &tau, 20).unwrap();
        assert!(reduce_point(&moved).unwrap().is_base());
        let v = TreeVertex::new(p, 0, &q(1, 3));
        let g = navigate_to_base(&v);
        assert_eq!(g, RMat2::new(q(1, 1), q(-1, 3), q(0, 1), q(1, 1)));
        let tau = point(p, q(1, 3), q(1, 1));
        assert!(reduce_point(&moebius_qp2(&g, &tau, 20).unwrap())
            .unwrap()
            .is_base());
        assert!(act_on_vertex(&g, &v).unwrap().is_base());
    }

    #[test]
    fn residue_examples() {
        assert_eq!(
            residue_class(&Qp2Element::alpha(3, 40).unwrap()).unwrap(),
            (0, 1)
        );
        assert_eq!(
            residue_class(&point(3, q(1 + 9, 1), q(2 + 3, 1))).unwrap(),
            (1, 2)
        );
        assert!(residue_class(&point(3, q(1, 1), q(3, 1))).is_err());
    }

    #[test]
    fn neighbourhood_sizes() {
        let dot = neighbourhood_dot(3, 2);
        // 1 + 4 + 4·3 vertices
        assert_eq!(dot.matches("label=").count(), 17);
        assert_eq!(dot.matches(" -- ").count(), 16);
        assert!(contains(&TreeVertex::new(3, 1, &q(2, 1)), &q(5, 1)));
    }
}
