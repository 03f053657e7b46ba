//! Embeddings `ψ: K → M₂(Q)` and their optimality.
//!
//! An embedding is stored through `W = ψ(f·ω_{K,0})`, a trace-zero integer
//! matrix with `W² = f²d_K·I`; then `ψ(√d_K) = W/f`. The form
//! `(a, b, c)` corresponds to `W = [[b, 2c], [−2a, −b]]`, and the fixed point
//! with eigenvalue `+f√d_K` on the column `(τ, 1)ᵗ` is
//! `τ_ψ = (−b − f√d_K)/(2a)`.
//!
//! Conjugation `ψ ↦ γψγ⁻¹` corresponds to `q ↦ q∘γ⁻¹` on forms.

use std::collections::{BTreeMap, HashMap};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::Zero;

use crate::error::{precondition, Error, Result};
use crate::forms::{canonical_rep, compose, NarrowClassGroup, QForm};
use crate::mat::IMat2;
use crate::orders::{QuadElement, QuadField};

type Q = Ratio<i128>;

/// The set `S` of places at which denominators are allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Places {
    /// `S = {∞}`: the ring `Z`.
    Infinite,
    /// `S = {∞, p}`: the ring `Z[1/p]`.
    WithPrime(u64),
}

impl Places {
    fn prime(&self) -> Option<i128> {
        match self {
            Places::Infinite => None,
            Places::WithPrime(p) => Some(*p as i128),
        }
    }

    /// Strip the invertible prime from a non-zero integer.
    fn strip(&self, mut n: i128) -> i128 {
        if let Some(p) = self.prime() {
            while n != 0 && n % p == 0 {
                n /= p;
            }
        }
        n
    }

    fn is_integral(&self, x: &Q) -> bool {
        self.strip(*x.denom()).abs() == 1
    }

    fn is_unit(&self, x: &Q) -> bool {
        !x.is_zero() && self.strip(*x.numer()).abs() == 1 && self.strip(*x.denom()).abs() == 1
    }
}

/// gcd of rationals: the positive generator of the fractional ideal they span.
fn rational_gcd(xs: &[Q]) -> Q {
    let mut num = 0i128;
    let mut den = 1i128;
    for x in xs {
        den = den.lcm(x.denom());
    }
    for x in xs {
        num = num.gcd(&(x.numer() * (den / x.denom())));
    }
    Q::new(num, den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Embedding {
    field: QuadField,
    f: i64,
    w: IMat2,
}

/// Which optimality route was evaluated. All three are always evaluated;
/// the verdict is returned only when they agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptimalityReport {
    pub lattice: bool,
    pub primitive_in_r: bool,
    pub primitive_in_rt: bool,
}

impl OptimalityReport {
    pub fn verdict(&self) -> bool {
        self.lattice
    }
}

impl Embedding {
    /// An embedding from `W = ψ(f·ω_{K,0})`.
    pub fn new(field: QuadField, f: i64, w: IMat2) -> Result<Self> {
        if f < 1 {
            return Err(Error::InvalidInput(format!(
                "conductor {f} must be positive"
            )));
        }
        let disc = (f as i128) * (f as i128) * field.d_k() as i128;
        if w.trace() != 0 || w * w != IMat2::new(disc, 0, 0, disc) {
            return Err(precondition!(
                "{w:?} is not a square root of {disc}·I of trace zero"
            ));
        }
        Ok(Embedding { field, f, w })
    }

    pub fn field(&self) -> QuadField {
        self.field
    }

    pub fn conductor(&self) -> i64 {
        self.f
    }

    pub fn w(&self) -> IMat2 {
        self.w
    }

    pub fn disc(&self) -> i128 {
        (self.f as i128) * (self.f as i128) * self.field.d_k() as i128
    }

    /// The form `(a, b, c)` with `W = [[b, 2c], [−2a, −b]]`, if `W` has even off-diagonal entries.
    pub fn form(&self) -> Option<QForm> {
        let w = self.w;
        if w.b % 2 != 0 || w.c % 2 != 0 {
            return None;
        }
        Some(QForm::new(-w.c / 2, w.a, w.b / 2))
    }

    /// Fixed point of `ψ(K^×)` on which `W` acts by `+f√d_K`.
    pub fn tau(&self) -> f64 {
        let lam = (self.disc() as f64).sqrt();
        (self.w.a as f64 + lam) / self.w.c as f64
    }

    /// The other fixed point (eigenvalue `−f√d_K`).
    pub fn tau_conj(&self) -> f64 {
        let lam = (self.disc() as f64).sqrt();
        (self.w.a as f64 - lam) / self.w.c as f64
    }

    /// `ψ(u)` for `u = (x + y√d_K)/2`, if integral: `(x·I + y·W/f)/2`.
    pub fn psi(&self, u: &QuadElement) -> Option<IMat2> {
        use num_traits::ToPrimitive;
        let x = u.x().to_i128()?;
        let y = u.y().to_i128()?;
        let f = self.f as i128;
        let num = [
            x * f + y * self.w.a,
            y * self.w.b,
            y * self.w.c,
            x * f - y * self.w.a,
        ];
        let den = 2 * f;
        if num.iter().any(|n| n % den != 0) {
            return None;
        }
        Some(IMat2::new(
            num[0] / den,
            num[1] / den,
            num[2] / den,
            num[3] / den,
        ))
    }

    /// `γψγ⁻¹` for `γ` of determinant `±1`.
    pub fn conjugate(&self, g: &IMat2) -> Self {
        let det = g.det();
        assert!(
            det == 1 || det == -1,
            "conjugation needs a unimodular matrix"
        );
        let inv = if det == 1 { g.adj() } else { g.adj().neg() };
        Embedding {
            field: self.field,
            f: self.f,
            w: *g * self.w * inv,
        }
    }

    /// Evaluate the three optimality criteria with respect to `O_g[S⁻¹]`.
    pub fn optimality(&self, g: i64, places: Places) -> OptimalityReport {
        let v = |e: i128| Q::new(e, self.f as i128);
        // ψ(√d_K) = V = W/f
        let (v11, v12, v21) = (v(self.w.a), v(self.w.b), v(self.w.c));
        let gq = Q::from_integer(g as i128);
        let two = Q::from_integer(2);

        // (1) ψ(K) ∩ R_S is Z_S + Z_S·(V − v11)/G with G = gcd(2v11, v12, v21);
        // its discriminant 4d_K/G² must equal g²d_K up to S-units.
        let big_g = rational_gcd(&[two * v11, v12, v21]);
        let lattice = !big_g.is_zero() && places.is_unit(&(big_g * gq / two));

        // (2) ψ(gω_K) = (g t I + gV)/2 lies in R_S and is primitive there.
        let t = Q::from_integer(self.field.t() as i128);
        let m11 = (gq * t + gq * v11) / two;
        let m22 = (gq * t - gq * v11) / two;
        let m12 = gq * v12 / two;
        let m21 = gq * v21 / two;
        let integral = [m11, m22, m12, m21].iter().all(|x| places.is_integral(x));
        let primitive_in_r = integral && places.is_unit(&rational_gcd(&[m12, m21, m11 - m22]));

        // (3) ψ(gω_{K,0}) = gV in R^T = {[[x, 2y], [2z, −x]]}, primitive there.
        let coords = [gq * v11, gq * v12 / two, gq * v21 / two];
        let in_rt = coords.iter().all(|x| places.is_integral(x));
        let primitive_in_rt = in_rt && places.is_unit(&rational_gcd(&coords));

        OptimalityReport {
            lattice,
            primitive_in_r,
            primitive_in_rt,
        }
    }

    /// Is `ψ` optimal for `O_g[S⁻¹]`? Disagreeing criteria are a hard fault.
    pub fn is_optimal(&self, g: i64, places: Places) -> Result<bool> {
        let r = self.optimality(g, places);
        if r.lattice != r.primitive_in_r || r.lattice != r.primitive_in_rt {
            return Err(Error::Inconsistency(format!(
                "optimality criteria disagree for {self:?}: {r:?}"
            )));
        }
        Ok(r.verdict())
    }
}

/// `W = [[b, 2c], [−2a, −b]]` for a form of discriminant `f²d_K`.
pub fn embedding_from_form(q: &QForm, field: QuadField, f: i64) -> Result<Embedding> {
    let disc = (f as i128) * (f as i128) * field.d_k() as i128;
    if q.disc() != disc {
        return Err(precondition!(
            "form {q:?} has discriminant {} but the order has {disc}",
            q.disc()
        ));
    }
    Embedding::new(field, f, IMat2::new(q.b, 2 * q.c, -2 * q.a, -q.b))
}

/// The `⋆`-action of the class of `t` on `e`, realised by composition.
pub fn star_action(t: &QForm, e: &Embedding) -> Result<Embedding> {
    let q = e
        .form()
        .ok_or_else(|| precondition!("{e:?} is not optimal for its own order"))?;
    if t.disc() != q.disc() {
        return Err(precondition!(
            "class of discriminant {} acting on embedding of discriminant {}",
            t.disc(),
            q.disc()
        ));
    }
    let rep = canonical_rep(&compose(t, &q)?)?;
    embedding_from_form(&rep, e.field, e.f)
}

/// The `⋆`-action as a permutation: `perm[t][x] = class(t ⋆ x)` with
/// classes indexed as in `group`.
pub fn star_permutations(
    group: &NarrowClassGroup,
    field: QuadField,
    f: i64,
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::with_capacity(group.order());
    for t in group.classes() {
        let mut row = Vec::with_capacity(group.order());
        for x in group.classes() {
            let e = embedding_from_form(x, field, f)?;
            let img = star_action(t, &e)?;
            row.push(group.class_of(&img.form().expect("image is optimal"))?);
        }
        out.push(row);
    }
    Ok(out)
}

/// A conjugacy class found by brute force, labelled by the least associated
/// form in the component under [`QForm::canonical_key`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingClass {
    pub label: QForm,
    pub members: Vec<IMat2>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

fn words(max_len: usize) -> Vec<IMat2> {
    let gens = [IMat2::S, IMat2::T, IMat2::translation(-1)];
    let mut out = Vec::new();
    let mut layer = vec![IMat2::IDENTITY];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for g in &gens {
                next.push(*w * *g);
            }
        }
        out.extend_from_slice(&next);
        layer = next;
    }
    out
}

fn components(disc: i128, bound: i128, word_length: usize) -> Vec<EmbeddingClass> {
    // W = [[x, 2c], [−2a, −x]], x² − 4ac = Δ, gcd(a, x, c) = 1
    let mut mats = Vec::new();
    for x in -bound..=bound {
        if (x * x - disc) % 4 != 0 {
            continue;
        }
        let ac = (x * x - disc) / 4;
        if ac == 0 {
            continue;
        }
        for a0 in crate::arith::divisors(ac) {
            for a in [a0, -a0] {
                let c = ac / a;
                if (2 * a).abs() <= bound
                    && (2 * c).abs() <= bound
                    && crate::arith::gcd3(a, x, c) == 1
                {
                    mats.push(IMat2::new(x, 2 * c, -2 * a, -x));
                }
            }
        }
    }
    let index: HashMap<IMat2, usize> = mats.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let mut uf = UnionFind::new(mats.len());
    let ws = words(word_length);
    for (i, m) in mats.iter().enumerate() {
        for g in &ws {
            let conj = *g * *m * g.adj();
            if let Some(&j) = index.get(&conj) {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<IMat2>> = BTreeMap::new();
    for (i, m) in mats.iter().enumerate() {
        let r = uf.find(i);
        groups.entry(r).or_default().push(*m);
    }
    let mut out: Vec<EmbeddingClass> = groups
        .into_values()
        .map(|members| {
            let label = members
                .iter()
                .map(|w| QForm::new(-w.c / 2, w.a, w.b / 2))
                .min_by_key(|q| q.canonical_key())
                .expect("non-empty component");
            EmbeddingClass { label, members }
        })
        .collect();
    out.sort_by_key(|c| c.label.canonical_key());
    out
}

/// PSL₂(Z)-classes of optimal embeddings of discriminant `Δ`, found by
/// enumerating all admissible `W` with entries bounded by `coeff_bound`
/// and merging conjugates by words of length `≤ word_length` in `S, T, T⁻¹`.
///
/// Independent of reduction theory. Fails if shrinking the box by a
/// quarter changes the number of classes, which signals that components
/// are still fragmented at the bound.
pub fn enumerate_classes_bruteforce(
    disc: i128,
    coeff_bound: i128,
    word_length: usize,
) -> Result<Vec<EmbeddingClass>> {
    crate::orders::check_positive_disc(disc as i64)?;
    if disc >= 10_000 {
        return Err(Error::InvalidInput(format!(
            "brute-force enumeration is limited to Δ < 10⁴, got {disc}"
        )));
    }
    if word_length == 0 {
        return Err(Error::InvalidInput("word length must be at least 1".into()));
    }
    let full = components(disc, coeff_bound, word_length);
    let smaller = components(disc, coeff_bound - (coeff_bound / 4).max(1), word_length);
    if full.len() != smaller.len() || full.is_empty() {
        return Err(Error::BoundExhausted(format!(
            "class count for Δ = {disc} not stable at bound {coeff_bound} ({} vs {})",
            full.len(),
            smaller.len()
        )));
    }
    Ok(full)
}

/// [`enumerate_classes_bruteforce`] starting at [`default_bruteforce_bound`]:
/// the count is accepted once the bounds `B` and `2B` agree, doubling `B`
/// at most `max_doublings` times.
pub fn enumerate_classes_adaptive(disc: i128, max_doublings: u32) -> Result<Vec<EmbeddingClass>> {
    let mut bound = default_bruteforce_bound(disc);
    let mut last = String::new();
    for _ in 0..=max_doublings {
        match (
            enumerate_classes_bruteforce(disc, bound, 1),
            enumerate_classes_bruteforce(disc, 2 * bound, 1),
        ) {
            (Ok(a), Ok(b)) if a.len() == b.len() => return Ok(b),
            (Ok(a), Ok(b)) => {
                last = format!(
                    "{} classes at bound {bound}, {} at {}",
                    a.len(),
                    b.len(),
                    2 * bound
                )
            }
            (Err(Error::BoundExhausted(m)), _) | (_, Err(Error::BoundExhausted(m))) => last = m,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
        bound *= 2;
    }
    Err(Error::BoundExhausted(format!("Δ = {disc}: {last}")))
}

/// A coefficient bound that suffices for the brute-force oracle: reduced
/// forms have entries below `2√Δ` and ρ steps stay within a few multiples.
pub fn default_bruteforce_bound(disc: i128) -> i128 {
    (8.0 * (disc as f64).sqrt()).ceil() as i128 + 16
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::narrow_class_group;

    fn field(d: i64) -> QuadField {
        QuadField::new(d).unwrap()
    }

    #[test]
    fn embedding_from_form_examples() {
        let e = embedding_from_form(&QForm::new(1, 1, -1), field(5), 1).unwrap();
        assert_eq!(e.w(), IMat2::new(1, -2, -2, -1));
        assert_eq!(e.w() * e.w(), IMat2::new(5, 0, 0, 5));
        let e = embedding_from_form(&QForm::new(1, 2, -2), field(3), 1).unwrap();
        assert_eq!(e.w(), IMat2::new(2, -4, -2, -2));
        let e = embedding_from_form(&QForm::new(1, 0, -2), field(2), 1).unwrap();
        assert_eq!(e.w(), IMat2::new(0, -4, -2, 0));
        assert!(embedding_from_form(&QForm::new(1, 1, -1), field(5), 3).is_err());
    }

    #[test]
    fn tau_is_an_eigenvector_with_positive_eigenvalue() {
        let q = QForm::new(2, 3, -4); // Δ = 41
        let e = embedding_from_form(&q, field(41), 1).unwrap();
        let tau = e.tau();
        let w = e.w();
        let lam = 41f64.sqrt();
        let lhs = (w.a as f64 * tau + w.b as f64, w.c as f64 * tau + w.d as f64);
        assert!((lhs.0 - lam * tau).abs() < 1e-12 && (lhs.1 - lam).abs() < 1e-12);
        assert!((q.a as f64 * tau * tau + q.b as f64 * tau + q.c as f64).abs() < 1e-12);
    }

    #[test]
    fn optimality_examples() {
        let k = field(5);
        let e = embedding_from_form(&QForm::new(1, 1, -1), k, 1).unwrap();
        assert!(e.is_optimal(1, Places::Infinite).unwrap());
        // 3W read as ψ(3ω_{K,0}) is the same embedding, optimal for O_1 only.
        let e3 = Embedding::new(k, 3, IMat2::new(3, -6, -6, -3)).unwrap();
        assert!(e3.is_optimal(1, Places::Infinite).unwrap());
        assert!(!e3.is_optimal(3, Places::Infinite).unwrap());
        // 3W read as ψ(ω_{K,0}) would need W² = 5·I, which fails.
        assert!(Embedding::new(k, 1, IMat2::new(3, -6, -6, -3)).is_err());
        // Inverting 3 makes O_1[1/3] = O_3[1/3].
        assert!(e3.is_optimal(3, Places::WithPrime(3)).unwrap());
    }

    #[test]
    fn psi_of_units_is_integral_and_fixes_tau() {
        let k = field(5);
        let e = embedding_from_form(&QForm::new(1, 1, -1), k, 1).unwrap();
        let eps = crate::orders::totally_positive_fundamental_unit(&k.order(1).unwrap()).unwrap();
        let g = e.psi(&eps).unwrap();
        assert_eq!(g.det(), 1);
        assert_eq!(g.trace(), 3);
        let tau = e.tau();
        assert!((g.apply_real(tau).unwrap() - tau).abs() < 1e-12);
    }

    #[test]
    fn conjugation_matches_form_action() {
        let q = QForm::new(3, 5, -7);
        let k = QuadField::from_discriminant(109).unwrap();
        let e = embedding_from_form(&q, k, 1).unwrap();
        let g = IMat2::new(2, 1, 5, 3);
        let moved = e.conjugate(&g);
        assert_eq!(moved.form().unwrap(), q.act(&g.adj()));
        assert!((g.apply_real(e.tau()).unwrap() - moved.tau()).abs() < 1e-9);
    }

    #[test]
    fn star_action_examples() {
        let g12 = narrow_class_group(12).unwrap();
        let k3 = field(3);
        let base = embedding_from_form(&g12.classes()[g12.principal()], k3, 1).unwrap();
        let other = g12.classes()[1 - g12.principal()];
        let once = star_action(&other, &base).unwrap();
        assert_eq!(
            g12.class_of(&once.form().unwrap()).unwrap(),
            1 - g12.principal()
        );
        let twice = star_action(&other, &once).unwrap();
        assert_eq!(twice.form().unwrap(), base.form().unwrap());
        let principal = g12.classes()[g12.principal()];
        assert_eq!(star_action(&principal, &once).unwrap(), once);

        let g40 = narrow_class_group(40).unwrap();
        let k10 = field(10);
        let e = embedding_from_form(&g40.classes()[0], k10, 1).unwrap();
        let orbit: std::collections::HashSet<_> = g40
            .classes()
            .iter()
            .map(|t| star_action(t, &e).unwrap().form().unwrap())
            .collect();
        assert_eq!(orbit.len(), 2);
    }

    #[test]
    fn bruteforce_examples() {
        assert_eq!(enumerate_classes_bruteforce(5, 50, 1).unwrap().len(), 1);
        assert_eq!(enumerate_classes_bruteforce(12, 50, 1).unwrap().len(), 2);
        assert_eq!(enumerate_classes_bruteforce(40, 80, 1).unwrap().len(), 2);
        assert!(matches!(
            enumerate_classes_bruteforce(229, 4, 1),
            Err(Error::BoundExhausted(_))
        ));
    }

    #[test]
    fn rational_gcd_basics() {
        let g = rational_gcd(&[Q::new(1, 2), Q::new(1, 3)]);
        assert_eq!(g, Q::new(1, 6));
        let g = rational_gcd(&[Q::from_integer(4), Q::from_integer(6), Q::new(2, 1)]);
        assert_eq!(g, Q::from_integer(2));
        assert!(Places::WithPrime(3).is_unit(&Q::new(9, 1)));
        assert!(!Places::Infinite.is_unit(&Q::new(9, 1)));
    }
}
