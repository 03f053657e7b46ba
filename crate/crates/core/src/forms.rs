//! Primitive indefinite binary quadratic forms and narrow class groups.
//!
//! A form `(a, b, c)` stands for `a x² + b xy + c y²`. Matrices act on the
//! right by substitution, `(q∘M)(x, y) = q(M(x, y))`, so the roots of `q∘M`
//! are the images of the roots of `q` under `M⁻¹`.
//!
//! Reduction uses the normalised ρ operator. Every proper equivalence class
//! is a single ρ-cycle of Gauss-reduced forms (`0 < b < √Δ`,
//! `√Δ − b < 2|a| < √Δ + b`), which makes the number of cycles the narrow
//! class number `h⁺(Δ)`.

use std::collections::HashMap;
use std::fmt;

use crate::arith::{divisors, ext_gcd, gcd, gcd3, isqrt, kronecker_prime, SpfSieve};
use crate::error::{precondition, Error, Result};
use crate::mat::IMat2;
use crate::orders::Order;

/// Hard cap on ρ steps; reduction of forms with coefficients below 10^18
/// needs only a few hundred.
const MAX_RHO_STEPS: usize = 100_000;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct QForm {
    pub a: i128,
    pub b: i128,
    pub c: i128,
}

impl fmt::Debug for QForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.b, self.c)
    }
}

impl fmt::Display for QForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.a, self.b, self.c)
    }
}

impl QForm {
    pub const fn new(a: i128, b: i128, c: i128) -> Self {
        QForm { a, b, c }
    }

    /// Validate primitivity and the discriminant being positive and non-square.
    pub fn checked(a: i128, b: i128, c: i128) -> Result<Self> {
        let q = QForm { a, b, c };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let disc = self.disc();
        if !crate::arith::is_real_quadratic_discriminant(disc) {
            return Err(precondition!(
                "form {self:?} has discriminant {disc}, not positive non-square"
            ));
        }
        if !self.is_primitive() {
            return Err(precondition!("form {self:?} is not primitive"));
        }
        Ok(())
    }

    pub fn disc(&self) -> i128 {
        self.b * self.b - 4 * self.a * self.c
    }

    pub fn is_primitive(&self) -> bool {
        gcd3(self.a, self.b, self.c) == 1
    }

    /// `(1, Δ mod 2, (Δ mod 2 − Δ)/4)`.
    pub fn principal(disc: i128) -> Self {
        let b = disc.rem_euclid(2);
        QForm::new(1, b, (b - disc) / 4)
    }

    /// `(a, −b, c)`, the inverse class.
    pub fn opposite(&self) -> Self {
        QForm::new(self.a, -self.b, self.c)
    }

    pub fn eval(&self, x: i128, y: i128) -> i128 {
        self.a * x * x + self.b * x * y + self.c * y * y
    }

    /// `q∘M`.
    pub fn act(&self, m: &IMat2) -> Self {
        let (al, be, ga, de) = (m.a, m.b, m.c, m.d);
        QForm::new(
            self.eval(al, ga),
            2 * self.a * al * be + self.b * (al * de + be * ga) + 2 * self.c * ga * de,
            self.eval(be, de),
        )
    }

    /// Gauss reduced: `0 < b < √Δ` and `√Δ − b < 2|a| < √Δ + b`.
    pub fn is_reduced(&self) -> bool {
        let disc = self.disc();
        let two_a = 2 * self.a.abs();
        if self.b <= 0 || self.b * self.b >= disc {
            return false;
        }
        let lower = (two_a + self.b) * (two_a + self.b) > disc;
        let diff = two_a - self.b;
        let upper = diff <= 0 || diff * diff < disc;
        lower && upper
    }

    /// One normalised ρ step: returns `(ρ(q), M)` with `ρ(q) = q∘M`.
    pub fn rho(&self) -> (QForm, IMat2) {
        let disc = self.disc();
        let s = isqrt(disc);
        let c = self.c;
        let two_c = 2 * c.abs();
        let r = if c.abs() <= s {
            s - (s + self.b).rem_euclid(two_c)
        } else {
            c.abs() - (c.abs() + self.b).rem_euclid(two_c)
        };
        let k = (r + self.b) / (2 * c);
        let m = IMat2::new(0, -1, 1, k);
        let next = QForm::new(c, r, (r * r - disc) / (4 * c));
        debug_assert_eq!(next, self.act(&m));
        (next, m)
    }

    /// The two real roots `((−b − √Δ)/2a, (−b + √Δ)/2a)` of `a X² + b X + c`.
    pub fn roots(&self) -> (f64, f64) {
        let sq = (self.disc() as f64).sqrt();
        let (a, b) = (self.a as f64, self.b as f64);
        ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a))
    }

    /// Ordering key for class representatives: `(|a|, a < 0, b, c)`.
    pub fn canonical_key(&self) -> (i128, bool, i128, i128) {
        (self.a.abs(), self.a < 0, self.b, self.c)
    }
}

/// Reduce `q` to a Gauss-reduced form; returns `(q∘γ, γ)`.
pub fn reduce_to_reduced(q: &QForm) -> Result<(QForm, IMat2)> {
    q.validate()?;
    let mut cur = *q;
    let mut word = IMat2::IDENTITY;
    for _ in 0..MAX_RHO_STEPS {
        if cur.is_reduced() {
            return Ok((cur, word));
        }
        let (next, m) = cur.rho();
        cur = next;
        word = word.checked_mul(&m).ok_or_else(|| overflow(q))?;
    }
    Err(Error::BoundExhausted(format!(
        "reduction of {q:?} did not terminate"
    )))
}

fn overflow(q: &QForm) -> Error {
    Error::BoundExhausted(format!("reducing word of {q:?} overflows 128-bit entries"))
}

/// The ρ-cycle of a reduced form, starting at the form itself, with the
/// step matrices `steps[i]` satisfying `cycle[i+1] = cycle[i]∘steps[i]`.
pub fn rho_cycle(reduced: &QForm) -> (Vec<QForm>, Vec<IMat2>) {
    debug_assert!(reduced.is_reduced());
    let mut forms = vec![*reduced];
    let mut steps = Vec::new();
    let mut cur = *reduced;
    loop {
        let (next, m) = cur.rho();
        steps.push(m);
        if next == *reduced {
            break;
        }
        forms.push(next);
        cur = next;
        assert!(forms.len() <= MAX_RHO_STEPS, "rho cycle too long");
    }
    (forms, steps)
}

/// Canonical representative of the class of `q` (least element of its
/// reduced cycle under [`QForm::canonical_key`]) and `γ` with `rep = q∘γ`.
pub fn reduce_form(q: &QForm) -> Result<(QForm, IMat2)> {
    let (red, mut word) = reduce_to_reduced(q)?;
    let (cycle, steps) = rho_cycle(&red);
    let best = (0..cycle.len())
        .min_by_key(|&i| cycle[i].canonical_key())
        .expect("non-empty cycle");
    for m in steps.iter().take(best) {
        word = word.checked_mul(m).ok_or_else(|| overflow(q))?;
    }
    Ok((cycle[best], word))
}

/// The representative of [`reduce_form`] without the reducing word, which
/// can outgrow 128 bits when the cycle is long.
pub fn canonical_rep(q: &QForm) -> Result<QForm> {
    let mut cur = *q;
    cur.validate()?;
    let mut steps = 0;
    while !cur.is_reduced() {
        cur = cur.rho().0;
        steps += 1;
        if steps > MAX_RHO_STEPS {
            return Err(Error::BoundExhausted(format!(
                "reduction of {q:?} did not terminate"
            )));
        }
    }
    let (cycle, _) = rho_cycle(&cur);
    Ok(*cycle
        .iter()
        .min_by_key(|f| f.canonical_key())
        .expect("non-empty cycle"))
}

/// Dirichlet composition of two primitive forms of the same discriminant.
/// The result is not reduced.
pub fn compose(q1: &QForm, q2: &QForm) -> Result<QForm> {
    let disc = q1.disc();
    if disc != q2.disc() {
        return Err(precondition!(
            "discriminant mismatch: {} vs {}",
            disc,
            q2.disc()
        ));
    }
    q1.validate()?;
    q2.validate()?;
    let s = (q1.b + q2.b) / 2;
    // u a1 + v a2 + w s = e
    let (g, u1, v1) = ext_gcd(q1.a, q2.a);
    let (e, x, w) = ext_gcd(g, s);
    let (u, v) = (x * u1, x * v1);
    debug_assert_eq!(u * q1.a + v * q2.a + w * s, e);
    let a3 = q1.a * q2.a / (e * e);
    let two_a3 = 2 * a3.abs();
    let b3 = (q2.b + 2 * (q2.a / e) * (v * (s - q2.b) - w * q2.c)).rem_euclid(two_a3);
    // Keep b3 ≡ Δ (mod 2) when reducing modulo 2|a3|; the residue already has the right parity.
    let num = b3 * b3 - disc;
    if num % (4 * a3) != 0 {
        return Err(Error::Inconsistency(format!(
            "composition of {q1:?} and {q2:?} is not integral"
        )));
    }
    Ok(QForm::new(a3, b3, num / (4 * a3)))
}

/// The narrow class group `Pic⁺` of the order of discriminant `Δ`.
#[derive(Debug, Clone)]
pub struct NarrowClassGroup {
    disc: i128,
    classes: Vec<QForm>,
    cycles: Vec<Vec<QForm>>,
    index: HashMap<QForm, usize>,
    principal: usize,
}

impl NarrowClassGroup {
    pub fn disc(&self) -> i128 {
        self.disc
    }

    pub fn order(&self) -> usize {
        self.classes.len()
    }

    /// Canonical representatives, sorted by [`QForm::canonical_key`].
    pub fn classes(&self) -> &[QForm] {
        &self.classes
    }

    /// The reduced cycle of class `i`, starting at its representative.
    pub fn cycle(&self, i: usize) -> &[QForm] {
        &self.cycles[i]
    }

    pub fn principal(&self) -> usize {
        self.principal
    }

    /// Index of the class containing `q`.
    pub fn class_of(&self, q: &QForm) -> Result<usize> {
        if q.disc() != self.disc {
            return Err(precondition!(
                "form {q:?} does not have discriminant {}",
                self.disc
            ));
        }
        if let Some(&i) = self.index.get(q) {
            return Ok(i);
        }
        let rep = canonical_rep(q)?;
        self.index.get(&rep).copied().ok_or_else(|| {
            Error::Inconsistency(format!("reduced form {rep:?} missing from class list"))
        })
    }

    pub fn mul(&self, i: usize, j: usize) -> usize {
        let q = compose(&self.classes[i], &self.classes[j]).expect("classes share a discriminant");
        self.class_of(&q).expect("composite lies in the group")
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.class_of(&self.classes[i].opposite())
            .expect("opposite lies in the group")
    }

    /// Full multiplication table, `table[i][j] = i·j`.
    pub fn table(&self) -> Vec<Vec<usize>> {
        (0..self.order())
            .map(|i| (0..self.order()).map(|j| self.mul(i, j)).collect())
            .collect()
    }
}

/// All primitive Gauss-reduced forms of discriminant `Δ`.
pub fn reduced_forms(disc: i128) -> Result<Vec<QForm>> {
    reduced_forms_with(disc, divisors)
}

fn reduced_forms_with(disc: i128, divisors: impl Fn(i128) -> Vec<i128>) -> Result<Vec<QForm>> {
    crate::orders::check_positive_disc(disc as i64)?;
    let s = isqrt(disc);
    let mut out = Vec::new();
    let mut b = if disc % 2 == 0 { 2 } else { 1 };
    while b <= s {
        let n = (disc - b * b) / 4;
        for a0 in divisors(n) {
            for a in [a0, -a0] {
                let q = QForm::new(a, b, -n / a);
                if q.is_reduced() && q.is_primitive() {
                    out.push(q);
                }
            }
        }
        b += 2;
    }
    Ok(out)
}

/// `Pic⁺` of the order of discriminant `Δ`, as the set of ρ-cycles.
pub fn narrow_class_group(disc: i128) -> Result<NarrowClassGroup> {
    group_from_reduced(disc, reduced_forms(disc)?)
}

/// [`narrow_class_group`] with divisors read off a sieve; for sweeps over
/// many discriminants up to `4·sieve.limit()`.
pub fn narrow_class_group_sieved(disc: i128, sieve: &SpfSieve) -> Result<NarrowClassGroup> {
    let forms = reduced_forms_with(disc, |n| sieve.divisors(n as u64))?;
    group_from_reduced(disc, forms)
}

fn group_from_reduced(disc: i128, forms: Vec<QForm>) -> Result<NarrowClassGroup> {
    let mut seen: HashMap<QForm, usize> = HashMap::new();
    let mut raw_cycles: Vec<Vec<QForm>> = Vec::new();
    for q in forms {
        if seen.contains_key(&q) {
            continue;
        }
        let (cycle, _) = rho_cycle(&q);
        for f in &cycle {
            seen.insert(*f, raw_cycles.len());
        }
        raw_cycles.push(cycle);
    }
    let mut with_rep: Vec<(QForm, Vec<QForm>)> = raw_cycles
        .into_iter()
        .map(|c| {
            let best = (0..c.len()).min_by_key(|&i| c[i].canonical_key()).unwrap();
            let mut rotated = c[best..].to_vec();
            rotated.extend_from_slice(&c[..best]);
            (c[best], rotated)
        })
        .collect();
    with_rep.sort_by_key(|(rep, _)| rep.canonical_key());
    let mut index = HashMap::new();
    let mut classes = Vec::new();
    let mut cycles = Vec::new();
    for (i, (rep, cyc)) in with_rep.into_iter().enumerate() {
        for f in &cyc {
            index.insert(*f, i);
        }
        classes.push(rep);
        cycles.push(cyc);
    }
    let mut group = NarrowClassGroup {
        disc,
        classes,
        cycles,
        index,
        principal: 0,
    };
    group.principal = group.class_of(&QForm::principal(disc))?;
    Ok(group)
}

/// `Pic⁺(O_f[1/p])` for `p` inert in `K` and prime to `f`.
///
/// The ideal `pO_f` is generated by the totally positive element `p`, so
/// its narrow class is trivial and the quotient `Pic⁺(O_f)/⟨[pO_f]⟩` is
/// `Pic⁺(O_f)` itself.
pub fn picard_s(order: &Order, p: u64) -> Result<NarrowClassGroup> {
    check_inert(order, p)?;
    narrow_class_group(order.discriminant() as i128)
}

/// Preconditions shared by every `S = {∞, p}` construction.
pub fn check_inert(order: &Order, p: u64) -> Result<()> {
    if !crate::arith::is_prime(p) {
        return Err(Error::InvalidInput(format!("{p} is not prime")));
    }
    let d_k = order.field().d_k() as i128;
    match kronecker_prime(d_k, p) {
        -1 => {}
        0 => return Err(precondition!("{p} ramifies in Q(sqrt {d_k})")),
        _ => return Err(precondition!("{p} splits in Q(sqrt {d_k})")),
    }
    if gcd(order.conductor() as i128, p as i128) != 1 {
        return Err(precondition!(
            "{p} divides the conductor {}",
            order.conductor()
        ));
    }
    Ok(())
}
