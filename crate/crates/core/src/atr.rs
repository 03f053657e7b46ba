//! ATR cycles over a real quadratic base field `F` of narrow class number one.
//!
//! `K = F(√δ)` is almost totally real when `δ` is negative at the first real
//! place `σ₀` (so `K_{σ₀} ≅ C`) and positive at `σ₁` (so `K_{σ₁} ≅ R × R`).
//! Here `σ₀` takes `√D_F` to the positive root and `σ₁` to the negative one.
//! A relative form `(a, b, c)` of discriminant `f²d_K` gives a point `τ₀` in
//! the upper half plane at `σ₀` and a geodesic at `σ₁`; the stabiliser of the
//! cycle modulo `Z_F^×` is generated by one relative unit.
//!
//! Elements of `F` are [`QuadElement`]s over the field `Q(√D_F)`.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use serde::Serialize;

use crate::error::{precondition, Error, Result};
use crate::orders::{fundamental_unit, QuadElement, QuadField};

/// Base fields with `h⁺_F = 1` supported here (values of `D_F`).
pub const BASE_FIELD_ALLOWLIST: [i64; 3] = [2, 5, 13];

/// Tolerance for the numerical fixed-point checks.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-9;

/// The real quadratic base field with its two real places.
#[derive(Debug, Clone)]
pub struct BaseField {
    field: QuadField,
    unit: QuadElement,
}

impl BaseField {
    /// `Q(√D)` for `D` in [`BASE_FIELD_ALLOWLIST`]; narrow class number one is
    /// asserted by the allowlist, not computed.
    pub fn new(d: i64) -> Result<Self> {
        if !BASE_FIELD_ALLOWLIST.contains(&d) {
            return Err(Error::InvalidInput(format!(
                "base field Q(sqrt {d}) is not in the allowlist {BASE_FIELD_ALLOWLIST:?}"
            )));
        }
        let field = QuadField::new(d)?;
        Ok(BaseField {
            field,
            unit: fundamental_unit(field)?,
        })
    }

    pub fn field(&self) -> QuadField {
        self.field
    }

    /// Fundamental unit `ε_F > 1` (at `σ₀`).
    pub fn unit(&self) -> &QuadElement {
        &self.unit
    }

    pub fn int(&self, m: i64) -> QuadElement {
        QuadElement::integer(self.field, m)
    }

    /// `m + n√D_F`.
    pub fn elem(&self, m: i64, n: i64) -> QuadElement {
        // √D_F = √d_K when D ≡ 1 mod 4 and √d_K / 2 otherwise
        let y = if self.field.t() == 1 { 2 * n } else { n };
        QuadElement::from_halves(self.field, BigInt::from(2 * m), BigInt::from(y))
    }

    /// `m + n·ω_F`.
    pub fn from_basis(&self, m: i64, n: i64) -> QuadElement {
        &self.int(m) + &(&self.int(n) * &self.field.omega())
    }

    /// Real embedding `σ_i`, `i ∈ {0, 1}`.
    pub fn sigma(&self, i: usize, e: &QuadElement) -> f64 {
        if i == 0 {
            e.to_f64()
        } else {
            e.conj().to_f64()
        }
    }

    /// Representatives of totally positive units modulo squares of units.
    pub fn positive_units_mod_squares(&self) -> Vec<QuadElement> {
        if self.unit.norm() == BigInt::from(-1) {
            vec![self.int(1)]
        } else {
            vec![self.int(1), self.unit.clone()]
        }
    }

    fn is_square(&self, e: &QuadElement) -> bool {
        sqrt_in(self, e).is_some()
    }
}

/// `e/2` if it lies in `Z_F`.
fn half(e: &QuadElement) -> Option<QuadElement> {
    if e.x().is_odd() || e.y().is_odd() {
        return None;
    }
    QuadElement::try_from_halves(e.field(), e.x() / 2, e.y() / 2).ok()
}

/// Exact square root in `Z_F`, if any.
fn sqrt_in(base: &BaseField, r: &QuadElement) -> Option<QuadElement> {
    let (s0, s1) = (base.sigma(0, r), base.sigma(1, r));
    if s0 < -0.5 || s1 < -0.5 {
        return None;
    }
    let (a, b) = (s0.max(0.0).sqrt(), s1.max(0.0).sqrt());
    let root_dk = base.field.sqrt_dk();
    for b in [b, -b] {
        // X = (x + y√d_K)/2 with σ₀X = a, σ₁X = b
        let x = (a + b).round();
        let y = ((a - b) / root_dk).round();
        if !(x.is_finite() && y.is_finite()) {
            return None;
        }
        let cand = QuadElement::try_from_halves(
            base.field,
            BigInt::from(x as i128),
            BigInt::from(y as i128),
        );
        if let Ok(c) = cand {
            if &(&c * &c) == r {
                return Some(c);
            }
        }
    }
    None
}

/// Is `F(√δ)` almost totally real: `σ₀(δ) < 0 < σ₁(δ)`?
pub fn is_atr(base: &BaseField, delta: &QuadElement) -> Result<bool> {
    if delta.is_zero() || base.is_square(delta) {
        return Err(precondition!("δ = {delta:?} is a square in F"));
    }
    let neg0 = !delta.is_positive();
    let pos1 = delta.conj().is_positive();
    Ok(neg0 && pos1)
}

/// `K = F(√δ)` with the relative order `O_f = Z_F[f·ω_K]`.
#[derive(Debug, Clone)]
pub struct ATRExtension {
    base: BaseField,
    delta: QuadElement,
    f: QuadElement,
    /// `ω_K = (1 + √δ)/2` rather than `√δ`.
    half_omega: bool,
}

impl ATRExtension {
    pub fn new(base: BaseField, delta: QuadElement, f: QuadElement) -> Result<Self> {
        if delta.field() != base.field || f.field() != base.field {
            return Err(Error::InvalidInput(
                "δ and f must lie in the base field".into(),
            ));
        }
        if f.is_zero() {
            return Err(Error::InvalidInput("conductor must be nonzero".into()));
        }
        if !is_atr(&base, &delta)? {
            return Err(precondition!("F(√{delta:?}) is not ATR"));
        }
        // (1 + √δ)/2 is integral iff its minimal polynomial X² − X + (1 − δ)/4 is
        let one_minus = &base.int(1) - &delta;
        let half_omega = half(&one_minus).and_then(|h| half(&h)).is_some();
        Ok(ATRExtension {
            base,
            delta,
            f,
            half_omega,
        })
    }

    pub fn base(&self) -> &BaseField {
        &self.base
    }

    pub fn delta(&self) -> &QuadElement {
        &self.delta
    }

    pub fn conductor(&self) -> &QuadElement {
        &self.f
    }

    /// Whether `ω_K = (1 + √δ)/2`.
    pub fn half_omega(&self) -> bool {
        self.half_omega
    }

    /// Trace of `ω_K` over `F`, 0 or 1.
    pub fn omega_trace(&self) -> i64 {
        self.half_omega as i64
    }

    /// `d_K = δ` or `4δ`, so that `ω_K = (t + √d_K)/2`.
    pub fn d_k(&self) -> QuadElement {
        if self.half_omega {
            self.delta.clone()
        } else {
            &self.base.int(4) * &self.delta
        }
    }

    /// `f²d_K`.
    pub fn disc(&self) -> QuadElement {
        &(&self.f * &self.f) * &self.d_k()
    }

    /// The form `x² + t f xy + f²(t − d_K)/4·y²` of discriminant `f²d_K`.
    pub fn principal_form(&self) -> RelativeForm {
        let t = self.omega_trace();
        let b = &self.base.int(t) * &self.f;
        let num = &self.base.int(t * t) - &self.d_k();
        let c = &(&self.f * &self.f)
            * &half(&half(&num).expect("t² ≡ d_K mod 4")).expect("t² ≡ d_K mod 4");
        RelativeForm {
            a: self.base.int(1),
            b,
            c,
        }
    }
}

/// A binary quadratic form over `Z_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeForm {
    pub a: QuadElement,
    pub b: QuadElement,
    pub c: QuadElement,
}

impl RelativeForm {
    pub fn disc(&self) -> QuadElement {
        &(&self.b * &self.b) - &(&(&self.a * &self.c) * &QuadElement::integer(self.a.field(), 4))
    }
}

/// 2×2 matrix over `Z_F`, row-major.
pub type ZfMat = [QuadElement; 4];

fn mat_mul(m: &ZfMat, n: &ZfMat) -> ZfMat {
    [
        &(&m[0] * &n[0]) + &(&m[1] * &n[2]),
        &(&m[0] * &n[1]) + &(&m[1] * &n[3]),
        &(&m[2] * &n[0]) + &(&m[3] * &n[2]),
        &(&m[2] * &n[1]) + &(&m[3] * &n[3]),
    ]
}

/// The cycle `{τ₀} × Y` of an embedding.
#[derive(Debug, Clone)]
pub struct ATRCycle {
    pub form: RelativeForm,
    /// `W = [[b, 2c], [−2a, −b]] = ψ(f√d_K)`.
    pub w: ZfMat,
    /// Root at `σ₀` in the upper half plane.
    pub tau0: Complex64,
    /// The two real roots at `σ₁`, `(−b − √disc)/2a` then `(−b + √disc)/2a`.
    pub endpoints: (f64, f64),
}

/// τ₀, endpoints and `W` of the form `q`.
pub fn atr_cycle_from_form(q: &RelativeForm, ext: &ATRExtension) -> Result<ATRCycle> {
    let base = &ext.base;
    if q.a.is_zero() {
        return Err(precondition!("leading coefficient must be nonzero"));
    }
    let disc = q.disc();
    if disc != ext.disc() {
        return Err(precondition!(
            "form has discriminant {disc:?}, the order has {:?}",
            ext.disc()
        ));
    }
    let (d0, d1) = (base.sigma(0, &disc), base.sigma(1, &disc));
    if !(d0 < 0.0 && d1 > 0.0) {
        return Err(precondition!("discriminant signs ({d0}, {d1}) are not ATR"));
    }
    let (a0, b0) = (base.sigma(0, &q.a), base.sigma(0, &q.b));
    let mut tau0 = Complex64::new(-b0, (-d0).sqrt()) / (2.0 * a0);
    if tau0.im < 0.0 {
        tau0 = tau0.conj();
    }
    let (a1, b1) = (base.sigma(1, &q.a), base.sigma(1, &q.b));
    let r = d1.sqrt();
    let endpoints = ((-b1 - r) / (2.0 * a1), (-b1 + r) / (2.0 * a1));
    let two = base.int(2);
    let w = [q.b.clone(), &two * &q.c, -&(&two * &q.a), -&q.b];
    let w2 = mat_mul(&w, &w);
    let zero = base.int(0);
    if w2 != [disc.clone(), zero.clone(), zero, disc.clone()] {
        return Err(Error::Inconsistency(format!("W² ≠ disc·I for {q:?}")));
    }
    Ok(ATRCycle {
        form: q.clone(),
        w,
        tau0,
        endpoints,
    })
}

/// A relative unit `u = (X + y·f√d_K)/2 = x + y·f·ω_K` of `O_f`.
#[derive(Debug, Clone, Serialize)]
pub struct RelativeUnit {
    /// `X = 2x + y·f·t` as halves `(x, y)` over `Q(√D_F)`.
    pub big_x: (String, String),
    pub x: (String, String),
    pub y: (String, String),
    /// `N_{K/F}(u)`, a totally positive unit.
    pub norm: (String, String),
    /// `u₊/u₋ > 1`: ratio of the two real images above `σ₁`.
    pub lambda: f64,
    /// Number of solutions seen in the search box.
    pub solutions: usize,
    #[serde(skip)]
    parts: Option<UnitParts>,
}

#[derive(Debug, Clone)]
struct UnitParts {
    big_x: QuadElement,
    x: QuadElement,
    y: QuadElement,
    norm: QuadElement,
}

fn halves(e: &QuadElement) -> (String, String) {
    (e.x().to_string(), e.y().to_string())
}

impl RelativeUnit {
    fn new(p: UnitParts, lambda: f64, solutions: usize) -> Self {
        RelativeUnit {
            big_x: halves(&p.big_x),
            x: halves(&p.x),
            y: halves(&p.y),
            norm: halves(&p.norm),
            lambda,
            solutions,
            parts: Some(p),
        }
    }

    fn parts(&self) -> &UnitParts {
        self.parts.as_ref().expect("constructed by the search")
    }

    pub fn x_coeff(&self) -> &QuadElement {
        &self.parts().x
    }

    pub fn y_coeff(&self) -> &QuadElement {
        &self.parts().y
    }

    pub fn relative_norm(&self) -> &QuadElement {
        &self.parts().norm
    }

    /// `|N_{F/Q}(N_{K/F}(u))|`.
    pub fn absolute_norm(&self) -> BigInt {
        self.parts().norm.norm().abs()
    }

    /// `u ∉ Z_F`.
    pub fn is_relative(&self) -> bool {
        !self.parts().y.is_zero()
    }

    /// `ψ(u) = (X·I + y·W)/2` for the cycle's `W`.
    pub fn psi(&self, cycle: &ATRCycle) -> Result<ZfMat> {
        let p = self.parts();
        let entry = |k: usize, diag: bool| -> Result<QuadElement> {
            let yw = &p.y * &cycle.w[k];
            let num = if diag { &p.big_x + &yw } else { yw };
            half(&num).ok_or_else(|| {
                precondition!("ψ(u) is not integral; the form is not optimal for O_f")
            })
        };
        Ok([
            entry(0, true)?,
            entry(1, false)?,
            entry(2, false)?,
            entry(3, true)?,
        ])
    }
}

/// Search the box `y = m + n·ω_F`, `|m|, |n| ≤ bound`, for relative units of
/// `O_f` positive at both real places above `σ₁`, and return the one with the
/// least ratio `λ > 1`.
///
/// Every solution found must have `log λ` an integer multiple of the least
/// one (rank one over the box); otherwise this reports an inconsistency.
pub fn unit_stabilizer_search(ext: &ATRExtension, bound: i64) -> Result<RelativeUnit> {
    if bound < 1 {
        return Err(Error::InvalidInput(
            "search bound must be at least 1".into(),
        ));
    }
    let base = &ext.base;
    let disc = ext.disc();
    let d1 = base.sigma(1, &ext.d_k()).sqrt();
    let f1 = base.sigma(1, &ext.f);
    let t = base.int(ext.omega_trace());
    let etas = base.positive_units_mod_squares();
    let mut found: Vec<(f64, UnitParts)> = Vec::new();
    for m in -bound..=bound {
        for n in -bound..=bound {
            let y = base.from_basis(m, n);
            if y.is_zero() {
                continue;
            }
            let y2d = &(&y * &y) * &disc;
            for eta in &etas {
                let r = &y2d + &(&base.int(4) * eta);
                let Some(root) = sqrt_in(base, &r) else {
                    continue;
                };
                for big_x in [root.clone(), -&root] {
                    let Some(x) = half(&(&big_x - &(&(&y * &ext.f) * &t))) else {
                        continue;
                    };
                    let (x1, y1) = (base.sigma(1, &big_x), base.sigma(1, &y) * f1 * d1);
                    let (up, down) = ((x1 + y1) / 2.0, (x1 - y1) / 2.0);
                    if up > 0.0 && down > 0.0 && up > down {
                        found.push((
                            up / down,
                            UnitParts {
                                big_x,
                                x,
                                y: y.clone(),
                                norm: eta.clone(),
                            },
                        ));
                    }
                }
            }
        }
    }
    let solutions = found.len();
    let (lambda, parts) = found
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .cloned()
        .ok_or_else(|| {
            Error::BoundExhausted(format!(
                "no relative unit with coefficients in [-{bound}, {bound}]"
            ))
        })?;
    let step = lambda.ln();
    for (l, _) in &found {
        let k = l.ln() / step;
        if (k - k.round()).abs() > 1e-6 {
            return Err(Error::Inconsistency(format!(
                "unit ratios {lambda} and {l} are independent"
            )));
        }
    }
    Ok(RelativeUnit::new(parts, lambda, solutions))
}

/// Möbius action of a matrix over `Z_F` at the place `σ_i`.
pub fn act_at(base: &BaseField, i: usize, g: &ZfMat, z: Complex64) -> Complex64 {
    let s = |e: &QuadElement| base.sigma(i, e);
    (z * s(&g[0]) + s(&g[1])) / (z * s(&g[2]) + s(&g[3]))
}

/// Does `ψ(u)` fix `τ₀` numerically and commute with `W` exactly (hence fix both endpoints)?
pub fn check_unit_fixes_cycle(
    u: &RelativeUnit,
    cycle: &ATRCycle,
    ext: &ATRExtension,
) -> Result<bool> {
    let g = u.psi(cycle)?;
    if mat_mul(&g, &cycle.w) != mat_mul(&cycle.w, &g) {
        return Ok(false);
    }
    let base = &ext.base;
    let moved = act_at(base, 0, &g, cycle.tau0);
    if (moved - cycle.tau0).norm() > FIXED_POINT_TOLERANCE * cycle.tau0.norm().max(1.0) {
        return Ok(false);
    }
    for e in [cycle.endpoints.0, cycle.endpoints.1] {
        let img = act_at(base, 1, &g, Complex64::new(e, 0.0));
        if (img.re - e).abs() > FIXED_POINT_TOLERANCE * e.abs().max(1.0) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Default coefficient bound for [`unit_stabilizer_search`].
pub const DEFAULT_UNIT_BOUND: i64 = 120;

/// Built-in extensions `(D_F, δ, f)`, written as `m + n√D_F` strings.
pub const DEFAULT_EXTENSIONS: [(i64, &str, &str); 6] = [
    (5, "1-3*sqrt5", "1"),
    (5, "3-2*sqrt5", "1"),
    (5, "1-4*sqrt5", "1"),
    (5, "1-2*sqrt5", "1"),
    (2, "1-sqrt2", "1"),
    (13, "1-sqrt13", "1"),
];

/// Build an extension from strings as in [`DEFAULT_EXTENSIONS`].
pub fn extension_from_strings(d: i64, delta: &str, f: &str) -> Result<ATRExtension> {
    let base = BaseField::new(d)?;
    let delta = parse_element(&base, delta)?;
    let f = parse_element(&base, f)?;
    ATRExtension::new(base, delta, f)
}

/// `|N_{F/Q}(f²d_K)|`.
pub fn atr_discriminant_norm(ext: &ATRExtension) -> BigInt {
    ext.disc().norm().abs()
}

/// `16·|N_{F/Q}(f²d_K)|`.
pub fn atr_toral_discriminant(ext: &ATRExtension) -> BigInt {
    atr_discriminant_norm(ext) * 16
}

/// `δ` or `f` as `m + n√D_F` from a string like `"1-3*sqrt5"`, `"-2"`, `"sqrt5"`.
pub fn parse_element(base: &BaseField, s: &str) -> Result<QuadElement> {
    let d = base.field.squarefree();
    let tag = format!("sqrt{d}");
    let cleaned: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::InvalidInput(format!("cannot parse '{s}' as m + n*sqrt{d}"));
    let mut m = 0i64;
    let mut n = 0i64;
    let mut rest = cleaned.as_str();
    while !rest.is_empty() {
        let sign = if let Some(r) = rest.strip_prefix('-') {
            rest = r;
            -1
        } else {
            rest = rest.strip_prefix('+').unwrap_or(rest);
            1
        };
        let end = rest[1..]
            .find(['+', '-'])
            .map(|i| i + 1)
            .unwrap_or(rest.len());
        let (term, tail) = rest.split_at(end);
        rest = tail;
        if let Some(coef) = term.strip_suffix(&tag) {
            let coef = coef.strip_suffix('*').unwrap_or(coef);
            let c = if coef.is_empty() {
                1
            } else {
                coef.parse::<i64>().map_err(|_| bad())?
            };
            n += sign * c;
        } else {
            m += sign * term.parse::<i64>().map_err(|_| bad())?;
        }
    }
    Ok(base.elem(m, n))
}

/// `(m, n)` with `e = m + n√D_F`, when both are integers.
pub fn as_int_sqrt(base: &BaseField, e: &QuadElement) -> Option<(i64, i64)> {
    // e = (x + y√d_K)/2 with √d_K = √D_F or 2√D_F
    if e.x().is_odd() {
        return None;
    }
    let n = if base.field.t() == 1 {
        if e.y().is_odd() {
            return None;
        }
        let half_y: BigInt = e.y() / 2;
        half_y
    } else {
        e.y().clone()
    };
    let m: BigInt = e.x() / 2;
    Some((m.to_i64()?, n.to_i64()?))
}
