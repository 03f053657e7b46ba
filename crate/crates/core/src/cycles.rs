//! Stark–Heegner cycles `Y_ψ × {τ_ψ}` and their canonical sample points.
//!
//! For `p` inert in `K` and prime to `f` there is one cycle per class of
//! `Pic⁺(O_f[1/p])`, obtained by letting the class group act on the
//! principal embedding. A sample `(z_t, τ_ψ)` is moved into the fundamental
//! set `F × red⁻¹(v₀)` of `PGL₂⁺(Z[1/p])` in two stages: a navigator
//! `g₁ = [[1, −a], [0, p^n]]` takes `red(τ_ψ)` to `v₀`, then `δ ∈ SL₂(Z)`
//! takes `g₁·z_t` into `F`. The stabiliser of `v₀` in `PGL₂⁺(Z[1/p])` is
//! `PSL₂(Z)`, so for `z*` in the interior of `F` the pair
//! `(z*, residue(δg₁τ_ψ))` does not depend on the choices made.
//!
//! Every form of discriminant `Δ` has `p ∤ a` when `(Δ/p) = −1`, so
//! `τ_ψ` already reduces to `v₀` and the canonical navigator is the identity.
//! [`CycleSampler`] exploits this and tracks residues in `F_{p²}` only.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

use crate::embeddings::{embedding_from_form, star_action, Embedding};
use crate::error::{precondition, Error, Result};
use crate::forms::{picard_s, NarrowClassGroup, QForm};
use crate::hyperbolic::{
    reduce_to_fundamental_domain, GeodesicArc, GeodesicWalk, Semicircle, UHPoint,
};
use crate::mat::IMat2;
use crate::orders::{period_length, Order, QuadField};
use crate::padic::{embed_sqrt_dk, moebius_qp2, Fp2, Fp2Field, PadicNumber, Qp2Element, RMat2};
use crate::tree::{act_on_vertex, navigate_to_base, reduce_point, residue_class};

/// Number of times [`canonical_points`] doubles the precision before giving up.
pub const MAX_PRECISION_DOUBLINGS: u32 = 3;

/// One Stark–Heegner cycle of conductor `f`.
#[derive(Debug, Clone)]
pub struct SHCycle {
    p: u64,
    precision: u32,
    class: usize,
    embedding: Embedding,
    form: QForm,
    tau_p: Qp2Element,
    geodesic: GeodesicArc,
    walk: GeodesicWalk,
    disc_p: i128,
}

impl SHCycle {
    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// Index of the class in the group returned by [`picard_s`].
    pub fn class(&self) -> usize {
        self.class
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn form(&self) -> QForm {
        self.form
    }

    /// The p-adic fixed point `τ_ψ` (eigenvalue `+f√d_K`).
    pub fn tau_p(&self) -> &Qp2Element {
        &self.tau_p
    }

    pub fn geodesic(&self) -> &GeodesicArc {
        &self.geodesic
    }

    pub fn walk(&self) -> &GeodesicWalk {
        &self.walk
    }

    pub fn disc_p(&self) -> i128 {
        self.disc_p
    }

    pub fn period(&self) -> f64 {
        self.geodesic.period()
    }

    /// The canonical navigator `navigate_to_base(red(τ_ψ))`.
    pub fn navigator(&self) -> Result<RMat2> {
        Ok(navigate_to_base(&reduce_point(&self.tau_p)?))
    }
}

/// A sample on the mock Hilbert modular surface in canonical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePoint {
    pub t_index: usize,
    pub z: UHPoint,
    /// Residue class number in `0..p²−p`, see [`Fp2Field::class_index`].
    pub r: usize,
    /// `z` lies within tolerance of the boundary of the fundamental domain.
    pub boundary: bool,
}

/// The prime-to-`p` part of `Δ`.
pub fn disc_p(disc: i128, p: u64) -> i128 {
    let mut d = disc;
    while d % p as i128 == 0 {
        d /= p as i128;
    }
    d
}

/// `4^degree · |norm|`.
pub fn toral_discriminant_from_norm(degree: u32, norm: i128) -> i128 {
    4i128.pow(degree) * norm.abs()
}

/// Discriminant of the toral set of `O_f` over `F = Q`: `4·f²·d_K`.
pub fn toral_discriminant(field: &QuadField, f: i64) -> i128 {
    let f = f as i128;
    toral_discriminant_from_norm(1, f * f * field.d_k() as i128)
}

fn rational(n: i128, d: i128) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `τ = (W₁₁ + f√d_K)/W₂₁` in `Q_{p²}`.
fn tau_of(e: &Embedding, sqrt_dk: &Qp2Element) -> Result<Qp2Element> {
    let w = e.w();
    let p = sqrt_dk.prime();
    let prec = sqrt_dk.precision();
    let shift = PadicNumber::from_rational(p, &rational(w.a, w.c), prec)?;
    let factor = PadicNumber::from_rational(p, &rational(e.conductor() as i128, w.c), prec)?;
    Ok(sqrt_dk.scale(&factor).add(&Qp2Element::from_padic(shift)?))
}

/// The `h⁺(O_f[1/p])` cycles of conductor `f`, one per class, in class order.
pub fn build_cycles(field: QuadField, f: i64, p: u64, precision: u32) -> Result<Vec<SHCycle>> {
    if p == 2 {
        return Err(Error::InvalidInput(
            "p = 2 is not supported; p must be odd".into(),
        ));
    }
    let order = Order::new(field, f)?;
    let group = picard_s(&order, p)?;
    build_cycles_in(&group, &order, p, precision)
}

/// [`build_cycles`] for a class group computed by the caller.
pub fn build_cycles_in(
    group: &NarrowClassGroup,
    order: &Order,
    p: u64,
    precision: u32,
) -> Result<Vec<SHCycle>> {
    let field = order.field();
    let f = order.conductor();
    let period = period_length(order)?;
    let sqrt_dk = embed_sqrt_dk(&field, p, precision)?;
    let base = embedding_from_form(&QForm::principal(group.disc()), field, f)?;
    let mut out = Vec::with_capacity(group.order());
    for (i, t) in group.classes().iter().enumerate() {
        let e = star_action(t, &base)?;
        let form = e
            .form()
            .ok_or_else(|| Error::Inconsistency(format!("{e:?} lost its form")))?;
        if group.class_of(&form)? != i {
            return Err(Error::Inconsistency(format!(
                "class {t:?} acting on 1 landed outside its class"
            )));
        }
        let tau_p = tau_of(&e, &sqrt_dk)?;
        out.push(SHCycle {
            p,
            precision,
            class: i,
            embedding: e,
            form,
            tau_p,
            geodesic: GeodesicArc::from_form(form, period),
            walk: GeodesicWalk::new(&form, period)?,
            disc_p: disc_p(group.disc(), p),
        });
    }
    Ok(out)
}

/// Is `τ_ψ` fixed by `ψ(g)` for `g` in `{f·ω_{K,0}, ε⁺}`, at precision?
pub fn check_fixed_point(c: &SHCycle) -> Result<bool> {
    let w = RMat2::from_int(&c.embedding.w());
    let aut = RMat2::from_int(&crate::hyperbolic::automorph(&c.embedding)?);
    let min = c.precision / 2;
    for g in [w, aut] {
        if !moebius_qp2(&g, &c.tau_p, min)?.approx_eq(&c.tau_p) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `M` canonical points, equally spaced in arc length from the apex of the
/// cycle's own form, using the canonical navigator.
pub fn canonical_points(c: &SHCycle, m: usize) -> Result<Vec<CyclePoint>> {
    let g = c.navigator()?;
    canonical_points_with_navigator(c, m, &g)
}

/// [`canonical_points`] with an arbitrary navigator `g` (positive
/// determinant, `g·red(τ_ψ) = v₀`). Retries at doubled precision on
/// underflow.
pub fn canonical_points_with_navigator(
    c: &SHCycle,
    m: usize,
    g: &RMat2,
) -> Result<Vec<CyclePoint>> {
    if m == 0 {
        return Err(Error::InvalidInput(
            "sample count must be at least 1".into(),
        ));
    }
    if !g.det().is_positive() {
        return Err(precondition!("navigator must have positive determinant"));
    }
    if !act_on_vertex(g, &reduce_point(&c.tau_p)?)?.is_base() {
        return Err(precondition!("navigator does not move red(τ) to v₀"));
    }
    // red(τ_ψ) = v₀, so a valid navigator stabilises v₀ and lies in SL₂(Z)
    let g = g
        .to_int()
        .filter(|h| h.det() == 1)
        .ok_or_else(|| precondition!("navigator {g:?} is not in SL₂(Z)"))?;
    let g = &g;
    let mut cycle = c.clone();
    let mut attempt = 0;
    loop {
        match points_at_precision(&cycle, m, g) {
            Err(Error::InsufficientPrecision(msg)) => {
                if attempt == MAX_PRECISION_DOUBLINGS {
                    return Err(Error::InsufficientPrecision(msg));
                }
                attempt += 1;
                let prec = cycle.precision * 2;
                let sqrt_dk = embed_sqrt_dk(&cycle.embedding.field(), cycle.p, prec)?;
                cycle.tau_p = tau_of(&cycle.embedding, &sqrt_dk)?;
                cycle.precision = prec;
            }
            other => return other,
        }
    }
}

fn points_at_precision(c: &SHCycle, m: usize, g: &IMat2) -> Result<Vec<CyclePoint>> {
    let min = c.precision / 2;
    let fp2 = Fp2Field::new(c.p)?;
    let step = c.period() / m as f64;
    // g·Y_ψ is the geodesic of q∘g⁻¹; g·z_t sits at arc length t + offset on it
    let moved_form = c.form.act(&g.adj());
    let walk = GeodesicWalk::new(&moved_form, c.period())?;
    let apex = Semicircle::of(&c.form).point(0.0).act(g);
    let offset = Semicircle::of(&moved_form).parameter(apex.z());
    let tau = moebius_qp2(&RMat2::from_int(g), &c.tau_p, min)?;
    let chart_taus = walk.transport(&tau, |h, t| moebius_qp2(&RMat2::from_int(h), t, min))?;
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let (j, w) = walk.chart_point(k as f64 * step + offset);
        let (z, delta) = reduce_to_fundamental_domain(&w)?;
        let star = moebius_qp2(&RMat2::from_int(&delta), &chart_taus[j], min)?;
        let (x, y) = residue_class(&star)?;
        let r = fp2
            .class_index(Fp2 { x, y })
            .ok_or_else(|| Error::Inconsistency(format!("residue ({x}, {y}) lies in P¹(F_p)")))?;
        out.push(CyclePoint {
            t_index: k,
            z,
            r,
            boundary: z.near_boundary(),
        });
    }
    Ok(out)
}

/// Fast canonical sampling: per-chart residues in `F_{p²}` and the
/// identity navigator. Agrees with [`canonical_points`] exactly.
#[derive(Debug, Clone)]
pub struct CycleSampler {
    walk: GeodesicWalk,
    fp2: Fp2Field,
    chart_residues: Vec<Fp2>,
}

impl CycleSampler {
    pub fn new(c: &SHCycle) -> Result<Self> {
        let fp2 = Fp2Field::new(c.p)?;
        if !reduce_point(&c.tau_p)?.is_base() {
            return Err(Error::Inconsistency(format!(
                "τ of {:?} does not reduce to v₀",
                c.form
            )));
        }
        let base = fp2.elem(
            c.tau_p.x().residue()? as i128,
            c.tau_p.y().residue()? as i128,
        );
        Self::with_walk(c.walk.clone(), fp2, base)
    }

    /// A sampler for the cycle of `form` whose p-adic point has residue `tau_residue`.
    pub fn from_parts(form: &QForm, period: f64, p: u64, tau_residue: Fp2) -> Result<Self> {
        Self::with_walk(
            GeodesicWalk::new(form, period)?,
            Fp2Field::new(p)?,
            tau_residue,
        )
    }

    fn with_walk(walk: GeodesicWalk, fp2: Fp2Field, base: Fp2) -> Result<Self> {
        let chart_residues = walk.transport(&base, |m, t| {
            fp2.moebius(m, *t)
                .ok_or_else(|| Error::Inconsistency("F_p² point hit a pole".into()))
        })?;
        Ok(CycleSampler {
            walk,
            fp2,
            chart_residues,
        })
    }

    pub fn period(&self) -> f64 {
        self.walk.period()
    }

    /// Canonical `(z*, r)` at arc length `t`.
    #[inline]
    pub fn sample(&self, t: f64) -> Result<(UHPoint, usize)> {
        let (j, z, delta) = self.walk.reduce(t)?;
        let r = self
            .fp2
            .moebius(&delta, self.chart_residues[j])
            .and_then(|x| self.fp2.class_index(x))
            .ok_or_else(|| Error::Inconsistency("residue left the unramified fiber".into()))?;
        Ok((z, r))
    }

    /// `M` equally spaced canonical points, as in [`canonical_points`].
    pub fn points(&self, m: usize) -> Result<Vec<CyclePoint>> {
        if m == 0 {
            return Err(Error::InvalidInput(
                "sample count must be at least 1".into(),
            ));
        }
        let step = self.period() / m as f64;
        (0..m)
            .map(|k| {
                let (z, r) = self.sample(k as f64 * step)?;
                Ok(CyclePoint {
                    t_index: k,
                    z,
                    r,
                    boundary: z.near_boundary(),
                })
            })
            .collect()
    }
}

/// Residue of `τ = (−b − f√d_K)/(2a)` in `F_{p²}`, given the residue `c̄`
/// of `√d_K = c·α`.
pub fn tau_residue(form: &QForm, f: i64, sqrt_dk_residue: u64, p: u64) -> Result<Fp2> {
    let fp2 = Fp2Field::new(p)?;
    let a2 = (2 * form.a).rem_euclid(p as i128);
    if a2 == 0 {
        return Err(precondition!(
            "{p} divides the leading coefficient of {form:?}"
        ));
    }
    let inv = fp2.inv(fp2.elem(a2, 0)).expect("unit").x as i128;
    Ok(fp2.elem(-form.b * inv, -(f as i128) * sqrt_dk_residue as i128 * inv))
}
