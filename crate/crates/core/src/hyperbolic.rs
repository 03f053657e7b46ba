//! Upper half plane geometry: fundamental-domain reduction, geodesics of
//! embeddings, and arc-length sampling of closed geodesics.
//!
//! The geodesic of an embedding is oriented from `τ'_ψ` (repelling fixed
//! point of the automorph) to `τ_ψ` (attracting) and parametrised by
//! arc length from its apex:
//!
//! ```text
//! z(t) = center + radius·(σ·tanh t + i·sech t),   σ = sign(τ_ψ − τ'_ψ)
//! ```
//!
//! so that `ψ(ε⁺)·z(t) = z(t + L)`.
//!
//! Long geodesics dip exponentially close to the real axis, where direct
//! floating-point reduction loses all accuracy. [`GeodesicWalk`] avoids
//! this by following the ρ-cycle of reduced forms: each reduced form gives
//! an exact chart `z ↦ γ_j·z` in which the relevant stretch of the geodesic
//! stays near the apex of a semicircle of radius above 1/2.

use num_complex::Complex64;

use crate::embeddings::Embedding;
use crate::error::{Error, Result};
use crate::forms::{reduce_to_reduced, rho_cycle, QForm};
use crate::mat::IMat2;
use crate::orders::totally_positive_fundamental_unit;

/// Iteration guard for [`reduce_to_fundamental_domain`].
pub const MAX_REDUCTION_STEPS: usize = 1000;

/// Distance below which a reduced point counts as lying on the boundary.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UHPoint(Complex64);

impl UHPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
            Ok(UHPoint(z))
        } else {
            Err(Error::InvalidInput(format!(
                "{z} is not in the upper half plane"
            )))
        }
    }

    pub fn from_parts(x: f64, y: f64) -> Result<Self> {
        Self::new(Complex64::new(x, y))
    }

    pub fn z(&self) -> Complex64 {
        self.0
    }

    pub fn re(&self) -> f64 {
        self.0.re
    }

    pub fn im(&self) -> f64 {
        self.0.im
    }

    /// Möbius action of a matrix with positive determinant.
    pub fn act(&self, g: &IMat2) -> UHPoint {
        debug_assert!(g.det() > 0);
        UHPoint(g.apply(self.0))
    }

    /// Is the point in the closed standard fundamental domain, up to [`BOUNDARY_TOLERANCE`]?
    pub fn in_fundamental_domain(&self) -> bool {
        self.0.re.abs() <= 0.5 + BOUNDARY_TOLERANCE
            && self.0.norm_sqr() >= 1.0 - 2.0 * BOUNDARY_TOLERANCE
    }

    /// Within [`BOUNDARY_TOLERANCE`] of `|Re z| = 1/2` or `|z| = 1`.
    pub fn near_boundary(&self) -> bool {
        (self.0.re.abs() - 0.5).abs() < BOUNDARY_TOLERANCE
            || (self.0.norm() - 1.0).abs() < BOUNDARY_TOLERANCE
    }
}

/// Hyperbolic distance.
pub fn distance(z: &UHPoint, w: &UHPoint) -> f64 {
    let d = (z.0 - w.0).norm_sqr();
    (1.0 + d / (2.0 * z.im() * w.im())).acosh()
}

/// Reduce into `{|Re z| ≤ 1/2, |z| ≥ 1}`; returns `(γ·z, γ)` with `γ ∈ SL₂(Z)`.
///
/// Boundary ties go to `Re z ≥ 0`, with ties detected up to
/// [`BOUNDARY_TOLERANCE`]: the strip is `(−1/2 + tol, 1/2 + tol]` and points
/// within tolerance of the unit circle with `Re z < 0` are flipped by `S`.
pub fn reduce_to_fundamental_domain(z: &UHPoint) -> Result<(UHPoint, IMat2)> {
    let tol = BOUNDARY_TOLERANCE;
    let mut w = z.0;
    let mut g = IMat2::IDENTITY;
    for _ in 0..MAX_REDUCTION_STEPS {
        let n = (w.re - 0.5 - tol).ceil();
        if n != 0.0 {
            w.re -= n;
            g = IMat2::translation(-(n as i128)) * g;
        }
        let r2 = w.norm_sqr();
        if r2 < 1.0 - 2.0 * tol || (r2 <= 1.0 + 2.0 * tol && w.re < 0.0) {
            w = -w.inv();
            g = IMat2::S * g;
            continue;
        }
        if w.im <= 0.0 || !w.im.is_finite() {
            break;
        }
        return Ok((UHPoint(w), g));
    }
    Err(Error::BoundExhausted(format!(
        "fundamental-domain reduction of {} did not terminate",
        z.0
    )))
}

/// Closed geodesic of an embedding, with exact endpoints carried by its form.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicArc {
    form: QForm,
    tau: f64,
    tau_conj: f64,
    period: f64,
}

impl GeodesicArc {
    /// Geodesic of a form whose closed period is `period`.
    pub fn from_form(form: QForm, period: f64) -> Self {
        let (tau, tau_conj) = form.roots();
        GeodesicArc {
            form,
            tau,
            tau_conj,
            period,
        }
    }

    pub fn form(&self) -> QForm {
        self.form
    }

    /// Attracting endpoint `(−b − √Δ)/2a`.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Repelling endpoint `(−b + √Δ)/2a`.
    pub fn tau_conj(&self) -> f64 {
        self.tau_conj
    }

    pub fn center(&self) -> f64 {
        (self.tau + self.tau_conj) / 2.0
    }

    pub fn radius(&self) -> f64 {
        (self.tau - self.tau_conj).abs() / 2.0
    }

    /// Orientation sign `σ = sign(τ − τ')`.
    pub fn sigma(&self) -> f64 {
        if self.tau > self.tau_conj {
            1.0
        } else {
            -1.0
        }
    }

    /// Period `L = 2 log ε⁺`.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// The point at signed arc length `t` from the apex.
    pub fn point(&self, t: f64) -> UHPoint {
        Semicircle::of(&self.form).point(t)
    }

    /// Arc-length parameter of a point on the geodesic.
    pub fn parameter(&self, z: &UHPoint) -> f64 {
        Semicircle::of(&self.form).parameter(z.z())
    }
}

/// Oriented semicircle of a form, in the arc-length parametrisation above.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Semicircle {
    center: f64,
    radius: f64,
    sigma: f64,
}

impl Semicircle {
    pub(crate) fn of(q: &QForm) -> Self {
        let sq = (q.disc() as f64).sqrt();
        let a = q.a as f64;
        // σ = sign(τ − τ') = sign(−√Δ/a)
        Semicircle {
            center: -(q.b as f64) / (2.0 * a),
            radius: sq / (2.0 * a.abs()),
            sigma: -a.signum(),
        }
    }

    #[inline]
    pub(crate) fn point(&self, t: f64) -> UHPoint {
        // tanh and sech from a single exponential
        let e = (-2.0 * t.abs()).exp();
        let th = t.signum() * (1.0 - e) / (1.0 + e);
        let sh = 2.0 * (-t.abs()).exp() / (1.0 + e);
        UHPoint(Complex64::new(
            self.center + self.radius * self.sigma * th,
            self.radius * sh,
        ))
    }

    pub(crate) fn parameter(&self, z: Complex64) -> f64 {
        let s = self.sigma * (z.re - self.center);
        if s >= 0.0 {
            ((self.radius + s) / z.im).ln()
        } else {
            -((self.radius - s) / z.im).ln()
        }
    }
}

/// The geodesic `Y_ψ` with period `2 log ε⁺(O_f)`.
pub fn geodesic_from_embedding(e: &Embedding) -> Result<GeodesicArc> {
    let form = e
        .form()
        .ok_or_else(|| crate::error::precondition!("{e:?} has no associated integral form"))?;
    let order = e.field().order(e.conductor())?;
    let eps = totally_positive_fundamental_unit(&order)?;
    Ok(GeodesicArc::from_form(form, 2.0 * eps.ln_unit()))
}

/// `M` points equally spaced in arc length over one period, starting at the apex.
pub fn sample_geodesic(g: &GeodesicArc, m: usize) -> Result<Vec<UHPoint>> {
    if m == 0 {
        return Err(Error::InvalidInput(
            "sample count must be at least 1".into(),
        ));
    }
    let step = g.period / m as f64;
    Ok((0..m).map(|k| g.point(k as f64 * step)).collect())
}

/// `ψ(ε⁺)`, generator of the stabiliser of `Y_ψ` in `SL₂(Z)`.
pub fn automorph(e: &Embedding) -> Result<IMat2> {
    let order = e.field().order(e.conductor())?;
    let eps = totally_positive_fundamental_unit(&order)?;
    let g = e.psi(&eps).ok_or_else(|| {
        crate::error::precondition!("{e:?} is not optimal, ψ(ε⁺) is not integral")
    })?;
    debug_assert_eq!(g.det(), 1);
    Ok(g)
}

/// Largest eigenvalue of a hyperbolic matrix with positive trace.
pub fn largest_eigenvalue(g: &IMat2) -> f64 {
    let t = g.trace() as f64;
    (t + (t * t - 4.0 * g.det() as f64).sqrt()) / 2.0
}

/// One reduced-form chart of a closed geodesic.
#[derive(Debug, Clone)]
pub struct Chart {
    /// The reduced form whose semicircle is `γ_j·Y`.
    pub form: QForm,
    /// Index `j` of the form in the ρ-cycle.
    pub cycle_index: usize,
    /// Arc-length position of the chart's apex on the original geodesic, in `[0, L)`.
    pub apex: f64,
    circle: Semicircle,
}

impl Chart {
    /// Point at offset `u` from this chart's apex, in chart coordinates.
    #[inline]
    pub fn point(&self, u: f64) -> UHPoint {
        self.circle.point(u)
    }
}

/// A closed geodesic covered by the charts of its reduced cycle.
///
/// The chart maps `γ_j ∈ SL₂(Z)` grow like `e^{L/2}` and are never formed;
/// [`GeodesicWalk::transport`] applies them one ρ-step at a time.
#[derive(Debug, Clone)]
pub struct GeodesicWalk {
    period: f64,
    charts: Vec<Chart>,
    entry: IMat2,
    steps_inv: Vec<IMat2>,
}

impl GeodesicWalk {
    /// Charts for the geodesic of `form`, whose closed period is `period`.
    ///
    /// Fails with an inconsistency if the chart gaps do not add up to the period.
    pub fn new(form: &QForm, period: f64) -> Result<Self> {
        let base = Semicircle::of(form);
        let (r0, w0) = reduce_to_reduced(form)?;
        // r0 = form∘w0, so the first chart map is w0⁻¹ and γ_{j+1} = s_j⁻¹·γ_j
        let (cycle, steps) = rho_cycle(&r0);
        let apex_of = |q: &QForm| Semicircle::of(q).point(0.0);
        let start = base.parameter(w0.apply(apex_of(&r0).z()));
        let mut positions = Vec::with_capacity(cycle.len() + 1);
        positions.push(start);
        let mut total = 0.0;
        for j in 0..cycle.len() {
            let next = if j + 1 < cycle.len() {
                cycle[j + 1]
            } else {
                cycle[0]
            };
            // chart_j point = s_j · chart_{j+1} point
            let there = steps[j].apply(apex_of(&next).z());
            let gap = Semicircle::of(&cycle[j]).parameter(there);
            total += gap;
            positions.push(start + total);
        }
        if ((total.abs() - period) / period).abs() > 1e-8 {
            return Err(Error::Inconsistency(format!(
                "chart gaps of {form:?} sum to {total}, expected ±{period}"
            )));
        }
        let mut charts: Vec<Chart> = cycle
            .iter()
            .zip(positions)
            .enumerate()
            .map(|(j, (q, pos))| Chart {
                form: *q,
                cycle_index: j,
                apex: pos.rem_euclid(period),
                circle: Semicircle::of(q),
            })
            .collect();
        charts.sort_by(|a, b| a.apex.total_cmp(&b.apex));
        let steps_inv = steps[..cycle.len() - 1].iter().map(IMat2::adj).collect();
        Ok(GeodesicWalk {
            period,
            charts,
            entry: w0.adj(),
            steps_inv,
        })
    }

    /// `γ_j·x` for every chart `j` (in the order of [`GeodesicWalk::charts`]),
    /// given the action of a single matrix.
    pub fn transport<T: Clone>(
        &self,
        x: &T,
        act: impl Fn(&IMat2, &T) -> Result<T>,
    ) -> Result<Vec<T>> {
        let mut by_cycle = Vec::with_capacity(self.charts.len());
        by_cycle.push(act(&self.entry, x)?);
        for (j, s) in self.steps_inv.iter().enumerate() {
            let next = act(s, &by_cycle[j])?;
            by_cycle.push(next);
        }
        Ok(self
            .charts
            .iter()
            .map(|c| by_cycle[c.cycle_index].clone())
            .collect())
    }

    /// The chart maps `γ_j`, if they fit in 128 bits.
    pub fn chart_matrices(&self) -> Option<Vec<IMat2>> {
        self.transport(&IMat2::IDENTITY, |m, g| {
            m.checked_mul(g)
                .ok_or_else(|| Error::BoundExhausted("chart map overflows".into()))
        })
        .ok()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    /// The chart whose apex is nearest to `t` (mod the period), and the offset from that apex.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let t = t.rem_euclid(self.period);
        let n = self.charts.len();
        let idx = self.charts.partition_point(|c| c.apex <= t);
        let before = if idx == 0 { n - 1 } else { idx - 1 };
        let after = if idx == n { 0 } else { idx };
        let wrap = |d: f64| d - self.period * (d / self.period).round();
        let db = wrap(t - self.charts[before].apex);
        let da = wrap(t - self.charts[after].apex);
        if db.abs() <= da.abs() {
            (before, db)
        } else {
            (after, da)
        }
    }

    /// Chart coordinates of the point at arc length `t` from the original apex.
    pub fn chart_point(&self, t: f64) -> (usize, UHPoint) {
        let (j, u) = self.locate(t);
        (j, self.charts[j].point(u))
    }

    /// Reduce the point at arc length `t` to the fundamental domain.
    ///
    /// Returns the chart index, the reduced point, and `δ` with
    /// `z* = δ·γ_j·z(t)` (up to a whole number of periods).
    pub fn reduce(&self, t: f64) -> Result<(usize, UHPoint, IMat2)> {
        let (j, w) = self.chart_point(t);
        let (z, d) = reduce_to_fundamental_domain(&w)?;
        Ok((j, z, d))
    }
}
