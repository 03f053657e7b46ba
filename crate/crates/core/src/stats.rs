//! Empirical measures of canonical cycle points against the Haar limit.
//!
//! The limit measure on `F × red⁻¹(v₀)` is the product of the hyperbolic
//! probability measure `(3/π)·dx dy/y²` and the uniform measure on the
//! `p² − p` residue classes of `P¹(F_{p²}) ∖ P¹(F_p)`: the fiber over `v₀` is
//! `PGL₂(Z_p)/(unramified torus)`, whose Haar measure pushes forward to the
//! uniform measure on `GL₂(F_p)/F_{p²}^×`, a set of size `p² − p`.
//!
//! Test functions are indicators of boxes in `{y ≥ 1, |x| ≤ 1/2}`; every
//! point outside all boxes lands in an implicit rest cell.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::arith::{
    is_fundamental_discriminant, is_real_quadratic_discriminant, kronecker_prime,
    split_discriminant, SpfSieve,
};
use crate::cycles::{tau_residue, CycleSampler};
use crate::error::{Error, Result};
use crate::forms::narrow_class_group_sieved;
use crate::hyperbolic::{GeodesicWalk, UHPoint};
use crate::orders::{period_length, Order, QuadField};
use crate::padic::embed_sqrt_dk;

/// Version tag written into every CSV row and JSON summary.
pub const SCHEMA_VERSION: u32 = 1;

/// Default arc-length step between samples.
pub const DEFAULT_STEP: f64 = 0.01;

/// Cells with fewer expected counts are merged before the chi-square test.
pub const MIN_EXPECTED: f64 = 5.0;

/// Pass/fail thresholds for the soft statistical checks. These are
/// empirical and meant to be overridden from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Largest acceptable TV distance to uniform on residue classes.
    pub tv_max: f64,
    /// Largest acceptable `|observed − expected|` for a box mass.
    pub box_tolerance: f64,
    /// Quantile of the reference chi-square law the statistic must stay below.
    pub chi_square_quantile: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            tv_max: 0.05,
            box_tolerance: 0.03,
            chi_square_quantile: 0.999,
        }
    }
}

/// The closed rectangle `[x₁, x₂] × [y₁, y₂]`; `y₂` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypBox {
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
}

impl HypBox {
    pub fn new(x1: f64, x2: f64, y1: f64, y2: f64) -> Result<Self> {
        let b = HypBox { x1, x2, y1, y2 };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.x1.is_finite()
            && self.x2.is_finite()
            && self.y1.is_finite()
            && !self.y2.is_nan()
            && -0.5 <= self.x1
            && self.x1 <= self.x2
            && self.x2 <= 0.5
            && 1.0 <= self.y1
            && self.y1 <= self.y2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "box {self} is not inside {{|x| ≤ 1/2, y ≥ 1}}"
            )))
        }
    }

    pub fn contains(&self, z: &UHPoint) -> bool {
        (self.x1..=self.x2).contains(&z.re()) && self.y1 <= z.im() && z.im() <= self.y2
    }

    fn overlaps(&self, o: &HypBox) -> bool {
        self.x1 < o.x2 && o.x1 < self.x2 && self.y1 < o.y2 && o.y1 < self.y2
    }
}

impl fmt::Display for HypBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]x[{},{}]", self.x1, self.x2, self.y1, self.y2)
    }
}

/// `(3/π)·(x₂ − x₁)·(1/y₁ − 1/y₂)`.
pub fn hyperbolic_box_mass(b: &HypBox) -> Result<f64> {
    b.validate()?;
    Ok(3.0 / PI * (b.x2 - b.x1) * (1.0 / b.y1 - 1.0 / b.y2))
}

/// Pairwise disjoint boxes plus an implicit rest cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxPartition {
    boxes: Vec<HypBox>,
}

impl BoxPartition {
    pub fn new(boxes: Vec<HypBox>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::InvalidInput("partition has no boxes".into()));
        }
        for b in &boxes {
            b.validate()?;
            if b.y1 == b.y2 || b.x1 == b.x2 {
                return Err(Error::InvalidInput(format!("box {b} is degenerate")));
            }
        }
        for (i, a) in boxes.iter().enumerate() {
            for b in &boxes[i + 1..] {
                if a.overlaps(b) {
                    return Err(Error::InvalidInput(format!("boxes {a} and {b} overlap")));
                }
            }
        }
        Ok(BoxPartition { boxes })
    }

    /// A 4 × 4 grid: columns of width 1/4, rows split at `y = 1.15, 1.4, 1.9`.
    pub fn default_grid() -> Self {
        let xs = [-0.5, -0.25, 0.0, 0.25, 0.5];
        let ys = [1.0, 1.15, 1.4, 1.9, f64::INFINITY];
        let mut boxes = Vec::new();
        for x in xs.windows(2) {
            for y in ys.windows(2) {
                boxes.push(HypBox {
                    x1: x[0],
                    x2: x[1],
                    y1: y[0],
                    y2: y[1],
                });
            }
        }
        BoxPartition { boxes }
    }

    pub fn boxes(&self) -> &[HypBox] {
        &self.boxes
    }

    /// Number of cells including the rest cell.
    pub fn cell_count(&self) -> usize {
        self.boxes.len() + 1
    }

    /// Cell index of a point; the rest cell is last.
    pub fn cell_of(&self, z: &UHPoint) -> usize {
        self.boxes
            .iter()
            .position(|b| b.contains(z))
            .unwrap_or(self.boxes.len())
    }

    /// Expected masses, rest cell last.
    pub fn masses(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self
            .boxes
            .iter()
            .map(|b| hyperbolic_box_mass(b).expect("validated"))
            .collect();
        let total: f64 = m.iter().sum();
        m.push(1.0 - total);
        m
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self.boxes.iter().map(|b| b.to_string()).collect();
        out.push("rest".into());
        out
    }
}

impl FromStr for BoxPartition {
    type Err = Error;

    /// `"x1,x2,y1,y2;x1,x2,y1,y2;..."`, with `inf` allowed for `y2`.
    fn from_str(s: &str) -> Result<Self> {
        let boxes = s
            .split(';')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| {
                let v = t
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<f64>, _>>()
                    .map_err(|e| Error::InvalidInput(format!("box '{t}': {e}")))?;
                if v.len() != 4 {
                    return Err(Error::InvalidInput(format!("box '{t}' needs four numbers")));
                }
                HypBox::new(v[0], v[1], v[2], v[3])
            })
            .collect::<Result<Vec<_>>>()?;
        BoxPartition::new(boxes)
    }
}

/// Counts on the joint (cell × residue class) table.
#[derive(Debug, Clone, PartialEq)]
pub struct Tally {
    cells: usize,
    classes: usize,
    counts: Vec<u64>,
}

impl Tally {
    pub fn new(cells: usize, classes: usize) -> Self {
        Tally {
            cells,
            classes,
            counts: vec![0; cells * classes],
        }
    }

    #[inline]
    pub fn add(&mut self, cell: usize, class: usize) {
        self.counts[cell * self.classes + class] += 1;
    }

    pub fn merge(&mut self, o: &Tally) {
        assert_eq!(
            (self.cells, self.classes),
            (o.cells, o.classes),
            "tally shapes differ"
        );
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Joint frequencies, row-major in (cell, class).
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        let n = self.total();
        if n == 0 {
            return Err(Error::InvalidInput("empty sample".into()));
        }
        Ok(self.counts.iter().map(|&c| c as f64 / n as f64).collect())
    }
}

/// A joint frequency table with the number of samples behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub cells: usize,
    pub classes: usize,
    pub freq: Vec<f64>,
    pub samples: u64,
}

impl Table {
    pub fn from_tally(t: &Tally) -> Result<Self> {
        Ok(Table {
            cells: t.cells,
            classes: t.classes,
            freq: t.frequencies()?,
            samples: t.total(),
        })
    }

    /// Equal-weight average of tables; sample counts add.
    pub fn pool(tables: &[Table]) -> Result<Self> {
        let first = tables
            .first()
            .ok_or_else(|| Error::InvalidInput("nothing to pool".into()))?;
        let mut freq = vec![0.0; first.freq.len()];
        let mut samples = 0;
        for t in tables {
            if (t.cells, t.classes) != (first.cells, first.classes) {
                return Err(Error::InvalidInput("tables of different shapes".into()));
            }
            for (a, b) in freq.iter_mut().zip(&t.freq) {
                *a += b / tables.len() as f64;
            }
            samples += t.samples;
        }
        Ok(Table {
            cells: first.cells,
            classes: first.classes,
            freq,
            samples,
        })
    }

    pub fn cell_marginal(&self) -> Vec<f64> {
        (0..self.cells)
            .map(|i| {
                self.freq[i * self.classes..(i + 1) * self.classes]
                    .iter()
                    .sum()
            })
            .collect()
    }

    pub fn class_marginal(&self) -> Vec<f64> {
        (0..self.classes)
            .map(|r| {
                (0..self.cells)
                    .map(|i| self.freq[i * self.classes + r])
                    .sum()
            })
            .collect()
    }
}

/// Total variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// `(1/2)·Σ_r |freq(r) − 1/(p² − p)|` from raw residue class labels.
pub fn residue_uniformity(classes: &[usize], p: u64) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    let k = (p * p - p) as usize;
    let mut counts = vec![0u64; k];
    for &r in classes {
        if r >= k {
            return Err(Error::InvalidInput(format!(
                "class {r} out of range for p = {p}"
            )));
        }
        counts[r] += 1;
    }
    let n = classes.len() as f64;
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    Ok(total_variation(&freq, &vec![1.0 / k as f64; k]))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// 99.9th percentile of the reference distribution.
    pub critical_999: f64,
    pub merged_cells: usize,
}

impl ChiSquareResult {
    pub fn below_999(&self) -> bool {
        self.statistic < self.critical_999
    }

    /// Is the statistic below the `q`-quantile of `χ²(df)`?
    pub fn below_quantile(&self, q: f64) -> Result<bool> {
        let law = ChiSquared::new(self.df as f64)
            .map_err(|e| Error::InvalidInput(format!("chi-square law: {e}")))?;
        Ok(self.statistic < law.inverse_cdf(q))
    }
}

/// Pearson's statistic for `observed` against `expected` counts, merging
/// every cell with expectation below [`MIN_EXPECTED`] into one pooled cell
/// (itself folded into the smallest retained cell if still too small).
/// Returns also the per-cell standardized residuals `(obs − exp)/√exp`,
/// `NaN` for merged cells.
pub fn chi_square(observed: &[f64], expected: &[f64]) -> Result<(ChiSquareResult, Vec<f64>)> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::InvalidInput(
            "observed and expected tables differ in size or are empty".into(),
        ));
    }
    let mut kept: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    let mut merged = 0;
    let mut residuals = Vec::with_capacity(observed.len());
    for (&o, &e) in observed.iter().zip(expected) {
        if e < MIN_EXPECTED {
            pooled.0 += o;
            pooled.1 += e;
            merged += 1;
            residuals.push(f64::NAN);
        } else {
            kept.push((o, e));
            residuals.push((o - e) / e.sqrt());
        }
    }
    if merged > 0 {
        if pooled.1 >= MIN_EXPECTED {
            kept.push(pooled);
        } else if let Some(smallest) = kept.iter_mut().min_by(|a, b| a.1.total_cmp(&b.1)) {
            smallest.0 += pooled.0;
            smallest.1 += pooled.1;
        }
    }
    if kept.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "sample too small: {} cell(s) with expected count ≥ {MIN_EXPECTED}",
            kept.len()
        )));
    }
    let statistic: f64 = kept.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let df = kept.len() - 1;
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::Inconsistency(e.to_string()))?;
    let result = ChiSquareResult {
        statistic,
        df,
        p_value: dist.sf(statistic),
        critical_999: dist.inverse_cdf(0.999),
        merged_cells: merged,
    };
    Ok((result, residuals))
}

/// Expected joint frequencies `mass(cell)/(p² − p)`.
pub fn product_law(partition: &BoxPartition, classes: usize) -> Vec<f64> {
    partition
        .masses()
        .iter()
        .flat_map(|m| std::iter::repeat(m / classes as f64).take(classes))
        .collect()
}

/// Chi-square of a joint table against the product law, with `N = samples`.
pub fn joint_independence(
    table: &Table,
    partition: &BoxPartition,
) -> Result<(ChiSquareResult, Vec<f64>)> {
    if table.cells != partition.cell_count() {
        return Err(Error::InvalidInput(
            "table does not match the partition".into(),
        ));
    }
    let n = table.samples as f64;
    let observed: Vec<f64> = table.freq.iter().map(|f| f * n).collect();
    let expected: Vec<f64> = product_law(partition, table.classes)
        .iter()
        .map(|f| f * n)
        .collect();
    chi_square(&observed, &expected)
}

/// Tally raw canonical points.
pub fn tally_points<'a>(
    points: impl IntoIterator<Item = (&'a UHPoint, usize)>,
    partition: &BoxPartition,
    classes: usize,
) -> Tally {
    let mut t = Tally::new(partition.cell_count(), classes);
    for (z, r) in points {
        t.add(partition.cell_of(z), r);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStat {
    pub label: String,
    pub observed: f64,
    pub expected: f64,
}

impl CellStat {
    pub fn deviation(&self) -> f64 {
        self.observed - self.expected
    }
}

/// Empirical-vs-limit comparison for one order or a pooled family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub schema_version: u32,
    pub label: String,
    pub disc_min: i128,
    pub disc_max: i128,
    pub p: Option<u64>,
    pub step: f64,
    pub orders: usize,
    pub cycles: usize,
    pub samples: u64,
    pub boxes: Vec<CellStat>,
    pub classes: Vec<CellStat>,
    /// Total variation of the class marginal from uniform (`p` given) or of
    /// the cell marginal from the hyperbolic masses (Duke).
    pub tv: f64,
    pub chi_square: Option<ChiSquareResult>,
    pub residuals: Vec<f64>,
}

impl StatsReport {
    fn from_table(
        label: String,
        range: (i128, i128),
        p: Option<u64>,
        step: f64,
        counts: (usize, usize),
        table: &Table,
        partition: &BoxPartition,
    ) -> Result<Self> {
        let masses = partition.masses();
        let boxes: Vec<CellStat> = partition
            .labels()
            .into_iter()
            .zip(table.cell_marginal())
            .zip(&masses)
            .map(|((label, observed), &expected)| CellStat {
                label,
                observed,
                expected,
            })
            .collect();
        let k = table.classes;
        let class_marginal = table.class_marginal();
        let classes: Vec<CellStat> = class_marginal
            .iter()
            .enumerate()
            .map(|(r, &observed)| CellStat {
                label: format!("r{r}"),
                observed,
                expected: 1.0 / k as f64,
            })
            .collect();
        let (tv, chi, residuals) = if p.is_some() {
            let tv = total_variation(&class_marginal, &vec![1.0 / k as f64; k]);
            match joint_independence(table, partition) {
                Ok((chi, res)) => (tv, Some(chi), res),
                Err(Error::InvalidInput(_)) => (tv, None, Vec::new()),
                Err(e) => return Err(e),
            }
        } else {
            (
                total_variation(&table.cell_marginal(), &masses),
                None,
                Vec::new(),
            )
        };
        Ok(StatsReport {
            schema_version: SCHEMA_VERSION,
            label,
            disc_min: range.0,
            disc_max: range.1,
            p,
            step,
            orders: counts.0,
            cycles: counts.1,
            samples: table.samples,
            boxes,
            classes,
            tv,
            chi_square: chi,
            residuals,
        })
    }

    /// `|observed − expected|` for the box with this label.
    pub fn box_deviation(&self, label: &str) -> Option<f64> {
        self.boxes
            .iter()
            .find(|b| b.label == label)
            .map(|b| b.deviation().abs())
    }
}

fn samples_per_cycle(period: f64, step: f64) -> usize {
    (period / step).ceil().max(1.0) as usize
}

fn check_range(lo: i128, hi: i128, step: f64) -> Result<()> {
    if lo > hi || hi < 5 {
        return Err(Error::InvalidInput(format!(
            "empty discriminant range [{lo}, {hi}]"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("step {step} must be positive")));
    }
    Ok(())
}

/// Length-weighted geodesic statistic over fundamental discriminants in
/// `[lo, hi]`: every narrow class contributes `⌈L/Δs⌉` equally spaced points.
pub fn duke_geodesic_report(
    lo: i128,
    hi: i128,
    partition: &BoxPartition,
    step: f64,
) -> Result<StatsReport> {
    check_range(lo, hi, step)?;
    let discs: Vec<i128> = (lo.max(5)..=hi)
        .filter(|&d| is_fundamental_discriminant(d) && d > 1)
        .collect();
    if discs.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no fundamental discriminants in [{lo}, {hi}]"
        )));
    }
    let sieve = SpfSieve::new((hi / 4 + 1) as usize);
    let per_disc = discs
        .par_iter()
        .map(|&d| -> Result<(Tally, usize)> {
            let field = QuadField::from_discriminant(d as i64)?;
            let order = Order::new(field, 1)?;
            let period = period_length(&order)?;
            let group = narrow_class_group_sieved(d, &sieve)?;
            let m = samples_per_cycle(period, step);
            let mut tally = Tally::new(partition.cell_count(), 1);
            for q in group.classes() {
                let walk = GeodesicWalk::new(q, period)?;
                let h = period / m as f64;
                for k in 0..m {
                    let (_, z, _) = walk.reduce(k as f64 * h)?;
                    tally.add(partition.cell_of(&z), 0);
                }
            }
            Ok((tally, group.order()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Tally::new(partition.cell_count(), 1);
    let mut cycles = 0;
    for (t, h) in &per_disc {
        total.merge(t);
        cycles += h;
    }
    let table = Table::from_tally(&total)?;
    StatsReport::from_table(
        format!("duke [{lo}, {hi}]"),
        (lo, hi),
        None,
        step,
        (discs.len(), cycles),
        &table,
        partition,
    )
}

/// Orders `O_f ⊂ Q(√d_K)` with `f²d_K = Δ ∈ [lo, hi]`, `p` inert in `K`, `p ∤ f`.
pub fn inert_orders(lo: i128, hi: i128, p: u64) -> Vec<(i128, i64, i64)> {
    (lo.max(5)..=hi)
        .filter(|&d| is_real_quadratic_discriminant(d))
        .filter_map(|d| {
            let (dk, f) = split_discriminant(d)?;
            (kronecker_prime(dk, p) == -1 && f % p as i128 != 0).then_some((d, dk as i64, f as i64))
        })
        .collect()
}

/// Per-order tables for the cycle statistic: canonical points of all
/// `h⁺(O_f[1/p])` cycles, `⌈L/Δs⌉` per cycle.
pub fn cycle_tables(
    lo: i128,
    hi: i128,
    p: u64,
    partition: &BoxPartition,
    step: f64,
) -> Result<Vec<(i128, usize, Table)>> {
    check_range(lo, hi, step)?;
    let orders = inert_orders(lo, hi, p);
    if orders.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no orders with {p} inert in [{lo}, {hi}]"
        )));
    }
    let classes = (p * p - p) as usize;
    let sieve = SpfSieve::new((hi / 4 + 1) as usize);
    orders
        .par_iter()
        .map(|&(d, dk, f)| {
            let field = QuadField::from_discriminant(dk)?;
            let order = Order::new(field, f)?;
            let period = period_length(&order)?;
            let group = narrow_class_group_sieved(d, &sieve)?;
            let sqrt_residue = embed_sqrt_dk(&field, p, 2)?.y().residue()?;
            let m = samples_per_cycle(period, step);
            let h = period / m as f64;
            let mut tally = Tally::new(partition.cell_count(), classes);
            for q in group.classes() {
                let sampler =
                    CycleSampler::from_parts(q, period, p, tau_residue(q, f, sqrt_residue, p)?)?;
                for k in 0..m {
                    let (z, r) = sampler.sample(k as f64 * h)?;
                    tally.add(partition.cell_of(&z), r);
                }
            }
            Ok((d, group.order(), Table::from_tally(&tally)?))
        })
        .collect()
}

/// Per-order reports and the equal-weight pooled report.
pub fn cycle_report(
    lo: i128,
    hi: i128,
    p: u64,
    partition: &BoxPartition,
    step: f64,
) -> Result<(Vec<StatsReport>, StatsReport)> {
    let tables = cycle_tables(lo, hi, p, partition, step)?;
    let mut per_order = Vec::with_capacity(tables.len());
    let mut cycles = 0;
    for (d, h, t) in &tables {
        cycles += h;
        per_order.push(StatsReport::from_table(
            format!("order {d}"),
            (*d, *d),
            Some(p),
            step,
            (1, *h),
            t,
            partition,
        )?);
    }
    let only: Vec<Table> = tables.into_iter().map(|(_, _, t)| t).collect();
    let pooled = Table::pool(&only)?;
    let report = StatsReport::from_table(
        format!("pooled [{lo}, {hi}] (equal weight per order)"),
        (lo, hi),
        Some(p),
        step,
        (only.len(), cycles),
        &pooled,
        partition,
    )?;
    Ok((per_order, report))
}
