//! One function per mode. Each writes its artifacts under `out` and
//! returns the lines of the printed report.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde_json::{json, Value};
use shlab::atr::{
    as_int_sqrt, atr_cycle_from_form, atr_discriminant_norm, atr_toral_discriminant,
    check_unit_fixes_cycle, extension_from_strings, unit_stabilizer_search, ATRExtension,
    BaseField, DEFAULT_EXTENSIONS, DEFAULT_UNIT_BOUND,
};
use shlab::cycles::{build_cycles, canonical_points, toral_discriminant};
use shlab::embeddings::{embedding_from_form, star_permutations, Places};
use shlab::error::{Error, Result};
use shlab::forms::narrow_class_group;
use shlab::orders::{QuadElement, QuadField};
use shlab::output::{stats_rows, write_cycle_points, write_stats, CyclePointRow};
use shlab::stats::{cycle_report, duke_geodesic_report, BoxPartition, StatsReport, SCHEMA_VERSION};

use crate::config::{ExperimentConfig, Mode};

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}

fn create(out: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| io_err(&path, e))
}

fn write_json(out: &Path, name: &str, v: &Value) -> Result<()> {
    let path = out.join(name);
    let mut text = serde_json::to_string_pretty(v).map_err(|e| io_err(&path, e))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))
}

fn field_and_disc(c: &ExperimentConfig) -> Result<(QuadField, i128)> {
    let field = QuadField::from_discriminant(c.require_dk()?)?;
    let f = c.f as i128;
    Ok((field, f * f * field.d_k() as i128))
}

fn partition(c: &ExperimentConfig) -> Result<BoxPartition> {
    match &c.boxes {
        Some(s) => s.parse(),
        None => Ok(BoxPartition::default_grid()),
    }
}

pub fn run(c: &ExperimentConfig) -> Result<Vec<String>> {
    std::fs::create_dir_all(&c.out).map_err(|e| io_err(&c.out, e))?;
    match c.mode() {
        Mode::Classgroup => classgroup(c),
        Mode::Embeddings => embeddings(c),
        Mode::ShCycles => sh_cycles(c),
        Mode::Duke => duke(c),
        Mode::Stats => stats(c),
        Mode::Atr => atr(c),
    }
}

fn classgroup(c: &ExperimentConfig) -> Result<Vec<String>> {
    let (_, disc) = field_and_disc(c)?;
    let g = narrow_class_group(disc)?;
    let classes: Vec<String> = g.classes().iter().map(|q| q.to_string()).collect();
    write_json(
        &c.out,
        "classgroup.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "disc": disc,
            "order": g.order(),
            "principal": g.principal(),
            "classes": classes,
            "table": g.table(),
        }),
    )?;
    Ok(vec![
        format!(
            "narrow class group of discriminant {disc}: order {}",
            g.order()
        ),
        format!("classes: {}", classes.join(" ")),
    ])
}

fn embeddings(c: &ExperimentConfig) -> Result<Vec<String>> {
    let (field, disc) = field_and_disc(c)?;
    let g = narrow_class_group(disc)?;
    let perms = star_permutations(&g, field, c.f)?;
    let mut rows = Vec::new();
    for q in g.classes() {
        let e = embedding_from_form(q, field, c.f)?;
        let w = e.w();
        let places = c.p.map_or(Places::Infinite, Places::WithPrime);
        let opt = e.is_optimal(c.f, places)?;
        rows.push(json!({
            "form": q.to_string(),
            "w": [[w.a, w.b], [w.c, w.d]],
            "tau": format!("{:.12}", e.tau()),
            "tau_conj": format!("{:.12}", e.tau_conj()),
            "optimal": opt,
        }));
    }
    write_json(
        &c.out,
        "embeddings.json",
        &json!({ "schema_version": SCHEMA_VERSION, "disc": disc, "classes": rows, "star_permutations": perms }),
    )?;
    Ok(vec![format!(
        "{} optimal embedding classes of discriminant {disc}; ⋆-action written",
        rows.len()
    )])
}

fn sh_cycles(c: &ExperimentConfig) -> Result<Vec<String>> {
    let (field, disc) = field_and_disc(c)?;
    let p = c.require_p()?;
    let cycles = build_cycles(field, c.f, p, c.precision)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (i, cy) in cycles.iter().enumerate() {
        let m = c
            .samples
            .unwrap_or_else(|| (cy.period() / c.step).ceil().max(1.0) as usize);
        let pts = canonical_points(cy, m)?;
        let boundary = pts.iter().filter(|pt| pt.boundary).count();
        rows.extend(pts.iter().map(|pt| CyclePointRow::new(disc, c.f, p, i, pt)));
        summary.push(json!({
            "class_id": i,
            "form": cy.form().to_string(),
            "period": format!("{:.12}", cy.period()),
            "samples": m,
            "boundary_points": boundary,
        }));
    }
    write_cycle_points(create(&c.out, "cycle_points.csv")?, &rows)?;
    write_json(
        &c.out,
        "sh_cycles.json",
        &json!({
            "schema_version": SCHEMA_VERSION,
            "disc": disc,
            "p": p,
            "precision": c.precision,
            "toral_discriminant": toral_discriminant(&field, c.f),
            "cycles": summary,
        }),
    )?;
    Ok(vec![format!(
        "{} cycles of discriminant {disc} at p = {p}, {} canonical points",
        cycles.len(),
        rows.len()
    )])
}

fn write_report(
    c: &ExperimentConfig,
    name: &str,
    reports: &[&StatsReport],
    summary: Value,
) -> Result<()> {
    let rows: Vec<_> = reports.iter().flat_map(|r| stats_rows(r)).collect();
    write_stats(create(&c.out, "stats.csv")?, &rows)?;
    write_json(&c.out, name, &summary)
}

fn duke(c: &ExperimentConfig) -> Result<Vec<String>> {
    let (lo, hi) = c.require_range()?;
    let part = partition(c)?;
    let r = duke_geodesic_report(lo, hi, &part, c.step)?;
    let tol = c.thresholds.box_tolerance;
    let mut lines = vec![format!(
        "{}: {} discriminants, {} cycles, {} samples, TV {:.6}",
        r.label, r.orders, r.cycles, r.samples, r.tv
    )];
    for b in &r.boxes {
        let verdict = if b.deviation().abs() <= tol {
            "within"
        } else {
            "outside"
        };
        lines.push(format!(
            "  {} observed {:.6} expected {:.6} ({verdict} ±{tol})",
            b.label, b.observed, b.expected
        ));
    }
    write_report(
        c,
        "duke.json",
        &[&r],
        json!({ "report": r, "thresholds": c.thresholds }),
    )?;
    Ok(lines)
}

fn stats(c: &ExperimentConfig) -> Result<Vec<String>> {
    let (lo, hi) = c.require_range()?;
    let p = c.require_p()?;
    let part = partition(c)?;
    let (per_order, pooled) = cycle_report(lo, hi, p, &part, c.step)?;
    let th = &c.thresholds;
    let mut lines = vec![format!(
        "{}: {} orders, {} cycles, {} samples, class TV {:.6} (threshold {})",
        pooled.label, pooled.orders, pooled.cycles, pooled.samples, pooled.tv, th.tv_max
    )];
    if let Some(chi) = &pooled.chi_square {
        let below = chi.below_quantile(th.chi_square_quantile)?;
        lines.push(format!(
            "joint chi-square {:.3} on {} df, p-value {:.4}, below q{}: {below}",
            chi.statistic, chi.df, chi.p_value, th.chi_square_quantile
        ));
    }
    let orders: Vec<Value> = per_order
        .iter()
        .map(
            |r| json!({ "disc": r.disc_min, "cycles": r.cycles, "samples": r.samples, "tv": r.tv }),
        )
        .collect();
    let mut reports = vec![&pooled];
    reports.extend(per_order.iter());
    write_report(
        c,
        "stats.json",
        &reports,
        json!({ "pooled": pooled, "per_order": orders, "thresholds": th }),
    )?;
    Ok(lines)
}

fn fmt_elem(base: &BaseField, e: &QuadElement) -> String {
    let d = base.field().squarefree();
    match as_int_sqrt(base, e) {
        Some((m, 0)) => m.to_string(),
        Some((m, 1)) => format!("{m}+sqrt{d}"),
        Some((m, -1)) => format!("{m}-sqrt{d}"),
        Some((m, n)) => format!("{m}{n:+}*sqrt{d}"),
        None => format!("({}{:+}*sqrt{d})/2", e.x(), e.y()),
    }
}

fn atr_entry(ext: &ATRExtension) -> Result<(Value, String)> {
    let base = ext.base();
    let unit = unit_stabilizer_search(ext, DEFAULT_UNIT_BOUND)?;
    let cycle = atr_cycle_from_form(&ext.principal_form(), ext)?;
    let fixes = check_unit_fixes_cycle(&unit, &cycle, ext)?;
    if !fixes {
        return Err(Error::Inconsistency(format!(
            "unit of {ext:?} does not fix its cycle"
        )));
    }
    let delta = fmt_elem(base, ext.delta());
    let line = format!(
        "F = Q(sqrt{}), delta = {delta}: |N(f^2 d_K)| = {}, lambda = {:.6}",
        base.field().squarefree(),
        atr_discriminant_norm(ext),
        unit.lambda
    );
    let v = json!({
        "base": base.field().squarefree(),
        "delta": delta,
        "conductor": fmt_elem(base, ext.conductor()),
        "d_k": fmt_elem(base, &ext.d_k()),
        "disc_norm": atr_discriminant_norm(ext).to_string(),
        "toral_discriminant": atr_toral_discriminant(ext).to_string(),
        "tau0": [format!("{:.12}", cycle.tau0.re), format!("{:.12}", cycle.tau0.im)],
        "endpoints": [format!("{:.12}", cycle.endpoints.0), format!("{:.12}", cycle.endpoints.1)],
        "unit": unit,
        "unit_fixes_cycle": fixes,
    });
    Ok((v, line))
}

fn atr(c: &ExperimentConfig) -> Result<Vec<String>> {
    let exts: Vec<ATRExtension> = match (&c.base, &c.delta) {
        (Some(d), Some(delta)) => vec![extension_from_strings(*d, delta, "1")?],
        (None, None) => DEFAULT_EXTENSIONS
            .iter()
            .map(|(d, delta, f)| extension_from_strings(*d, delta, f))
            .collect::<Result<_>>()?,
        _ => {
            return Err(Error::InvalidInput(
                "--base and --delta must be given together".into(),
            ))
        }
    };
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    for e in &exts {
        let (v, line) = atr_entry(e)?;
        entries.push(v);
        lines.push(line);
    }
    write_json(
        &c.out,
        "atr.json",
        &json!({ "schema_version": SCHEMA_VERSION, "extensions": entries }),
    )?;
    Ok(lines)
}
