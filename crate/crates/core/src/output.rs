//! Versioned CSV schemas for cycle points and statistics cells.
//!
//! Every row starts with the schema version. Floats are written with
//! [`FLOAT_DECIMALS`] fixed decimals so identical runs give identical bytes.
//! Readers reject rows whose version differs from [`SCHEMA_VERSION`].

use std::io::{Read, Write};

use crate::cycles::CyclePoint;
use crate::error::{Error, Result};
use crate::stats::{StatsReport, SCHEMA_VERSION};

pub const FLOAT_DECIMALS: usize = 12;

pub const CYCLE_POINTS_HEADER: [&str; 9] = [
    "schema_version",
    "disc",
    "f",
    "p",
    "class_id",
    "t_index",
    "re_z",
    "im_z",
    "r",
];

pub const STATS_CELLS_HEADER: [&str; 7] = [
    "schema_version",
    "report",
    "kind",
    "label",
    "observed",
    "expected",
    "residual",
];

/// One record of the cycle-points stream.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePointRow {
    pub disc: i128,
    pub f: i64,
    pub p: u64,
    pub class_id: usize,
    pub t_index: usize,
    pub re_z: f64,
    pub im_z: f64,
    pub r: usize,
}

impl CyclePointRow {
    pub fn new(disc: i128, f: i64, p: u64, class_id: usize, pt: &CyclePoint) -> Self {
        CyclePointRow {
            disc,
            f,
            p,
            class_id,
            t_index: pt.t_index,
            re_z: pt.z.re(),
            im_z: pt.z.im(),
            r: pt.r,
        }
    }
}

fn fixed(x: f64) -> String {
    format!("{x:.FLOAT_DECIMALS$}")
}

fn io(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

pub fn write_cycle_points<W: Write>(out: W, rows: &[CyclePointRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CYCLE_POINTS_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.disc.to_string(),
            r.f.to_string(),
            r.p.to_string(),
            r.class_id.to_string(),
            r.t_index.to_string(),
            fixed(r.re_z),
            fixed(r.im_z),
            r.r.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(io)?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::InvalidInput(format!("unexpected header {header:?}")));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidInput(format!("bad field {i} in {rec:?}")))
}

fn check_version(rec: &csv::StringRecord) -> Result<()> {
    let v: u32 = field(rec, 0)?;
    if v != SCHEMA_VERSION {
        return Err(Error::InvalidInput(format!(
            "schema version {v}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

pub fn read_cycle_points<R: Read>(input: R) -> Result<Vec<CyclePointRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &CYCLE_POINTS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(io)?;
        check_version(&rec)?;
        out.push(CyclePointRow {
            disc: field(&rec, 1)?,
            f: field(&rec, 2)?,
            p: field(&rec, 3)?,
            class_id: field(&rec, 4)?,
            t_index: field(&rec, 5)?,
            re_z: field(&rec, 6)?,
            im_z: field(&rec, 7)?,
            r: field(&rec, 8)?,
        });
    }
    Ok(out)
}

/// One record of the statistics stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsCellRow {
    pub report: String,
    /// `box`, `class` or `cell`.
    pub kind: String,
    pub label: String,
    pub observed: f64,
    pub expected: f64,
    pub residual: f64,
}

/// Rows for a report: box and class marginals (residual = observed −
/// expected), then joint cells with standardized residuals when present.
pub fn stats_rows(report: &StatsReport) -> Vec<StatsCellRow> {
    let mut rows = Vec::new();
    for (kind, cells) in [("box", &report.boxes), ("class", &report.classes)] {
        for c in cells {
            rows.push(StatsCellRow {
                report: report.label.clone(),
                kind: kind.into(),
                label: c.label.clone(),
                observed: c.observed,
                expected: c.expected,
                residual: c.deviation(),
            });
        }
    }
    let k = report.classes.len();
    if k > 0 {
        for (i, res) in report.residuals.iter().enumerate() {
            let b = &report.boxes[i / k];
            let c = &report.classes[i % k];
            rows.push(StatsCellRow {
                report: report.label.clone(),
                kind: "cell".into(),
                label: format!("{}|{}", b.label, c.label),
                observed: f64::NAN,
                expected: b.expected * c.expected,
                residual: *res,
            });
        }
    }
    rows
}

pub fn write_stats<W: Write>(out: W, rows: &[StatsCellRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATS_CELLS_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.report.clone(),
            r.kind.clone(),
            r.label.clone(),
            fixed(r.observed),
            fixed(r.expected),
            fixed(r.residual),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_stats<R: Read>(input: R) -> Result<Vec<StatsCellRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &STATS_CELLS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(io)?;
        check_version(&rec)?;
        out.push(StatsCellRow {
            report: field(&rec, 1)?,
            kind: field(&rec, 2)?,
            label: field(&rec, 3)?,
            observed: field(&rec, 4)?,
            expected: field(&rec, 5)?,
            residual: field(&rec, 6)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> CyclePointRow {
        CyclePointRow {
            disc: 5,
            f: 1,
            p: 3,
            class_id: 0,
            t_index: 7,
            re_z: 0.25,
            im_z: 1.5,
            r: 4,
        }
    }

    #[test]
    fn cycle_points_roundtrip() {
        let mut buf = Vec::new();
        write_cycle_points(&mut buf, &[row(), row()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("schema_version,disc,f,p,class_id,t_index,re_z,im_z,r\n1,5,1,3,0,7,0.250000000000,1.500000000000,4\n"));
        assert_eq!(
            read_cycle_points(buf.as_slice()).unwrap(),
            vec![row(), row()]
        );
    }

    #[test]
    fn version_bump_is_rejected() {
        let mut buf = Vec::new();
        write_cycle_points(&mut buf, &[row()]).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\n1,", "\n2,");
        assert!(read_cycle_points(text.as_bytes()).is_err());
        assert!(read_cycle_points("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn stats_roundtrip() {
        let rows = vec![StatsCellRow {
            report: "duke".into(),
            kind: "box".into(),
            label: "[-0.5,0.5]x[1,2]".into(),
            observed: 0.5,
            expected: 0.47,
            residual: 0.03,
        }];
        let mut buf = Vec::new();
        write_stats(&mut buf, &rows).unwrap();
        let back = read_stats(buf.as_slice()).unwrap();
        assert_eq!(back[0].label, rows[0].label);
        assert!((back[0].residual - 0.03).abs() < 1e-12);
    }
}
