//! CSV serialization of surfaces, exercise boundaries and experiment
//! reports. Floats are written with 17 significant digits so every file
//! parses back to the same bits.

use std::io::{BufRead, Read, Write};

use crate::error::{PricerError, Result};
use crate::experiments::{CheckRow, CheckTable, ConvergenceReport};
use crate::pde::PriceSurface;
use crate::vi::BoundaryPoint;

pub const SURFACE_HEADER: [&str; 5] = ["t", "S", "value", "dP_dS", "pi_star"];
pub const BOUNDARY_HEADER: [&str; 2] = ["t", "S_star"];
pub const TABLE_HEADER: [&str; 5] = ["case", "metric", "value", "threshold", "verdict"];
pub const CONVERGENCE_HEADER: [&str; 3] = ["kappa", "sup_err_bid", "sup_err_ask"];

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(e: impl std::fmt::Display) -> PricerError {
    PricerError::InvalidInput(format!("csv: {e}"))
}

fn parse(field: &str) -> Result<f64> {
    field.trim().parse().map_err(|_| io_err(format!("not a number: {field:?}")))
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(io_err(format!("unexpected header {found:?}, wanted {expected:?}")))
    }
}

/// One row of a surface file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceRecord {
    pub t: f64,
    pub s: f64,
    pub value: f64,
    pub dp_ds: f64,
    pub pi_star: f64,
    pub exercise: Option<bool>,
}

/// Rows ordered by time, then spot; an `exercise` column is added for
/// American surfaces.
pub fn write_surface<W: Write>(out: W, surface: &PriceSurface) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = SURFACE_HEADER.to_vec();
    if surface.exercise.is_some() {
        header.push("exercise");
    }
    w.write_record(&header).map_err(io_err)?;
    for (k, &t) in surface.times.iter().enumerate() {
        for (j, &s) in surface.spots.iter().enumerate() {
            let mut row = vec![
                fmt(t),
                fmt(s),
                fmt(surface.values[k][j]),
                fmt(surface.grad_s[k][j] / s),
                fmt(surface.pi_star[k][j]),
            ];
            if let Some(ex) = &surface.exercise {
                row.push(if ex[k][j] { "1" } else { "0" }.to_string());
            }
            w.write_record(&row).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_surface<R: Read>(input: R) -> Result<Vec<SurfaceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(io_err)?.clone();
    let with_exercise = header.len() == 6;
    let mut expected = SURFACE_HEADER.to_vec();
    if with_exercise {
        expected.push("exercise");
    }
    check_header(&header, &expected)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(io_err)?;
            let exercise = if with_exercise {
                match &rec[5] {
                    "0" => Some(false),
                    "1" => Some(true),
                    other => return Err(io_err(format!("exercise flag {other:?}"))),
                }
            } else {
                None
            };
            Ok(SurfaceRecord {
                t: parse(&rec[0])?,
                s: parse(&rec[1])?,
                value: parse(&rec[2])?,
                dp_ds: parse(&rec[3])?,
                pi_star: parse(&rec[4])?,
                exercise,
            })
        })
        .collect()
}

/// One row per boundary crossing; times with several crossings repeat.
pub fn write_boundary<W: Write>(out: W, boundary: &[BoundaryPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BOUNDARY_HEADER).map_err(io_err)?;
    for b in boundary {
        for &s in &b.s_star {
            w.write_record([fmt(b.t), fmt(s)]).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_boundary<R: Read>(input: R) -> Result<Vec<BoundaryPoint>> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&r.headers().map_err(io_err)?.clone(), &BOUNDARY_HEADER)?;
    let mut out: Vec<BoundaryPoint> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io_err)?;
        let (t, s) = (parse(&rec[0])?, parse(&rec[1])?);
        match out.last_mut() {
            Some(last) if last.t.to_bits() == t.to_bits() => last.s_star.push(s),
            _ => out.push(BoundaryPoint { t, s_star: vec![s] }),
        }
    }
    Ok(out)
}

pub fn write_table<W: Write>(out: W, table: &CheckTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER).map_err(io_err)?;
    for row in &table.rows {
        w.write_record([
            row.case.clone(),
            row.metric.clone(),
            fmt(row.value),
            fmt(row.threshold),
            if row.pass { "pass" } else { "fail" }.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_table<R: Read>(input: R) -> Result<CheckTable> {
    let mut r = csv::Reader::from_reader(input);
    check_header(&r.headers().map_err(io_err)?.clone(), &TABLE_HEADER)?;
    let rows = r
        .records()
        .map(|rec| {
            let rec = rec.map_err(io_err)?;
            let pass = match &rec[4] {
                "pass" => true,
                "fail" => false,
                other => return Err(io_err(format!("verdict {other:?}"))),
            };
            Ok(CheckRow {
                case: rec[0].to_string(),
                metric: rec[1].to_string(),
                value: parse(&rec[2])?,
                threshold: parse(&rec[3])?,
                pass,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CheckTable { rows })
}

/// The error table followed by a `slope=<float>` line.
pub fn write_convergence<W: Write>(mut out: W, report: &ConvergenceReport) -> Result<()> {
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(CONVERGENCE_HEADER).map_err(io_err)?;
        for ((k, b), a) in report.kappa_values.iter().zip(&report.sup_err_bid).zip(&report.sup_err_ask) {
            w.write_record([fmt(*k), fmt(*b), fmt(*a)]).map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
    }
    writeln!(out, "slope={}", fmt(report.fitted_slope)).map_err(io_err)
}

/// Error columns and slope of a convergence file; the window is not stored.
pub fn read_convergence<R: BufRead>(input: R) -> Result<(Vec<[f64; 3]>, f64)> {
    let mut rows = Vec::new();
    let mut slope = None;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if i == 0 {
            if line != CONVERGENCE_HEADER.join(",") {
                return Err(io_err(format!("unexpected header {line:?}")));
            }
        } else if let Some(v) = line.strip_prefix("slope=") {
            slope = Some(parse(v)?);
        } else if !line.is_empty() {
            let f: Vec<f64> = line.split(',').map(parse).collect::<Result<_>>()?;
            if f.len() != 3 {
                return Err(io_err(format!("expected 3 fields in {line:?}")));
            }
            rows.push([f[0], f[1], f[2]]);
        }
    }
    Ok((rows, slope.ok_or_else(|| io_err("missing slope line"))?))
}
