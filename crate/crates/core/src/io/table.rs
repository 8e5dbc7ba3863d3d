//! CSV error tables. Floats are written in shortest round-trip form, so a
//! write followed by a read returns identical numbers.

use std::io::Write;
use std::path::Path;

use crate::analysis::{ErrorReport, LayerErrors};
use crate::error::{Error, Result};

pub const TABLE_HEADER: &str = "offline,online,period,dof_c,e_l2_t,e_h1_t,e_l2_p,e_h1_p";
pub const SERIES_HEADER: &str = "offline,online,layer,stage,e_l2_t,e_h1_t,e_l2_p,e_h1_p";

/// One row of the final-layer table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub offline: usize,
    pub online: usize,
    pub period: usize,
    pub dof_c: usize,
    pub errors: LayerErrors,
}

impl From<&ErrorReport> for TableRow {
    fn from(r: &ErrorReport) -> Self {
        TableRow {
            offline: r.offline,
            online: r.online,
            period: r.period,
            dof_c: r.dof_c,
            errors: r.final_errors,
        }
    }
}

/// One row of the per-layer series; `stage` is `post` for the accepted
/// solution of a layer and `pre` for the solution before enrichment.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRow {
    pub offline: usize,
    pub online: usize,
    pub layer: usize,
    pub stage: String,
    pub errors: LayerErrors,
}

fn errors_csv(e: &LayerErrors) -> String {
    format!("{},{},{},{}", e.l2_t, e.h1_t, e.l2_p, e.h1_p)
}

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut w = super::create(path)?;
    let go = || -> std::io::Result<()> {
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{r}")?;
        }
        w.flush()
    };
    go().map_err(|e| Error::io(path, e))
}

pub fn write_error_csv(path: &Path, reports: &[ErrorReport]) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no error reports to write".into()));
    }
    write_lines(
        path,
        TABLE_HEADER,
        reports.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                r.offline,
                r.online,
                r.period,
                r.dof_c,
                errors_csv(&r.final_errors)
            )
        }),
    )
}

pub fn write_series_csv(path: &Path, reports: &[ErrorReport]) -> Result<()> {
    let mut rows = Vec::new();
    for r in reports {
        for (i, e) in r.series.iter().enumerate() {
            rows.push(format!("{},{},{},post,{}", r.offline, r.online, i + 1, errors_csv(e)));
        }
        for (layer, e) in &r.pre_enrichment {
            rows.push(format!("{},{},{layer},pre,{}", r.offline, r.online, errors_csv(e)));
        }
    }
    write_lines(path, SERIES_HEADER, rows.into_iter())
}

fn read_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(Error::Corrupt(format!("{}: expected header `{header}`", path.display()))),
    }
    let width = header.split(',').count();
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let cells: Vec<String> = l.split(',').map(|c| c.trim().to_string()).collect();
            if cells.len() != width {
                return Err(Error::Corrupt(format!(
                    "{} line {}: {} fields, expected {width}",
                    path.display(),
                    i + 1,
                    cells.len()
                )));
            }
            Ok((i + 1, cells))
        })
        .collect()
}

fn cell<T: std::str::FromStr>(path: &Path, line: usize, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Corrupt(format!("{} line {line}: cannot parse `{v}`", path.display())))
}

fn errors_from(path: &Path, line: usize, c: &[String]) -> Result<LayerErrors> {
    Ok(LayerErrors {
        l2_t: cell(path, line, &c[0])?,
        h1_t: cell(path, line, &c[1])?,
        l2_p: cell(path, line, &c[2])?,
        h1_p: cell(path, line, &c[3])?,
    })
}

pub fn read_error_csv(path: &Path) -> Result<Vec<TableRow>> {
    read_rows(path, TABLE_HEADER)?
        .into_iter()
        .map(|(line, c)| {
            Ok(TableRow {
                offline: cell(path, line, &c[0])?,
                online: cell(path, line, &c[1])?,
                period: cell(path, line, &c[2])?,
                dof_c: cell(path, line, &c[3])?,
                errors: errors_from(path, line, &c[4..])?,
            })
        })
        .collect()
}

pub fn read_series_csv(path: &Path) -> Result<Vec<SeriesRow>> {
    read_rows(path, SERIES_HEADER)?
        .into_iter()
        .map(|(line, c)| {
            Ok(SeriesRow {
                offline: cell(path, line, &c[0])?,
                online: cell(path, line, &c[1])?,
                layer: cell(path, line, &c[2])?,
                stage: c[3].clone(),
                errors: errors_from(path, line, &c[4..])?,
            })
        })
        .collect()
}
