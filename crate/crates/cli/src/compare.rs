//! Side-by-side table of delineation reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use hsa_core::evaluate::DelineationReport;
use hsa_core::Error;

pub const COLUMNS: [&str; 7] = ["type", "year", "algorithm", "n_c", "li", "c", "d"];

pub fn read_report(path: &Path) -> Result<DelineationReport> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::SchemaMismatch(format!("{}: {e}", path.display())))
        .map_err(Into::into)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub discharge_type: String,
    pub year: String,
    pub algorithm: String,
    pub n_c: usize,
    pub li: (Option<f64>, Option<f64>),
    pub c: (Option<f64>, Option<f64>),
    pub d: (f64, f64),
}

impl From<&DelineationReport> for Row {
    fn from(r: &DelineationReport) -> Self {
        Row {
            discharge_type: r.discharge_type.clone().unwrap_or_default(),
            year: r.year.map(|y| y.to_string()).unwrap_or_default(),
            algorithm: r.algorithm.clone().unwrap_or_default(),
            n_c: r.n_communities,
            li: (r.li_mean, r.li_std),
            c: (r.conductance_mean, r.conductance_std),
            d: (r.discharges_mean, r.discharges_std),
        }
    }
}

fn num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_default()
}

fn mean_std(ms: (Option<f64>, Option<f64>)) -> String {
    match ms {
        (Some(m), Some(s)) => format!("{m:.2} ({s:.2})"),
        _ => "n/a".to_string(),
    }
}

/// CSV with separate mean and std columns.
pub fn to_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["type", "year", "algorithm", "n_c", "li_mean", "li_std", "c_mean", "c_std", "d_mean", "d_std"])?;
    for r in rows {
        w.write_record([
            r.discharge_type.clone(),
            r.year.clone(),
            r.algorithm.clone(),
            r.n_c.to_string(),
            num(r.li.0),
            num(r.li.1),
            num(r.c.0),
            num(r.c.1),
            format!("{:.0}", r.d.0),
            format!("{:.0}", r.d.1),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Fixed-width text table, mean (std) per cell.
pub fn to_text(rows: &[Row]) -> String {
    let cells: Vec<[String; 7]> = rows
        .iter()
        .map(|r| {
            [
                r.discharge_type.clone(),
                r.year.clone(),
                r.algorithm.clone(),
                r.n_c.to_string(),
                mean_std(r.li),
                mean_std(r.c),
                format!("{:.0} ({:.0})", r.d.0, r.d.1),
            ]
        })
        .collect();
    let mut width = COLUMNS.map(str::len);
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |fields: &[String]| {
        let padded: Vec<String> = fields.iter().zip(width).map(|(f, w)| format!("{f:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(&COLUMNS.map(String::from));
    for row in &cells {
        line(row);
    }
    out
}
