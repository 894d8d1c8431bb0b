use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::{EvalReport, EvalRow, NetworkKind, SweepMode};
use crate::data::write_atomic;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "network,mode,theta1,theta2,noise_blobs,auc,savings_pct";

#[derive(Serialize, Deserialize)]
struct CsvRow {
    network: NetworkKind,
    mode: SweepMode,
    theta1: Option<f64>,
    theta2: Option<f64>,
    noise_blobs: usize,
    auc: f64,
    savings_pct: f64,
}

impl From<&EvalRow> for CsvRow {
    fn from(r: &EvalRow) -> Self {
        Self {
            network: r.network,
            mode: r.mode,
            theta1: r.theta1,
            theta2: r.theta2,
            noise_blobs: r.noise_blobs,
            auc: r.auc,
            savings_pct: r.savings_pct,
        }
    }
}

impl From<CsvRow> for EvalRow {
    fn from(r: CsvRow) -> Self {
        Self {
            network: r.network,
            mode: r.mode,
            theta1: r.theta1,
            theta2: r.theta2,
            noise_blobs: r.noise_blobs,
            auc: r.auc,
            savings_pct: r.savings_pct,
        }
    }
}

/// Serialize rows as CSV. Missing thresholds are empty fields; an empty
/// report still yields the header line.
pub fn emit_csv(rows: &[EvalRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        w.serialize(CsvRow::from(r))?;
    }
    let body = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
    let mut out = String::with_capacity(CSV_HEADER.len() + 1 + body.len());
    out.push_str(CSV_HEADER);
    out.push('\n');
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn read_csv(text: &str) -> Result<Vec<EvalRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Malformed(format!("unexpected CSV header {:?}", header.join(","))));
    }
    r.deserialize::<CsvRow>().map(|row| Ok(row?.into())).collect()
}

pub fn roc_file_name(row: &EvalRow) -> String {
    let p = |t: Option<f64>| t.map_or_else(|| "none".to_owned(), |t| format!("{t}"));
    format!("roc_{}_{}_{}_{}_n{}.csv", row.network, row.mode, p(row.theta1), p(row.theta2), row.noise_blobs)
}

/// Write one `fpr,tpr` file per row into `dir`; returns the paths written.
pub fn emit_roc_points(report: &EvalReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    report
        .rows
        .iter()
        .zip(&report.roc)
        .map(|(row, points)| {
            let mut text = String::from("fpr,tpr\n");
            for (fpr, tpr) in points {
                text.push_str(&format!("{fpr},{tpr}\n"));
            }
            let path = dir.join(roc_file_name(row));
            write_atomic(&path, text.as_bytes())?;
            Ok(path)
        })
        .collect()
}
