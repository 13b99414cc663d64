//! CSV and JSON writers.

use std::path::Path;

use serde::Serialize;

use radpair::{RecordRow, SimulationRecord};

use crate::CliError;

pub const RECORD_HEADER: [&str; 7] = ["t", "trace", "tr_QS", "tr_QT", "p_coh", "dnS_cum", "dnT_cum"];

/// Fixed text form for every number written to a CSV.
pub fn num(x: f64) -> String {
    // Avoid "-0.000000000000000e0" in golden files.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.15e}")
}

fn row_values(r: &RecordRow) -> [f64; 7] {
    [r.t, r.trace, r.tr_qs, r.tr_qt, r.p_coh, r.dns_cum, r.dnt_cum]
}

/// Rows kept at `stride`; the last row is always included.
pub fn strided(rows: &[RecordRow], stride: usize) -> Vec<&RecordRow> {
    let last = rows.len().saturating_sub(1);
    rows.iter().enumerate().filter(|(i, _)| i % stride == 0 || *i == last).map(|(_, r)| r).collect()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn record_csv(record: &SimulationRecord, stride: usize) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_HEADER).map_err(|e| CliError::Io(e.to_string()))?;
    for r in strided(&record.rows, stride) {
        w.write_record(row_values(r).map(num)).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}

/// Side-by-side table of two records with absolute-difference columns.
pub fn compare_csv(a: &SimulationRecord, b: &SimulationRecord, stride: usize) -> Result<String, CliError> {
    let (na, nb) = (a.theory.as_str(), b.theory.as_str());
    let mut header = vec!["t".to_string()];
    for col in &RECORD_HEADER[1..] {
        header.push(format!("{col}_{na}"));
        header.push(format!("{col}_{nb}"));
        header.push(format!("{col}_absdiff"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(|e| CliError::Io(e.to_string()))?;
    let n = a.rows.len().max(b.rows.len());
    let last = n.saturating_sub(1);
    for i in (0..n).filter(|i| i % stride == 0 || *i == last) {
        let ra = a.rows.get(i).unwrap_or_else(|| a.last());
        let rb = b.rows.get(i).unwrap_or_else(|| b.last());
        let (va, vb) = (row_values(ra), row_values(rb));
        let mut fields = vec![num(va[0].max(vb[0]))];
        for k in 1..7 {
            fields.push(num(va[k]));
            fields.push(num(vb[k]));
            fields.push(num((va[k] - vb[k]).abs()));
        }
        w.write_record(&fields).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}

/// Largest absolute difference per record column.
pub fn max_discrepancy(a: &SimulationRecord, b: &SimulationRecord) -> [f64; 6] {
    let mut out = [0.0_f64; 6];
    let n = a.rows.len().max(b.rows.len());
    for i in 0..n {
        let va = row_values(a.rows.get(i).unwrap_or_else(|| a.last()));
        let vb = row_values(b.rows.get(i).unwrap_or_else(|| b.last()));
        for k in 0..6 {
            out[k] = out[k].max((va[k + 1] - vb[k + 1]).abs());
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

/// Scalar outcome of one integration.
#[derive(Debug, Clone, Serialize)]
pub struct RecordSummary {
    pub theory: String,
    pub yield_singlet: f64,
    pub yield_triplet: f64,
    pub survival: f64,
    pub terminated: bool,
    pub steps: usize,
    #[serde(rename = "final")]
    pub final_row: RecordRow,
}

impl From<&SimulationRecord> for RecordSummary {
    fn from(r: &SimulationRecord) -> Self {
        Self {
            theory: r.theory.as_str().into(),
            yield_singlet: r.yield_singlet,
            yield_triplet: r.yield_triplet,
            survival: r.survival(),
            terminated: r.terminated,
            steps: r.rows.len() - 1,
            final_row: *r.last(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(-0.0), "0.000000000000000e0");
        assert_eq!(num(0.25), "2.500000000000000e-1");
        assert_eq!(num(1.0), "1.000000000000000e0");
    }

    #[test]
    fn stride_keeps_last_row() {
        let row = RecordRow { t: 0.0, trace: 1.0, tr_qs: 0.5, tr_qt: 0.5, p_coh: 0.0, dns_cum: 0.0, dnt_cum: 0.0 };
        let rows: Vec<_> = (0..10).map(|i| RecordRow { t: i as f64, ..row }).collect();
        let kept: Vec<f64> = strided(&rows, 4).iter().map(|r| r.t).collect();
        assert_eq!(kept, vec![0.0, 4.0, 8.0, 9.0]);
        assert_eq!(strided(&rows[..1], 4).len(), 1);
    }
}
