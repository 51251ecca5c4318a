use std::io::Write;

use super::BenchError;
use crate::Point3;

/// Length of the probed object used for the percentage columns (mm).
pub const REFERENCE_SPAN_MM: f64 = 152.0;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PointError {
    pub label: Option<(usize, usize)>,
    pub truth: [f64; 3],
    /// `None` when the probe produced no detection.
    pub estimate: Option<[f64; 3]>,
    pub error_mm: Option<f64>,
}

/// Position error summary. Statistics are population mean and standard
/// deviation over the detected points only.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub points: Vec<PointError>,
    pub detected: usize,
    pub no_detection: usize,
    pub avg_error_mm: f64,
    pub std_mm: f64,
    pub avg_percent: f64,
    pub std_percent: f64,
}

impl EvalReport {
    pub fn errors(&self) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.error_mm).collect()
    }
}

fn to_array(p: &Point3) -> [f64; 3] {
    [p.x, p.y, p.z]
}

/// Euclidean errors of `(truth, estimate)` pairs.
pub fn error_stats(pairs: &[(Point3, Point3)]) -> Result<EvalReport, BenchError> {
    let points: Vec<PointError> = pairs
        .iter()
        .map(|(t, e)| PointError {
            label: None,
            truth: to_array(t),
            estimate: Some(to_array(e)),
            error_mm: Some((e - t).norm()),
        })
        .collect();
    summarize(points)
}

/// Aggregates per-point results, some of which may lack an estimate.
pub fn summarize(points: Vec<PointError>) -> Result<EvalReport, BenchError> {
    let errors: Vec<f64> = points.iter().filter_map(|p| p.error_mm).collect();
    if errors.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let std = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(EvalReport {
        detected: errors.len(),
        no_detection: points.len() - errors.len(),
        points,
        avg_error_mm: mean,
        std_mm: std,
        avg_percent: mean / REFERENCE_SPAN_MM * 100.0,
        std_percent: std / REFERENCE_SPAN_MM * 100.0,
    })
}

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TableRow {
    pub configuration: String,
    pub indenter: String,
    #[serde(rename = "avg_error_mm")]
    pub avg_error_mm: f64,
    #[serde(rename = "avg_error_pct")]
    pub avg_percent: f64,
    #[serde(rename = "error_std_mm")]
    pub std_mm: f64,
    #[serde(rename = "error_std_pct")]
    pub std_percent: f64,
    pub detected: usize,
    pub no_detection: usize,
}

impl TableRow {
    pub fn new(configuration: &str, indenter: &str, r: &EvalReport) -> Self {
        Self {
            configuration: configuration.into(),
            indenter: indenter.into(),
            avg_error_mm: r.avg_error_mm,
            avg_percent: r.avg_percent,
            std_mm: r.std_mm,
            std_percent: r.std_percent,
            detected: r.detected,
            no_detection: r.no_detection,
        }
    }
}

pub fn write_table_csv<W: Write>(out: W, rows: &[TableRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| BenchError::Output(e.to_string()))?;
    Ok(())
}

/// Per-point CSV: label, truth, estimate and error.
pub fn write_points_csv<W: Write>(out: W, report: &EvalReport) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "row", "col", "truth_x", "truth_y", "truth_z", "est_x", "est_y", "est_z", "error_mm",
    ])
    .map_err(|e| BenchError::Output(e.to_string()))?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for p in &report.points {
        let (r, c) = p
            .label
            .map_or((String::new(), String::new()), |(i, j)| (i.to_string(), j.to_string()));
        let e = p.estimate.map(|e| e.map(Some)).unwrap_or([None; 3]);
        w.write_record([
            r,
            c,
            p.truth[0].to_string(),
            p.truth[1].to_string(),
            p.truth[2].to_string(),
            fmt(e[0]),
            fmt(e[1]),
            fmt(e[2]),
            fmt(p.error_mm),
        ])
        .map_err(|e| BenchError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| BenchError::Output(e.to_string()))?;
    Ok(())
}
