//! Recorded probe results shipped with the crate.
//!
//! The rest dataset comes as two orthogonal views (top X–Y, side Y–Z) of
//! the same 29 points; rows correspond one-to-one and the shared Y values
//! must agree. The deformed dataset has the top view only.

use super::{error_stats, BenchError, EvalReport};
use crate::Point3;

const REST_TOP_XY: &str = include_str!("../../fixtures/rest_top_xy.csv");
const REST_SIDE_YZ: &str = include_str!("../../fixtures/rest_side_yz.csv");
const DEFORMED_TOP_XY: &str = include_str!("../../fixtures/deformed_top_xy.csv");

pub const FIXTURE_NAMES: [&str; 2] = ["rest_small", "deformed_small"];

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FixtureDataset {
    pub name: String,
    /// 3 for joined views, 2 for a single projection (z = 0).
    pub dims: usize,
    pub truth: Vec<Point3>,
    pub measured: Vec<Point3>,
}

impl FixtureDataset {
    pub fn pairs(&self) -> Vec<(Point3, Point3)> {
        self.truth.iter().copied().zip(self.measured.iter().copied()).collect()
    }
}

/// `(truth_a, truth_b, measured_a, measured_b)` per row.
fn read_view(text: &str) -> Result<Vec<[f64; 4]>, BenchError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(|e| BenchError::Fixture(e.to_string())))
        .collect()
}

pub fn load_fixture(name: &str) -> Result<FixtureDataset, BenchError> {
    match name {
        "rest_small" => {
            let top = read_view(REST_TOP_XY)?;
            let side = read_view(REST_SIDE_YZ)?;
            if top.len() != side.len() {
                return Err(BenchError::Fixture(format!(
                    "views disagree in length: {} vs {}",
                    top.len(),
                    side.len()
                )));
            }
            let mut truth = Vec::with_capacity(top.len());
            let mut measured = Vec::with_capacity(top.len());
            for (k, (t, s)) in top.iter().zip(&side).enumerate() {
                if (t[1] - s[0]).abs() > 1e-9 || (t[3] - s[2]).abs() > 1e-9 {
                    return Err(BenchError::Fixture(format!("row {k}: Y differs between views")));
                }
                truth.push(Point3::new(t[0], t[1], s[1]));
                measured.push(Point3::new(t[2], t[3], s[3]));
            }
            Ok(FixtureDataset {
                name: name.into(),
                dims: 3,
                truth,
                measured,
            })
        }
        "deformed_small" => {
            let top = read_view(DEFORMED_TOP_XY)?;
            Ok(FixtureDataset {
                name: name.into(),
                dims: 2,
                truth: top.iter().map(|r| Point3::new(r[0], r[1], 0.0)).collect(),
                measured: top.iter().map(|r| Point3::new(r[2], r[3], 0.0)).collect(),
            })
        }
        other => Err(BenchError::UnknownFixture(other.into())),
    }
}

/// Fixture statistics checked against the reference table.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FixtureEval {
    pub name: String,
    pub dims: usize,
    pub report: EvalReport,
    /// Human-readable acceptance band.
    pub target: String,
    pub pass: bool,
}

pub fn fixture_eval(name: &str) -> Result<FixtureEval, BenchError> {
    let data = load_fixture(name)?;
    let report = error_stats(&data.pairs())?;
    let (target, pass) = match name {
        "rest_small" => (
            "mean in [2.3, 2.9] mm, std in [1.0, 1.6] mm (reference 2.6 / 1.3 mm)".to_owned(),
            (2.3..=2.9).contains(&report.avg_error_mm) && (1.0..=1.6).contains(&report.std_mm),
        ),
        _ => (
            "top-view mean <= 4.7 mm (3D reference 4.4 mm; a projection cannot exceed it)".to_owned(),
            report.avg_error_mm <= 4.7,
        ),
    };
    Ok(FixtureEval {
        name: name.into(),
        dims: data.dims,
        report,
        target,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn datasets_have_29_pairs() {
        for name in FIXTURE_NAMES {
            let d = load_fixture(name).unwrap();
            assert_eq!(d.truth.len(), 29);
            assert_eq!(d.measured.len(), 29);
        }
        assert!(matches!(load_fixture("bogus"), Err(BenchError::UnknownFixture(_))));
    }

    #[test]
    fn statistics_match_plain_arithmetic() {
        // Recompute from the raw CSV text with nothing but string splits.
        let rows = |text: &str| -> Vec<Vec<f64>> {
            text.lines()
                .skip(1)
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.split(',').map(|x| x.trim().parse().unwrap()).collect())
                .collect()
        };
        let xy = rows(REST_TOP_XY);
        let yz = rows(REST_SIDE_YZ);
        let errs: Vec<f64> = xy
            .iter()
            .zip(&yz)
            .map(|(a, b)| ((a[0] - a[2]).powi(2) + (a[1] - a[3]).powi(2) + (b[1] - b[3]).powi(2)).sqrt())
            .collect();
        let mean = errs.iter().sum::<f64>() / 29.0;
        let var = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / 29.0;
        let eval = fixture_eval("rest_small").unwrap();
        assert!((eval.report.avg_error_mm - mean).abs() < 1e-9);
        assert!((eval.report.std_mm - var.sqrt()).abs() < 1e-9);
        assert!(eval.pass);
        assert!(fixture_eval("deformed_small").unwrap().pass);
    }
}
