//! Touch detection and localization on activation maps.
//!
//! Peaks are extracted one at a time: the largest value above the threshold
//! is located, its 3×3 neighbourhood (clipped to valid taxels) yields the
//! weights `w_ij = v_ij / Σ v`, the weighted grid coordinate `g_w` and the
//! weighted anchored position `ĝ_w` are reported, and the neighbourhood is
//! zeroed before searching again.

use std::io::Write;

use crate::sensor::{ActivationMap, TaxelGrid};
use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    /// A peak must be strictly greater than this (CDC).
    pub threshold: u32,
    pub max_touches: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            threshold: 20,
            max_touches: 5,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<(), TouchError> {
        if self.threshold == 0 || self.max_touches == 0 {
            return Err(TouchError::InvalidConfig);
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TouchError {
    #[error("map is {map_rows}×{map_cols} but the grid is {grid_rows}×{grid_cols}")]
    DimensionMismatch {
        map_rows: usize,
        map_cols: usize,
        grid_rows: usize,
        grid_cols: usize,
    },
    #[error("neighbourhood of ({0}, {1}) has zero total activation")]
    ZeroActivation(usize, usize),
    #[error("weight on taxel ({0}, {1}) which has no anchor")]
    MissingAnchor(usize, usize),
    #[error("threshold and max_touches must be positive")]
    InvalidConfig,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TouchEstimate {
    pub peak: (usize, usize),
    pub peak_value: u32,
    /// `((i, j), w_ij)` over the clipped neighbourhood, row-major.
    pub weights: Vec<((usize, usize), f64)>,
    /// Weighted grid-frame coordinate `[x, y]` (mm).
    pub g_w: [f64; 2],
    /// Weighted current 3D position (mm).
    pub g_hat_w: Point3,
}

/// Valid cells of the 3×3 block around `(i, j)`, row-major.
pub fn clipped_n9(map: &ActivationMap, i: usize, j: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(9);
    for a in i.saturating_sub(1)..=(i + 1).min(map.rows - 1) {
        for b in j.saturating_sub(1)..=(j + 1).min(map.cols - 1) {
            if map.get(a, b).is_some() {
                out.push((a, b));
            }
        }
    }
    out
}

/// Weights over the clipped neighbourhood of `peak` and the weighted grid
/// coordinate.
pub fn weighted_position_2d(
    map: &ActivationMap,
    peak: (usize, usize),
    grid: &TaxelGrid,
) -> Result<([f64; 2], Vec<((usize, usize), f64)>), TouchError> {
    let cells = clipped_n9(map, peak.0, peak.1);
    let total: f64 = cells.iter().map(|&(a, b)| f64::from(map.get(a, b).unwrap_or(0))).sum();
    if total <= 0.0 {
        return Err(TouchError::ZeroActivation(peak.0, peak.1));
    }
    let mut g = [0.0; 2];
    let weights: Vec<_> = cells
        .into_iter()
        .map(|(a, b)| {
            let w = f64::from(map.get(a, b).unwrap_or(0)) / total;
            let c = grid.grid_coord(a, b);
            g[0] += w * c[0];
            g[1] += w * c[1];
            ((a, b), w)
        })
        .collect();
    Ok((g, weights))
}

/// `ĝ_w = Σ w_ij ĝ_ij` with the taxels' current positions (row-major).
pub fn lift_to_3d(
    weights: &[((usize, usize), f64)],
    grid: &TaxelGrid,
    positions: &[Option<Point3>],
) -> Result<Point3, TouchError> {
    let mut p = Point3::zeros();
    for &((i, j), w) in weights {
        let g = grid
            .is_valid(i, j)
            .then(|| positions.get(grid.index(i, j)).copied().flatten())
            .flatten()
            .ok_or(TouchError::MissingAnchor(i, j))?;
        p += g * w;
    }
    Ok(p)
}

/// Sequential peak extraction; estimates come out in descending peak value.
pub fn detect_touches(
    map: &ActivationMap,
    grid: &TaxelGrid,
    positions: &[Option<Point3>],
    config: &DetectionConfig,
) -> Result<Vec<TouchEstimate>, TouchError> {
    config.validate()?;
    if map.rows != grid.rows || map.cols != grid.cols || map.values.len() != map.rows * map.cols {
        return Err(TouchError::DimensionMismatch {
            map_rows: map.rows,
            map_cols: map.cols,
            grid_rows: grid.rows,
            grid_cols: grid.cols,
        });
    }
    let mut work = map.clone();
    for (k, v) in work.values.iter_mut().enumerate() {
        if !grid.valid_mask[k] {
            *v = None;
        }
    }
    let mut out = Vec::new();
    while out.len() < config.max_touches {
        let mut best: Option<(usize, u32)> = None;
        for (k, v) in work.values.iter().enumerate() {
            if let Some(v) = *v {
                if v > config.threshold && best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
        }
        let Some((k, peak_value)) = best else { break };
        let peak = (k / work.cols, k % work.cols);
        let (g_w, weights) = weighted_position_2d(&work, peak, grid)?;
        let g_hat_w = lift_to_3d(&weights, grid, positions)?;
        for &((a, b), _) in &weights {
            work.set(a, b, 0);
        }
        out.push(TouchEstimate {
            peak,
            peak_value,
            weights,
            g_w,
            g_hat_w,
        });
    }
    Ok(out)
}

/// One line of the detection log.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectionRecord {
    pub frame_id: u64,
    pub touches: Vec<TouchSummary>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TouchSummary {
    pub peak: (usize, usize),
    pub g_w: [f64; 2],
    pub g_hat_w: [f64; 3],
    pub peak_value: u32,
}

impl DetectionRecord {
    pub fn new(frame_id: u64, touches: &[TouchEstimate]) -> Self {
        Self {
            frame_id,
            touches: touches
                .iter()
                .map(|t| TouchSummary {
                    peak: t.peak,
                    g_w: t.g_w,
                    g_hat_w: [t.g_hat_w.x, t.g_hat_w.y, t.g_hat_w.z],
                    peak_value: t.peak_value,
                })
                .collect(),
        }
    }
}

pub fn write_json_lines<W: Write>(mut out: W, records: &[DetectionRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_json_lines(text: &str) -> serde_json::Result<Vec<DetectionRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
