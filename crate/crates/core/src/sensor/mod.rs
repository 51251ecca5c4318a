//! Behavioural model of the mutual-capacitance taxel grid.
//!
//! Frames are baseline-subtracted CDC counts: a Gaussian (by default) touch
//! response around each contact point, a capped deformation-driven shift,
//! Gaussian read noise, rounding and clamping at zero.

mod grid;
pub mod kernel;
mod model;
pub mod record;

pub use grid::{GridError, TaxelGrid, MAX_COLS, MAX_ROWS};
pub use kernel::ResponseKernel;
pub use model::{
    calibrate_baseline, calibrate_shift_gain, deformation_metric, expected_values, metric_between, synthesize_frame,
    BaselineReport, FrameStream, SensorModel, TouchStimulus,
};

use crate::registry::UnknownStrategy;

#[derive(Debug, thiserror::Error)]
pub enum SensorError {
    #[error("at least two frames are needed, got {0}")]
    InsufficientFrames(usize),
    #[error("expected {expected} cells, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid sensor model: {0}")]
    InvalidModel(String),
    #[error("invalid stimulus: {0}")]
    InvalidStimulus(String),
    #[error(transparent)]
    UnknownKernel(#[from] UnknownStrategy),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("record format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One frame of CDC counts, row-major; invalid taxels carry `None`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ActivationMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<Option<u32>>,
    pub frame_id: u64,
}

impl ActivationMap {
    /// All-zero map over the grid's valid cells.
    pub fn zeros(grid: &TaxelGrid, frame_id: u64) -> Self {
        Self {
            rows: grid.rows,
            cols: grid.cols,
            values: grid.valid_mask.iter().map(|&v| v.then_some(0)).collect(),
            frame_id,
        }
    }

    /// Dense map with every cell valid.
    pub fn from_dense(rows: usize, cols: usize, values: &[u32], frame_id: u64) -> Self {
        assert_eq!(values.len(), rows * cols, "dense map size");
        Self {
            rows,
            cols,
            values: values.iter().copied().map(Some).collect(),
            frame_id,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<u32> {
        if i < self.rows && j < self.cols {
            self.values[i * self.cols + j]
        } else {
            None
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        let idx = i * self.cols + j;
        if self.values[idx].is_some() {
            self.values[idx] = Some(v);
        }
    }

    pub fn max_value(&self) -> u32 {
        self.values.iter().flatten().copied().max().unwrap_or(0)
    }
}
