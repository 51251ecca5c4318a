//! Recorded-frame files: a CSV with one row per frame (`frame_id` followed
//! by the valid taxels in row-major order) plus a JSON sidecar naming each
//! column's cell and grid coordinate.

use std::io::{Read, Write};

use super::{ActivationMap, SensorError, TaxelGrid};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TaxelColumn {
    pub row: usize,
    pub col: usize,
    /// Grid-frame coordinate `[x, y]` in mm.
    pub grid_coord: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RecordLayout {
    pub rows: usize,
    pub cols: usize,
    pub taxels: Vec<TaxelColumn>,
}

impl RecordLayout {
    pub fn for_grid(grid: &TaxelGrid) -> Self {
        Self {
            rows: grid.rows,
            cols: grid.cols,
            taxels: grid
                .valid_cells()
                .map(|(i, j)| TaxelColumn {
                    row: i,
                    col: j,
                    grid_coord: grid.grid_coord(i, j),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> Result<Self, SensorError> {
        let layout: Self = serde_json::from_str(text).map_err(|e| SensorError::Format(e.to_string()))?;
        if let Some(t) = layout
            .taxels
            .iter()
            .find(|t| t.row >= layout.rows || t.col >= layout.cols)
        {
            return Err(SensorError::Format(format!(
                "taxel ({}, {}) outside {}×{}",
                t.row, t.col, layout.rows, layout.cols
            )));
        }
        Ok(layout)
    }
}

pub fn write_frames<W: Write>(out: W, layout: &RecordLayout, frames: &[ActivationMap]) -> Result<(), SensorError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["frame_id".to_owned()];
    header.extend(layout.taxels.iter().map(|t| format!("v_{}_{}", t.row, t.col)));
    w.write_record(&header).map_err(csv_err)?;
    for f in frames {
        let mut rec = vec![f.frame_id.to_string()];
        for t in &layout.taxels {
            let v = f.get(t.row, t.col).ok_or_else(|| {
                SensorError::Format(format!("frame {} has no value at ({}, {})", f.frame_id, t.row, t.col))
            })?;
            rec.push(v.to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frames<R: Read>(input: R, layout: &RecordLayout) -> Result<Vec<ActivationMap>, SensorError> {
    let mut r = csv::Reader::from_reader(input);
    let mut frames = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != layout.taxels.len() + 1 {
            return Err(SensorError::DimensionMismatch {
                expected: layout.taxels.len() + 1,
                found: rec.len(),
            });
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| SensorError::Format(format!("`{s}`: {e}")))
        };
        let mut map = ActivationMap {
            rows: layout.rows,
            cols: layout.cols,
            values: vec![None; layout.rows * layout.cols],
            frame_id: parse(&rec[0])?,
        };
        for (t, field) in layout.taxels.iter().zip(rec.iter().skip(1)) {
            let v = u32::try_from(parse(field)?).map_err(|e| SensorError::Format(e.to_string()))?;
            map.values[t.row * layout.cols + t.col] = Some(v);
        }
        frames.push(map);
    }
    Ok(frames)
}

fn csv_err(e: csv::Error) -> SensorError {
    SensorError::Format(e.to_string())
}
