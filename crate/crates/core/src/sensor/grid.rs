use crate::mapping::{create_anchor, AnchorSet};
use crate::mesh::{GridLayout, GridPoints, TetMesh};
use crate::Point3;

/// Largest grid the converter can scan.
pub const MAX_ROWS: usize = 21;
pub const MAX_COLS: usize = 12;

/// Taxel layout: 2D grid-frame coordinates `g_ij` for every cell and a
/// barycentric anchor for every valid taxel.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TaxelGrid {
    pub rows: usize,
    pub cols: usize,
    /// Distance between rows (mm, along the grid-frame y axis).
    pub row_spacing: f64,
    /// Distance between columns (mm, along the grid-frame x axis).
    pub col_spacing: f64,
    pub valid_mask: Vec<bool>,
    pub anchors: AnchorSet,
    anchor_of: Vec<Option<usize>>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("grid {rows}×{cols} exceeds the {MAX_ROWS}×{MAX_COLS} limit")]
    TooLarge { rows: usize, cols: usize },
    #[error("grid has no valid taxels")]
    Empty,
    #[error("spacing must be positive")]
    BadSpacing,
    #[error("{0} points given for a {1}-cell grid")]
    SizeMismatch(usize, usize),
}

impl TaxelGrid {
    /// Anchors each present point (row-major, `None` = no taxel) to the
    /// mesh at rest.
    pub fn new(
        rows: usize,
        cols: usize,
        row_spacing: f64,
        col_spacing: f64,
        points: &[Option<Point3>],
        mesh: &TetMesh,
    ) -> Result<Self, GridError> {
        if rows > MAX_ROWS || cols > MAX_COLS {
            return Err(GridError::TooLarge { rows, cols });
        }
        if !(row_spacing > 0.0 && col_spacing > 0.0) {
            return Err(GridError::BadSpacing);
        }
        if points.len() != rows * cols {
            return Err(GridError::SizeMismatch(points.len(), rows * cols));
        }
        let mut anchors = AnchorSet::new();
        let mut anchor_of = vec![None; rows * cols];
        for (idx, p) in points.iter().enumerate() {
            if let Some(p) = p {
                anchor_of[idx] = Some(anchors.len());
                anchors.push(create_anchor(mesh, p), Some((idx / cols, idx % cols)));
            }
        }
        if anchors.is_empty() {
            return Err(GridError::Empty);
        }
        Ok(Self {
            rows,
            cols,
            row_spacing,
            col_spacing,
            valid_mask: points.iter().map(Option::is_some).collect(),
            anchors,
            anchor_of,
        })
    }

    /// Grid from a plane-cut placement; spacings come from the layout.
    pub fn from_placement(layout: &GridLayout, points: &GridPoints, mesh: &TetMesh) -> Result<Self, GridError> {
        let rs = layout.row_spacing().unwrap_or(1.0);
        let cs = layout.col_spacing().unwrap_or(1.0);
        Self::new(layout.rows, layout.cols, rs, cs, &points.points, mesh)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        i < self.rows && j < self.cols && self.valid_mask[self.index(i, j)]
    }

    pub fn valid_count(&self) -> usize {
        self.anchors.len()
    }

    /// Valid cells in row-major order.
    pub fn valid_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows * self.cols)
            .filter(|&k| self.valid_mask[k])
            .map(|k| (k / self.cols, k % self.cols))
    }

    /// 2D grid-frame coordinate `(x = col, y = row)` in mm.
    pub fn grid_coord(&self, i: usize, j: usize) -> [f64; 2] {
        [j as f64 * self.col_spacing, i as f64 * self.row_spacing]
    }

    pub fn min_spacing(&self) -> f64 {
        self.row_spacing.min(self.col_spacing)
    }

    pub fn anchor_index(&self, i: usize, j: usize) -> Option<usize> {
        if i < self.rows && j < self.cols {
            self.anchor_of[self.index(i, j)]
        } else {
            None
        }
    }

    /// Current 3D taxel positions `ĝ_ij`, row-major, `None` for invalid
    /// cells.
    pub fn positions(&self, mesh: &TetMesh) -> Vec<Option<Point3>> {
        self.positions_in(mesh, mesh.positions())
    }

    pub fn positions_in(&self, mesh: &TetMesh, q: &[Point3]) -> Vec<Option<Point3>> {
        let anchored = self.anchors.positions_in(mesh, q);
        self.anchor_of.iter().map(|a| a.map(|k| anchored[k])).collect()
    }

    pub fn rest_positions(&self, mesh: &TetMesh) -> Vec<Option<Point3>> {
        self.positions_in(mesh, mesh.rest_positions())
    }

    /// Valid 4-neighbours (along the electrode lines).
    pub fn line_neighbors(&self, i: usize, j: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(4);
        let (i, j) = (i as isize, j as isize);
        for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
            let (a, b) = (i + di, j + dj);
            if a >= 0 && b >= 0 && self.is_valid(a as usize, b as usize) {
                out.push((a as usize, b as usize));
            }
        }
        out
    }
}
