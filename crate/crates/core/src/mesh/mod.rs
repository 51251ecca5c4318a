//! Tetrahedral meshes, their boundary surfaces and geometric queries.

mod cut;
mod io;
mod locate;
mod surface;

pub use cut::{place_grid, plane_surface_cut, GridLayout, GridPoints, HalfSpace, Polyline};
pub use io::{load_mesh, parse_gmsh_v2, parse_softmesh, write_softmesh, MeshFile};
pub use locate::{barycentric_coords, locate_element, Location};
pub use surface::{extract_surface, SurfaceMesh};

use crate::{Point3, Vec3};

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("tetrahedron {tet} has zero volume")]
    DegenerateElement { tet: usize },
    #[error("plane does not intersect the surface")]
    EmptyIntersection,
    #[error("row plane {row} and column plane {col} are parallel")]
    ParallelPlanes { row: usize, col: usize },
    #[error("invalid grid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid plane normal")]
    InvalidPlane,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

/// Signed volume of the tetrahedron `(a, b, c, d)`; positive when
/// `(b - a, c - a, d - a)` is right-handed.
pub fn signed_volume(a: &Point3, b: &Point3, c: &Point3, d: &Point3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
}

/// Volumetric mesh with rest positions `q0` and current positions `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct TetMesh {
    rest: Vec<Point3>,
    positions: Vec<Point3>,
    tets: Vec<[usize; 4]>,
}

impl TetMesh {
    /// Builds a mesh, swapping two vertices of every negatively oriented
    /// tetrahedron. Current positions start at rest.
    pub fn new(vertices: Vec<Point3>, mut tets: Vec<[usize; 4]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        let scale = bbox_diagonal(&vertices).max(f64::MIN_POSITIVE);
        let min_volume = 1e-12 * scale.powi(3);
        for (t, tet) in tets.iter_mut().enumerate() {
            if let Some(&bad) = tet.iter().find(|&&v| v >= n) {
                return Err(parse_err(
                    0,
                    format!("tet {t} references vertex {bad} but the mesh has {n} vertices"),
                ));
            }
            let [a, b, c, d] = tet.map(|v| vertices[v]);
            let vol = signed_volume(&a, &b, &c, &d);
            if vol.abs() <= min_volume {
                return Err(MeshError::DegenerateElement { tet: t });
            }
            if vol < 0.0 {
                tet.swap(2, 3);
            }
        }
        Ok(Self {
            positions: vertices.clone(),
            rest: vertices,
            tets,
        })
    }

    pub fn rest_positions(&self) -> &[Point3] {
        &self.rest
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn positions_mut(&mut self) -> &mut [Point3] {
        &mut self.positions
    }

    /// Replaces the current positions. Panics if the count differs.
    pub fn set_positions(&mut self, q: &[Point3]) {
        assert_eq!(q.len(), self.rest.len(), "position count mismatch");
        self.positions.copy_from_slice(q);
    }

    pub fn reset(&mut self) {
        self.positions.copy_from_slice(&self.rest);
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn num_vertices(&self) -> usize {
        self.rest.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_points(&self, t: usize, q: &[Point3]) -> [Point3; 4] {
        self.tets[t].map(|v| q[v])
    }

    pub fn tet_volume(&self, t: usize, q: &[Point3]) -> f64 {
        let [a, b, c, d] = self.tet_points(t, q);
        signed_volume(&a, &b, &c, &d)
    }

    pub fn total_volume(&self, q: &[Point3]) -> f64 {
        (0..self.tets.len()).map(|t| self.tet_volume(t, q)).sum()
    }

    pub fn bbox(&self, q: &[Point3]) -> (Point3, Point3) {
        bbox(q)
    }
}

pub fn bbox(points: &[Point3]) -> (Point3, Point3) {
    let mut lo = Point3::repeat(f64::INFINITY);
    let mut hi = Point3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

pub fn bbox_diagonal(points: &[Point3]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let (lo, hi) = bbox(points);
    (hi - lo).norm()
}

/// Plane `{ p : normal · p = offset }` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Plane {
    normal: Vec3,
    offset: f64,
}

impl Plane {
    /// Normalizes `normal`, scaling `offset` by the same factor.
    pub fn new(normal: Vec3, offset: f64) -> Result<Self, MeshError> {
        let len = normal.norm();
        if !len.is_finite() || len < 1e-300 || !offset.is_finite() {
            return Err(MeshError::InvalidPlane);
        }
        Ok(Self {
            normal: normal / len,
            offset: offset / len,
        })
    }

    pub fn through(point: &Point3, normal: Vec3) -> Result<Self, MeshError> {
        let n = Plane::new(normal, 0.0)?.normal;
        Ok(Self {
            normal: n,
            offset: n.dot(point),
        })
    }

    pub fn normal(&self) -> Vec3 {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}
