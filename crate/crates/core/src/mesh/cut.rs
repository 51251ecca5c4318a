//! Plane cuts of boundary surfaces and taxel-grid placement.
//!
//! A grid on a curved surface is described by two families of parallel
//! planes. Each row plane crossed with each column plane gives a line; the
//! grid point is where that line meets the selected side of the surface.

use std::collections::HashMap;

use super::{MeshError, Plane, SurfaceMesh};
use crate::{Point3, Vec3};

/// Minimum total cut length treated as a real intersection.
const MIN_CUT_LENGTH: f64 = 1e-9;
/// Cross-family planes closer than this to parallel are rejected.
const PARALLEL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<Point3>,
    pub closed: bool,
}

impl Polyline {
    pub fn length(&self) -> f64 {
        let open: f64 = self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        match (self.closed, self.points.first(), self.points.last()) {
            (true, Some(a), Some(b)) => open + (a - b).norm(),
            _ => open,
        }
    }
}

type EdgeKey = (usize, usize);

fn edge_key(a: usize, b: usize) -> EdgeKey {
    (a.min(b), a.max(b))
}

/// Intersects the surface with `plane`, chaining triangle segments into
/// polylines. Vertices exactly on the plane are treated as lying on the
/// positive side, so tangential contact yields no segments.
pub fn plane_surface_cut(surface: &SurfaceMesh, plane: &Plane, q: &[Point3]) -> Result<Vec<Polyline>, MeshError> {
    let mut crossing: HashMap<EdgeKey, Point3> = HashMap::new();
    let mut segments: Vec<[EdgeKey; 2]> = Vec::new();

    for tri in &surface.triangles {
        let d = tri.map(|v| plane.signed_distance(&q[v]));
        let mut keys = Vec::with_capacity(2);
        for k in 0..3 {
            let (i, j) = (k, (k + 1) % 3);
            if (d[i] >= 0.0) != (d[j] >= 0.0) {
                let key = edge_key(tri[i], tri[j]);
                crossing.entry(key).or_insert_with(|| {
                    let (a, b) = key;
                    let (da, db) = (plane.signed_distance(&q[a]), plane.signed_distance(&q[b]));
                    let t = da / (da - db);
                    q[a] + (q[b] - q[a]) * t
                });
                keys.push(key);
            }
        }
        if keys.len() == 2 {
            segments.push([keys[0], keys[1]]);
        }
    }

    let mut by_key: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for key in seg {
            by_key.entry(*key).or_default().push(s);
        }
    }

    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let [first, second] = segments[start];
        let mut forward = vec![first, second];
        walk(&segments, &by_key, &mut used, &mut forward);
        let closed = forward.len() > 2 && forward.first() == forward.last();
        if closed {
            forward.pop();
        } else {
            let mut backward = vec![first];
            walk(&segments, &by_key, &mut used, &mut backward);
            backward.reverse();
            backward.pop();
            backward.extend(forward);
            forward = backward;
        }
        lines.push(Polyline {
            points: forward.iter().map(|k| crossing[k]).collect(),
            closed,
        });
    }

    let total: f64 = lines.iter().map(Polyline::length).sum();
    if total < MIN_CUT_LENGTH {
        return Err(MeshError::EmptyIntersection);
    }
    Ok(lines)
}

/// Extends `chain` from its last key through unused segments.
fn walk(segments: &[[EdgeKey; 2]], by_key: &HashMap<EdgeKey, Vec<usize>>, used: &mut [bool], chain: &mut Vec<EdgeKey>) {
    loop {
        let tail = *chain.last().expect("non-empty chain");
        let next = by_key[&tail].iter().copied().find(|&s| !used[s]);
        let Some(s) = next else { break };
        used[s] = true;
        let [a, b] = segments[s];
        chain.push(if a == tail { b } else { a });
        if chain.first() == chain.last() {
            break;
        }
    }
}

/// Half-space `normal · p ≥ offset`. The normal doubles as the reference
/// direction: among several candidates the one furthest along it wins.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HalfSpace {
    pub normal: Vec3,
    pub offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec3, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// Everything above `z = height`.
    pub fn above_z(height: f64) -> Self {
        Self::new(Vec3::z(), height)
    }

    pub fn contains(&self, p: &Point3) -> bool {
        self.normal.dot(p) >= self.offset - 1e-12
    }
}

/// Two families of equally spaced parallel planes and the mask of grid
/// points that exist on the surface.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    pub row_planes: Vec<Plane>,
    pub col_planes: Vec<Plane>,
    pub valid_mask: Vec<bool>,
}

impl GridLayout {
    /// `rows` planes with normal `row_normal` at offsets
    /// `row_start + i·row_spacing`, likewise for columns. All grid points
    /// start valid.
    pub fn uniform(
        row_normal: Vec3,
        row_start: f64,
        row_spacing: f64,
        rows: usize,
        col_normal: Vec3,
        col_start: f64,
        col_spacing: f64,
        cols: usize,
    ) -> Result<Self, MeshError> {
        if rows == 0 || cols == 0 {
            return Err(MeshError::InvalidLayout("empty grid".into()));
        }
        if row_spacing <= 0.0 || col_spacing <= 0.0 {
            return Err(MeshError::InvalidLayout("spacing must be positive".into()));
        }
        let rn = Plane::new(row_normal, 0.0)?.normal();
        let cn = Plane::new(col_normal, 0.0)?.normal();
        let row_planes = (0..rows)
            .map(|i| Plane::new(rn, row_start + i as f64 * row_spacing))
            .collect::<Result<_, _>>()?;
        let col_planes = (0..cols)
            .map(|j| Plane::new(cn, col_start + j as f64 * col_spacing))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            rows,
            cols,
            row_planes,
            col_planes,
            valid_mask: vec![true; rows * cols],
        })
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid_mask[self.index(i, j)]
    }

    pub fn valid_count(&self) -> usize {
        self.valid_mask.iter().filter(|&&v| v).count()
    }

    /// Spacing between consecutive planes of a family; `None` if it is not
    /// constant.
    pub fn spacing(planes: &[Plane]) -> Option<f64> {
        let gaps: Vec<f64> = planes.windows(2).map(|w| w[1].offset() - w[0].offset()).collect();
        let first = *gaps.first()?;
        gaps.iter()
            .all(|g| (g - first).abs() < 1e-9 * first.abs().max(1.0))
            .then_some(first)
    }

    pub fn row_spacing(&self) -> Option<f64> {
        Self::spacing(&self.row_planes)
    }

    pub fn col_spacing(&self) -> Option<f64> {
        Self::spacing(&self.col_planes)
    }
}

/// Row-major grid of optional surface points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoints {
    pub rows: usize,
    pub cols: usize,
    pub points: Vec<Option<Point3>>,
}

impl GridPoints {
    pub fn get(&self, i: usize, j: usize) -> Option<Point3> {
        self.points[i * self.cols + j]
    }
}

/// Places grid points at the intersections of row and column planes with the
/// surface, keeping only hits inside `side` and preferring the hit furthest
/// along `side.normal`. Updates `layout.valid_mask`.
pub fn place_grid(
    surface: &SurfaceMesh,
    layout: &mut GridLayout,
    side: &HalfSpace,
    q: &[Point3],
) -> Result<GridPoints, MeshError> {
    let mut points = Vec::with_capacity(layout.rows * layout.cols);
    for (i, rp) in layout.row_planes.iter().enumerate() {
        for (j, cp) in layout.col_planes.iter().enumerate() {
            let dir = rp.normal().cross(&cp.normal());
            if dir.norm() < PARALLEL_EPS {
                return Err(MeshError::ParallelPlanes { row: i, col: j });
            }
            let origin = line_origin(rp, cp, &dir);
            let best = surface
                .line_hits(&origin, &dir, q)
                .into_iter()
                .map(|(_, p, _)| p)
                .filter(|p| side.contains(p))
                .max_by(|a, b| side.normal.dot(a).total_cmp(&side.normal.dot(b)));
            points.push(best);
        }
    }
    layout.valid_mask = points.iter().map(Option::is_some).collect();
    Ok(GridPoints {
        rows: layout.rows,
        cols: layout.cols,
        points,
    })
}

/// A point on the intersection line of two non-parallel planes.
fn line_origin(a: &Plane, b: &Plane, dir: &Vec3) -> Point3 {
    // p = (d1 (n2 × dir) + d2 (dir × n1)) / |dir|²
    let (n1, n2) = (a.normal(), b.normal());
    (n2.cross(dir) * a.offset() + dir.cross(&n1) * b.offset()) / dir.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::extract_surface;
    use crate::scene::shapes;

    #[test]
    fn cube_mid_cut_is_square() {
        let m = shapes::cube_five_tets(1.0);
        let s = extract_surface(&m);
        let plane = Plane::new(Vec3::z(), 0.5).unwrap();
        let lines = plane_surface_cut(&s, &plane, m.rest_positions()).unwrap();
        assert_eq!(lines.len(), 1);
        assert!(lines[0].closed);
        assert!((lines[0].length() - 4.0).abs() < 1e-12);
        for p in &lines[0].points {
            assert!(plane.signed_distance(p).abs() < 1e-12);
        }
    }

    #[test]
    fn misses_tangency_and_coplanar_face() {
        let m = shapes::cube_five_tets(1.0);
        let s = extract_surface(&m);
        let q = m.rest_positions();
        let above = Plane::new(Vec3::z(), 2.0).unwrap();
        assert!(matches!(
            plane_surface_cut(&s, &above, q),
            Err(MeshError::EmptyIntersection)
        ));
        let corner = Plane::new(Vec3::new(1.0, 1.0, 1.0), 0.0).unwrap();
        assert!(matches!(
            plane_surface_cut(&s, &corner, q),
            Err(MeshError::EmptyIntersection)
        ));
        let face = Plane::new(Vec3::z(), 1.0).unwrap();
        let rim = plane_surface_cut(&s, &face, q).unwrap();
        assert_eq!(rim.len(), 1);
        assert!((rim[0].length() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cube_grid_point_on_top() {
        let m = shapes::cube_five_tets(1.0);
        let s = extract_surface(&m);
        let mut layout = GridLayout::uniform(Vec3::y(), 0.5, 1.0, 1, Vec3::x(), 0.5, 1.0, 1).unwrap();
        let pts = place_grid(&s, &mut layout, &HalfSpace::above_z(0.5), m.rest_positions()).unwrap();
        let p = pts.get(0, 0).unwrap();
        assert!((p - Point3::new(0.5, 0.5, 1.0)).norm() < 1e-12);
        assert_eq!(layout.valid_count(), 1);
    }

    #[test]
    fn sphere_pole() {
        let m = shapes::ball(1.0, 6);
        let s = extract_surface(&m);
        let mut layout = GridLayout::uniform(Vec3::y(), 0.0, 1.0, 1, Vec3::x(), 0.0, 1.0, 1).unwrap();
        let pts = place_grid(&s, &mut layout, &HalfSpace::above_z(0.0), m.rest_positions()).unwrap();
        let p = pts.get(0, 0).unwrap();
        assert!((p - Point3::new(0.0, 0.0, 1.0)).norm() < 1e-9, "{p}");
    }

    #[test]
    fn points_outside_footprint_are_invalid() {
        let m = shapes::cube_five_tets(1.0);
        let s = extract_surface(&m);
        let mut layout = GridLayout::uniform(Vec3::y(), 0.5, 1.0, 2, Vec3::x(), 0.5, 1.0, 2).unwrap();
        let pts = place_grid(&s, &mut layout, &HalfSpace::above_z(0.5), m.rest_positions()).unwrap();
        assert!(pts.get(0, 0).is_some());
        assert!(pts.get(1, 1).is_none());
        assert_eq!(layout.valid_mask, vec![true, false, false, false]);
    }

    #[test]
    fn parallel_families_rejected() {
        let m = shapes::cube_five_tets(1.0);
        let s = extract_surface(&m);
        let mut layout = GridLayout::uniform(Vec3::x(), 0.5, 1.0, 1, Vec3::x(), 0.2, 1.0, 1).unwrap();
        assert!(matches!(
            place_grid(&s, &mut layout, &HalfSpace::above_z(0.0), m.rest_positions()),
            Err(MeshError::ParallelPlanes { row: 0, col: 0 })
        ));
    }

    #[test]
    fn spacing_is_constant() {
        let layout = GridLayout::uniform(Vec3::y(), -30.0, 12.0, 6, Vec3::x(), -40.0, 16.0, 5).unwrap();
        assert!((layout.row_spacing().unwrap() - 12.0).abs() < 1e-12);
        assert!((layout.col_spacing().unwrap() - 16.0).abs() < 1e-12);
    }
}
