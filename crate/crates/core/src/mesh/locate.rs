use nalgebra::Matrix3;

use super::TetMesh;
use crate::Point3;

/// Tolerance below which a barycentric coordinate still counts as inside.
const INSIDE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub element: usize,
    pub coords: [f64; 4],
    /// Whether `p` was inside the element (before clamping).
    pub inside: bool,
}

/// Barycentric coordinates of `p` in tetrahedron `v`. `None` for a
/// degenerate tetrahedron.
pub fn barycentric_coords(p: &Point3, v: &[Point3; 4]) -> Option<[f64; 4]> {
    let m = Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
    let lu = m.lu();
    let x = lu.solve(&(p - v[0]))?;
    if !x.iter().all(|c| c.is_finite()) {
        return None;
    }
    Some([1.0 - x[0] - x[1] - x[2], x[0], x[1], x[2]])
}

/// Finds the element containing `p` in configuration `q`. Points outside the
/// mesh fall back to the element whose most negative coordinate is
/// smallest in magnitude, with coordinates clamped to `[0, ∞)` and
/// renormalized.
///
/// Returns `None` only for an empty mesh.
pub fn locate_element(mesh: &TetMesh, p: &Point3, q: &[Point3]) -> Option<Location> {
    let mut best: Option<(f64, usize, [f64; 4])> = None;
    for t in 0..mesh.num_tets() {
        let Some(coords) = barycentric_coords(p, &mesh.tet_points(t, q)) else {
            continue;
        };
        let worst = coords.iter().copied().fold(f64::INFINITY, f64::min);
        if worst >= -INSIDE_EPS {
            return Some(Location {
                element: t,
                coords,
                inside: true,
            });
        }
        if best.is_none_or(|(b, _, _)| worst > b) {
            best = Some((worst, t, coords));
        }
    }
    best.map(|(_, element, coords)| {
        let clamped = coords.map(|c| c.max(0.0));
        let sum: f64 = clamped.iter().sum();
        Location {
            element,
            coords: clamped.map(|c| c / sum),
            inside: false,
        }
    })
}
