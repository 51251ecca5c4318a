use std::collections::HashMap;

use super::TetMesh;
use crate::{Point3, Vec3};

/// Boundary triangles of a tetrahedral mesh, outward oriented. Triangle
/// indices refer to the parent mesh's vertices.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<usize>,
    pub triangles: Vec<[usize; 3]>,
}

/// Local faces of a positively oriented tet `(a, b, c, d)`, each wound so its
/// normal points away from the opposite vertex.
const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

fn sorted(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

/// Faces that belong to exactly one tetrahedron, in tet order.
pub fn extract_surface(mesh: &TetMesh) -> SurfaceMesh {
    let mut counts: HashMap<[usize; 3], u32> = HashMap::with_capacity(mesh.num_tets() * 2);
    for tet in mesh.tets() {
        for face in TET_FACES {
            *counts.entry(sorted(face.map(|k| tet[k]))).or_default() += 1;
        }
    }
    let mut triangles = Vec::new();
    for tet in mesh.tets() {
        for face in TET_FACES {
            let tri = face.map(|k| tet[k]);
            if counts[&sorted(tri)] == 1 {
                triangles.push(tri);
            }
        }
    }
    let mut vertices: Vec<usize> = triangles.iter().flatten().copied().collect();
    vertices.sort_unstable();
    vertices.dedup();
    SurfaceMesh { vertices, triangles }
}

impl SurfaceMesh {
    pub fn triangle_points(&self, t: usize, q: &[Point3]) -> [Point3; 3] {
        self.triangles[t].map(|v| q[v])
    }

    /// Area-weighted normal (twice the area, unnormalized).
    pub fn triangle_normal(&self, t: usize, q: &[Point3]) -> Vec3 {
        let [a, b, c] = self.triangle_points(t, q);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self, q: &[Point3]) -> f64 {
        (0..self.triangles.len())
            .map(|t| 0.5 * self.triangle_normal(t, q).norm())
            .sum()
    }

    /// Directed edge counts: a closed, consistently oriented surface has
    /// every undirected edge used once in each direction.
    pub fn is_closed_and_oriented(&self) -> bool {
        let mut directed: HashMap<(usize, usize), i32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// All intersections of the infinite line `origin + t·dir` with the
    /// surface, as `(t, point, triangle)`, sorted by `t`.
    pub fn line_hits(&self, origin: &Point3, dir: &Vec3, q: &[Point3]) -> Vec<(f64, Point3, usize)> {
        let mut hits = Vec::new();
        for (t, _) in self.triangles.iter().enumerate() {
            let [a, b, c] = self.triangle_points(t, q);
            if let Some(s) = line_triangle(origin, dir, &a, &b, &c) {
                hits.push((s, origin + dir * s, t));
            }
        }
        hits.sort_by(|x, y| x.0.total_cmp(&y.0));
        hits
    }

    /// Nearest surface point to `p` with its triangle index.
    pub fn closest_point(&self, p: &Point3, q: &[Point3]) -> Option<(Point3, usize)> {
        let mut best: Option<(f64, Point3, usize)> = None;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_points(t, q);
            let c = closest_point_on_triangle(p, &a, &b, &c);
            let d = (c - p).norm_squared();
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, c, t));
            }
        }
        best.map(|(_, c, t)| (c, t))
    }

    /// Distance from `p` to the surface.
    pub fn distance(&self, p: &Point3, q: &[Point3]) -> f64 {
        self.closest_point(p, q).map_or(f64::INFINITY, |(c, _)| (c - p).norm())
    }
}

/// Möller–Trumbore without the `t ≥ 0` restriction. Edges and vertices
/// count as hits.
pub(crate) fn line_triangle(origin: &Point3, dir: &Vec3, a: &Point3, b: &Point3, c: &Point3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    let eps = 1e-12;
    if !(-eps..=1.0 + eps).contains(&u) {
        return None;
    }
    let qv = s.cross(&e1);
    let v = dir.dot(&qv) * inv;
    if v < -eps || u + v > 1.0 + eps {
        return None;
    }
    Some(e2.dot(&qv) * inv)
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub(crate) fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
