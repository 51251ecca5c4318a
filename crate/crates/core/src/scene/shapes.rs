//! Procedural test geometry.
//!
//! Everything here is built from a structured block of hexahedral cells in
//! the parameter cube `[-1, 1]³`, each split into six tetrahedra along its
//! main diagonal (Kuhn split, so face diagonals agree between neighbours),
//! then pushed through a coordinate map. Removed cells become cavities.

use std::collections::HashSet;

use crate::mesh::{extract_surface, MeshFile, TetMesh};
use crate::Point3;

/// Structured block description.
pub struct Block<'a> {
    pub cells: [usize; 3],
    pub map: &'a dyn Fn(Point3) -> Point3,
    /// Named groups of removed cells; each group becomes one cavity.
    pub cavities: Vec<(String, Vec<[usize; 3]>)>,
}

const KUHN: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

impl Block<'_> {
    pub fn build(&self) -> MeshFile {
        let [nx, ny, nz] = self.cells;
        let node = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
        let mut params = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    params.push(Point3::new(
                        -1.0 + 2.0 * i as f64 / nx as f64,
                        -1.0 + 2.0 * j as f64 / ny as f64,
                        -1.0 + 2.0 * k as f64 / nz as f64,
                    ));
                }
            }
        }
        let removed: HashSet<[usize; 3]> = self
            .cavities
            .iter()
            .flat_map(|(_, cells)| cells.iter().copied())
            .collect();

        let mut tets = Vec::with_capacity(nx * ny * nz * 6);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if removed.contains(&[i, j, k]) {
                        continue;
                    }
                    for perm in KUHN {
                        let mut c = [i, j, k];
                        let mut tet = [node(c[0], c[1], c[2]); 4];
                        for (s, &axis) in perm.iter().enumerate() {
                            c[axis] += 1;
                            tet[s + 1] = node(c[0], c[1], c[2]);
                        }
                        tets.push(tet);
                    }
                }
            }
        }

        // Drop nodes that only touched removed cells.
        let mut used = vec![false; params.len()];
        for t in &tets {
            for &v in t {
                used[v] = true;
            }
        }
        let mut remap = vec![usize::MAX; params.len()];
        let mut kept_params = Vec::new();
        for (v, p) in params.iter().enumerate() {
            if used[v] {
                remap[v] = kept_params.len();
                kept_params.push(*p);
            }
        }
        for t in &mut tets {
            *t = t.map(|v| remap[v]);
        }
        let positions: Vec<Point3> = kept_params.iter().map(|p| (self.map)(*p)).collect();
        let mesh = TetMesh::new(positions, tets).expect("structured block produced a degenerate tet");

        // Cavity walls are boundary faces whose parameter-space centroid lies
        // on the closed box of that cavity's cells.
        let surface = extract_surface(&mesh);
        let h = [2.0 / nx as f64, 2.0 / ny as f64, 2.0 / nz as f64];
        let cavities = self
            .cavities
            .iter()
            .map(|(name, cells)| {
                let tris: Vec<[usize; 3]> = surface
                    .triangles
                    .iter()
                    .filter(|tri| {
                        let c = tri.iter().map(|&v| kept_params[v]).sum::<Point3>() / 3.0;
                        cells.iter().any(|cell| {
                            (0..3).all(|a| {
                                let lo = -1.0 + cell[a] as f64 * h[a];
                                c[a] >= lo - 1e-9 && c[a] <= lo + h[a] + 1e-9
                            })
                        })
                    })
                    // Boundary faces point into the hole; cavities point into
                    // the material.
                    .map(|t| [t[0], t[2], t[1]])
                    .collect();
                (name.clone(), tris)
            })
            .collect();

        MeshFile {
            mesh,
            cavities,
            fixed: Vec::new(),
        }
    }
}

fn cells_in(x: std::ops::Range<usize>, y: std::ops::Range<usize>, z: std::ops::Range<usize>) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for k in z {
        for j in y.clone() {
            for i in x.clone() {
                out.push([i, j, k]);
            }
        }
    }
    out
}

/// Smooth map of the cube `[-1, 1]³` onto the unit ball.
pub fn cube_to_ball(p: Point3) -> Point3 {
    let (x2, y2, z2) = (p.x * p.x, p.y * p.y, p.z * p.z);
    Point3::new(
        p.x * (1.0 - y2 / 2.0 - z2 / 2.0 + y2 * z2 / 3.0).sqrt(),
        p.y * (1.0 - z2 / 2.0 - x2 / 2.0 + z2 * x2 / 3.0).sqrt(),
        p.z * (1.0 - x2 / 2.0 - y2 / 2.0 + x2 * y2 / 3.0).sqrt(),
    )
}

pub fn unit_tet() -> TetMesh {
    TetMesh::new(
        vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ],
        vec![[0, 1, 2, 3]],
    )
    .expect("valid tet")
}

/// Cube `[0, size]³` split into five tetrahedra (one central, four corners).
/// Vertex `i` sits at `((i & 1), (i >> 1) & 1, (i >> 2) & 1) · size`.
pub fn cube_five_tets(size: f64) -> TetMesh {
    let vertices = (0..8)
        .map(|i| {
            Point3::new(
                (i & 1) as f64 * size,
                ((i >> 1) & 1) as f64 * size,
                ((i >> 2) & 1) as f64 * size,
            )
        })
        .collect();
    TetMesh::new(
        vertices,
        vec![[0, 1, 2, 4], [3, 1, 2, 7], [5, 1, 4, 7], [6, 2, 4, 7], [1, 2, 4, 7]],
    )
    .expect("valid cube")
}

/// Axis-aligned box `[0, lx] × [0, ly] × [0, lz]`.
pub fn box_mesh(size: [f64; 3], cells: [usize; 3]) -> TetMesh {
    let map = move |p: Point3| {
        Point3::new(
            (p.x + 1.0) * 0.5 * size[0],
            (p.y + 1.0) * 0.5 * size[1],
            (p.z + 1.0) * 0.5 * size[2],
        )
    };
    Block {
        cells,
        map: &map,
        cavities: Vec::new(),
    }
    .build()
    .mesh
}

/// Ball of radius `radius` centred at the origin with `n³` cells. `n` even
/// puts a vertex at each pole.
pub fn ball(radius: f64, n: usize) -> TetMesh {
    let map = move |p: Point3| cube_to_ball(p) * radius;
    Block {
        cells: [n, n, n],
        map: &map,
        cavities: Vec::new(),
    }
    .build()
    .mesh
}

/// Cube `[-size/2, size/2]³` with `n³` cells and the central `hole³` cells
/// removed as cavity `"c1"`. `n - hole` must be even.
pub fn cube_with_cavity(size: f64, n: usize, hole: usize) -> MeshFile {
    assert!(hole < n && (n - hole).is_multiple_of(2), "hole must be centred");
    let lo = (n - hole) / 2;
    let map = move |p: Point3| p * (size / 2.0);
    Block {
        cells: [n, n, n],
        map: &map,
        cavities: vec![("c1".into(), cells_in(lo..lo + hole, lo..lo + hole, lo..lo + hole))],
    }
    .build()
}

/// Parameters of the fruit-like stand-in body.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FruitParams {
    /// Semi-axes of the base ellipsoid (mm).
    pub semi_axes: [f64; 3],
    /// Relative narrowing of the x half-width towards +y.
    pub taper: f64,
    /// Lateral bend of the tip: x offset `-bend·(y - bend_start)²` for
    /// `y > bend_start` (mm⁻¹).
    pub bend: f64,
    pub bend_start: f64,
    pub cells: [usize; 3],
}

impl Default for FruitParams {
    fn default() -> Self {
        Self {
            semi_axes: [40.0, 70.0, 26.0],
            taper: 0.3,
            bend: 0.006,
            bend_start: 20.0,
            cells: [8, 12, 6],
        }
    }
}

/// Fruit-like closed body: a tapered ellipsoid elongated along y with its
/// tip bent towards -x, hollowed by three chambers `c1..c3` along its axis
/// in the lower half.
///
/// This is a stand-in; the real sculpture's geometry is not available.
pub fn fruit(params: &FruitParams) -> MeshFile {
    let p = *params;
    let map = move |u: Point3| {
        let b = cube_to_ball(u);
        let y = b.y * p.semi_axes[1];
        let width = 1.0 - p.taper * 0.5 * (b.y + 1.0) + p.taper * 0.5;
        let mut x = b.x * p.semi_axes[0] * width;
        if y > p.bend_start {
            x -= p.bend * (y - p.bend_start).powi(2);
        }
        Point3::new(x, y, b.z * p.semi_axes[2])
    };
    let [nx, ny, nz] = p.cells;
    let xs = nx / 2 - 1..nx / 2 + 1;
    let zs = nz / 2 - 1..nz / 2 + 1;
    let third = ny / 4;
    let cavities = (0..3)
        .map(|c| {
            let y0 = 1 + c * third + c / 2;
            (format!("c{}", c + 1), cells_in(xs.clone(), y0..y0 + 2, zs.clone()))
        })
        .collect();
    Block {
        cells: p.cells,
        map: &map,
        cavities,
    }
    .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::extract_surface;

    #[test]
    fn blocks_have_positive_volume_and_closed_surface() {
        let m = box_mesh([2.0, 3.0, 4.0], [2, 3, 4]);
        assert!((m.total_volume(m.rest_positions()) - 24.0).abs() < 1e-10);
        let s = extract_surface(&m);
        assert!(s.is_closed_and_oriented());
        assert!((s.area(m.rest_positions()) - 2.0 * (6.0 + 8.0 + 12.0)).abs() < 1e-10);
    }

    #[test]
    fn ball_is_round() {
        let m = ball(1.0, 6);
        let s = extract_surface(&m);
        for &v in &s.vertices {
            assert!((m.rest_positions()[v].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cavity_block_walls() {
        let f = cube_with_cavity(3.0, 3, 1);
        assert_eq!(f.cavities.len(), 1);
        // Unit cube hole: 6 faces × 2 triangles.
        assert_eq!(f.cavities[0].1.len(), 12);
        let m = &f.mesh;
        assert!((m.total_volume(m.rest_positions()) - 26.0).abs() < 1e-10);
    }

    #[test]
    fn fruit_has_three_disjoint_chambers() {
        let f = fruit(&FruitParams::default());
        assert_eq!(f.cavities.len(), 3);
        let mut seen = HashSet::new();
        for (_, tris) in &f.cavities {
            assert_eq!(tris.len(), 2 * (4 * 4 + 4 * 2));
            for t in tris {
                for v in t {
                    seen.insert(*v);
                }
            }
        }
        // Chambers share no vertices.
        let total: usize = f
            .cavities
            .iter()
            .map(|(_, t)| t.iter().flatten().collect::<HashSet<_>>().len())
            .sum();
        assert_eq!(total, seen.len());
    }
}
