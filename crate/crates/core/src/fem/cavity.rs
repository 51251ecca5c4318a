use std::collections::HashMap;

use super::FemError;
use crate::{Point3, Vec3};

/// Pressurized chamber bounded by a closed triangle surface.
///
/// Triangles are stored so that their normals point out of the enclosed
/// volume, i.e. into the surrounding material. Pressure is in pascals.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Cavity {
    pub name: String,
    pub triangles: Vec<[usize; 3]>,
    pub pressure: f64,
}

impl Cavity {
    /// Validates closure and fixes the winding so the enclosed volume is
    /// positive at `q`.
    pub fn new(name: impl Into<String>, mut triangles: Vec<[usize; 3]>, q: &[Point3]) -> Result<Self, FemError> {
        let name = name.into();
        if triangles.is_empty() {
            return Err(FemError::OpenCavity { name });
        }
        let mut directed: HashMap<(usize, usize), i32> = HashMap::new();
        for t in &triangles {
            if t.iter().any(|&v| v >= q.len()) {
                return Err(FemError::OpenCavity { name });
            }
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        let closed = directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1));
        if !closed {
            return Err(FemError::OpenCavity { name });
        }
        if signed_enclosed_volume(&triangles, q) < 0.0 {
            for t in &mut triangles {
                t.swap(1, 2);
            }
        }
        Ok(Self {
            name,
            triangles,
            pressure: 0.0,
        })
    }

    pub fn vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.triangles.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn area(&self, q: &[Point3]) -> f64 {
        self.triangles
            .iter()
            .map(|t| 0.5 * (q[t[1]] - q[t[0]]).cross(&(q[t[2]] - q[t[0]])).norm())
            .sum()
    }
}

fn signed_enclosed_volume(triangles: &[[usize; 3]], q: &[Point3]) -> f64 {
    triangles
        .iter()
        .map(|t| q[t[0]].dot(&q[t[1]].cross(&q[t[2]])))
        .sum::<f64>()
        / 6.0
}

/// Enclosed volume in mm³ (divergence theorem).
pub fn cavity_volume(cavity: &Cavity, q: &[Point3]) -> f64 {
    signed_enclosed_volume(&cavity.triangles, q).abs()
}

/// Nodal forces (N) of a uniform pressure on the cavity walls: each triangle
/// of area `A` and unit normal `n` gives `P·A/3·n` to each of its corners.
/// The result has one entry per mesh vertex.
pub fn cavity_nodal_forces(cavity: &Cavity, q: &[Point3]) -> Vec<Vec3> {
    let mut f = vec![Vec3::zeros(); q.len()];
    add_cavity_forces(cavity, q, &mut f);
    f
}

pub(crate) fn add_cavity_forces(cavity: &Cavity, q: &[Point3], f: &mut [Vec3]) {
    if cavity.pressure == 0.0 {
        return;
    }
    // Pa → N/mm²; |a×b|/2 · n̂ = (a×b)/2.
    let p = cavity.pressure * 1e-6;
    for t in &cavity.triangles {
        let area_normal = (q[t[1]] - q[t[0]]).cross(&(q[t[2]] - q[t[0]])) * 0.5;
        let share = area_normal * (p / 3.0);
        for &v in t {
            f[v] += share;
        }
    }
}
