//! Barycentric anchoring of points to the deforming tetrahedral mesh.
//!
//! An anchor stores an element and four weights computed once at rest; the
//! anchored point is the same weighted sum of that element's current
//! vertex positions.

use crate::mesh::{locate_element, TetMesh};
use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BarycentricAnchor {
    element: usize,
    coords: [f64; 4],
}

impl BarycentricAnchor {
    /// Builds an anchor from explicit weights. Returns `None` unless they sum
    /// to one within 1e-9.
    pub fn from_parts(element: usize, coords: [f64; 4]) -> Option<Self> {
        let sum: f64 = coords.iter().sum();
        ((sum - 1.0).abs() <= 1e-9 && coords.iter().all(|c| c.is_finite())).then_some(Self { element, coords })
    }

    pub fn element(&self) -> usize {
        self.element
    }

    pub fn coords(&self) -> [f64; 4] {
        self.coords
    }

    /// Weighted sum of the element's vertices in configuration `q`.
    pub fn position_in(&self, mesh: &TetMesh, q: &[Point3]) -> Point3 {
        let tet = mesh.tets()[self.element];
        (0..4).map(|k| q[tet[k]] * self.coords[k]).sum()
    }
}

/// Anchors `p` to the mesh at rest. Points outside the mesh use the
/// closest-element clamped weights, so their reconstruction at rest is a
/// projection rather than `p` itself.
///
/// Panics on an empty mesh.
pub fn create_anchor(mesh: &TetMesh, p: &Point3) -> BarycentricAnchor {
    let loc = locate_element(mesh, p, mesh.rest_positions()).expect("mesh has no elements");
    BarycentricAnchor {
        element: loc.element,
        coords: loc.coords,
    }
}

/// Current position of an anchored point.
pub fn anchor_position(anchor: &BarycentricAnchor, mesh: &TetMesh) -> Point3 {
    anchor.position_in(mesh, mesh.positions())
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AnchorSet {
    pub anchors: Vec<BarycentricAnchor>,
    /// Optional `(row, col)` grid label per anchor.
    pub labels: Vec<Option<(usize, usize)>>,
}

impl AnchorSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, anchor: BarycentricAnchor, label: Option<(usize, usize)>) {
        self.anchors.push(anchor);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn positions(&self, mesh: &TetMesh) -> Vec<Point3> {
        self.positions_in(mesh, mesh.positions())
    }

    pub fn positions_in(&self, mesh: &TetMesh, q: &[Point3]) -> Vec<Point3> {
        self.anchors.iter().map(|a| a.position_in(mesh, q)).collect()
    }

    pub fn validate(&self, mesh: &TetMesh) -> bool {
        self.labels.len() == self.anchors.len() && self.anchors.iter().all(|a| a.element < mesh.num_tets())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::shapes;
    use nalgebra::Matrix3;
    use proptest::prelude::*;

    #[test]
    fn vertex_and_centroid() {
        let m = shapes::unit_tet();
        let a = create_anchor(&m, &m.rest_positions()[0]);
        assert_eq!(a.coords(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(anchor_position(&a, &m), m.rest_positions()[0]);
        let c = m.rest_positions().iter().sum::<Point3>() / 4.0;
        let a = create_anchor(&m, &c);
        for w in a.coords() {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn translation_and_stretch() {
        let mut m = shapes::cube_five_tets(1.0);
        let p = Point3::new(0.3, 0.6, 0.45);
        let a = create_anchor(&m, &p);
        assert!((anchor_position(&a, &m) - p).norm() < 1e-12);
        let t = Point3::new(2.0, -1.0, 0.5);
        let moved: Vec<Point3> = m.rest_positions().iter().map(|q| q + t).collect();
        m.set_positions(&moved);
        assert!((anchor_position(&a, &m) - (p + t)).norm() < 1e-12);
        let stretched: Vec<Point3> = m
            .rest_positions()
            .iter()
            .map(|q| Point3::new(2.0 * q.x, q.y, q.z))
            .collect();
        m.set_positions(&stretched);
        let g = anchor_position(&a, &m);
        assert!((g.x - 0.6).abs() < 1e-12 && (g.y - 0.6).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let m = shapes::cube_five_tets(1.0);
        let mut set = AnchorSet::new();
        set.push(create_anchor(&m, &Point3::new(0.2, 0.2, 0.2)), Some((1, 2)));
        set.push(create_anchor(&m, &Point3::new(0.9, 0.1, 0.5)), None);
        let back = AnchorSet::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back, set);
        assert!(back.validate(&m));
    }

    #[test]
    fn from_parts_checks_sum() {
        assert!(BarycentricAnchor::from_parts(0, [0.5, 0.5, 0.0, 0.0]).is_some());
        assert!(BarycentricAnchor::from_parts(0, [0.5, 0.6, 0.0, 0.0]).is_none());
    }

    proptest! {
        #[test]
        fn commutes_with_affine_maps(
            px in 0.01f64..0.99, py in 0.01f64..0.99, pz in 0.01f64..0.99,
            m in proptest::array::uniform9(-2.0f64..2.0),
            t in proptest::array::uniform3(-50.0f64..50.0),
        ) {
            let mut mesh = shapes::cube_five_tets(1.0);
            let p = Point3::new(px, py, pz);
            let a = create_anchor(&mesh, &p);
            let lin = Matrix3::from_row_slice(&m);
            let shift = Point3::new(t[0], t[1], t[2]);
            let mapped: Vec<Point3> = mesh.rest_positions().iter().map(|q| lin * q + shift).collect();
            mesh.set_positions(&mapped);
            let expected = lin * p + shift;
            let scale = 1.0 + expected.norm();
            prop_assert!((anchor_position(&a, &mesh) - expected).norm() < 1e-9 * scale);
        }
    }
}
