//! Deformed probing configuration: springs drag the tip nodes onto their
//! rest positions rotated about a pivot axis.

use nalgebra::{Matrix3, Rotation3, Unit};

use super::BenchError;
use crate::fem::Spring;
use crate::scene::{Scene, SceneError};
use crate::{Point3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DeformReport {
    pub target_deg: f64,
    /// Angle of the best-fit rigid rotation of the tip nodes from rest.
    pub measured_deg: f64,
    pub tip_nodes: usize,
}

/// Best-fit rotation taking the centred `from` cloud onto the centred `to`
/// cloud (Kabsch).
pub fn best_fit_rotation(from: &[Point3], to: &[Point3]) -> Rotation3<f64> {
    let centroid = |ps: &[Point3]| ps.iter().sum::<Vec3>() / ps.len().max(1) as f64;
    let (ca, cb) = (centroid(from), centroid(to));
    let h: Matrix3<f64> = from.iter().zip(to).map(|(a, b)| (a - ca) * (b - cb).transpose()).sum();
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let d = (v_t.transpose() * u.transpose()).determinant().signum();
    let r = v_t.transpose() * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    Rotation3::from_matrix_unchecked(r)
}

/// Rotation angle in radians, well conditioned near zero.
pub fn rotation_angle(r: &Rotation3<f64>) -> f64 {
    let m = r.matrix();
    let axis = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    axis.norm().atan2(m.trace() - 1.0)
}

/// Ramps the tip rotation to the configured angle over `ramp_steps`
/// equilibrium solves, starting from the scene's current state and
/// pressures. The tip springs stay attached afterwards; [`Scene::reset`]
/// removes them.
pub fn apply_deformed_config(scene: &mut Scene) -> Result<DeformReport, BenchError> {
    let tip = scene.config.tip.clone().ok_or(BenchError::MissingTip)?;
    let axis = Unit::try_new(Vec3::from(tip.axis), 1e-12)
        .ok_or_else(|| SceneError::Invalid("tip axis must be non-zero".into()))?;
    let pivot = Point3::from(tip.pivot_mm);
    let rest: Vec<Point3> = scene
        .tip_nodes
        .iter()
        .map(|&v| scene.state.mesh.rest_positions()[v])
        .collect();
    let base = scene.bcs.springs.clone();
    let steps = tip.ramp_steps.max(1);
    for k in 1..=steps {
        let angle = tip.angle_deg.to_radians() * k as f64 / steps as f64;
        let rot = Rotation3::from_axis_angle(&axis, angle);
        let mut springs = base.clone();
        springs.extend(scene.tip_nodes.iter().zip(&rest).map(|(&node, p)| Spring {
            node,
            anchor: pivot + rot * (p - pivot),
            stiffness: tip.stiffness_n_per_mm,
        }));
        scene.bcs.springs = springs;
        scene.solve()?;
    }
    let now: Vec<Point3> = scene.tip_nodes.iter().map(|&v| scene.state.positions()[v]).collect();
    Ok(DeformReport {
        target_deg: tip.angle_deg,
        measured_deg: rotation_angle(&best_fit_rotation(&rest, &now)).to_degrees(),
        tip_nodes: rest.len(),
    })
}
