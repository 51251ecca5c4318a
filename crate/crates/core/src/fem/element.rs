//! Corotational linear tetrahedron.
//!
//! Energy density `ψ(F) = μ‖F − R‖² + λ/2 · tr(RᵀF − I)²` with `F = R S` the
//! polar decomposition. Small strains reduce this to Hookean elasticity;
//! large rotations are factored out exactly.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::{FemError, MaterialParams};
use crate::Point3;

pub type Mat12 = SMatrix<f64, 12, 12>;
type Mat9 = SMatrix<f64, 9, 9>;

#[derive(Debug, Clone)]
pub struct Element {
    pub nodes: [usize; 4],
    /// Inverse of the rest edge matrix `[x1 − x0, x2 − x0, x3 − x0]`.
    pub rest_inverse: Matrix3<f64>,
    pub rest_volume: f64,
}

impl Element {
    pub fn new(nodes: [usize; 4], rest: &[Point3; 4]) -> Option<Self> {
        let dm = edge_matrix(rest);
        let volume = dm.determinant() / 6.0;
        if volume <= 0.0 {
            return None;
        }
        Some(Self {
            nodes,
            rest_inverse: dm.try_inverse()?,
            rest_volume: volume,
        })
    }

    pub fn deformation_gradient(&self, x: &[Point3; 4]) -> Matrix3<f64> {
        edge_matrix(x) * self.rest_inverse
    }

    fn decompose(&self, x: &[Point3; 4], id: usize) -> Result<Polar, FemError> {
        let f = self.deformation_gradient(x);
        if f.determinant() <= 0.0 {
            return Err(FemError::InvertedElement { element: id });
        }
        Polar::of(f).ok_or(FemError::InvertedElement { element: id })
    }

    /// Elastic energy of the element.
    pub fn energy(&self, x: &[Point3; 4], mat: &MaterialParams, id: usize) -> Result<f64, FemError> {
        let p = self.decompose(x, id)?;
        let (mu, lambda) = mat.lame();
        let tr = p.s.trace() - 3.0;
        Ok(self.rest_volume * (mu * (p.f - p.r).norm_squared() + 0.5 * lambda * tr * tr))
    }

    /// Nodal gradient of the element energy (the internal force vector
    /// that external loads must balance).
    pub fn forces(&self, x: &[Point3; 4], mat: &MaterialParams, id: usize) -> Result<[Vector3<f64>; 4], FemError> {
        let p = self.decompose(x, id)?;
        let (mu, lambda) = mat.lame();
        let stress = (p.f - p.r) * (2.0 * mu) + p.r * (lambda * (p.s.trace() - 3.0));
        let h = stress * self.rest_inverse.transpose() * self.rest_volume;
        let f1 = h.column(0).into_owned();
        let f2 = h.column(1).into_owned();
        let f3 = h.column(2).into_owned();
        Ok([-(f1 + f2 + f3), f1, f2, f3])
    }

    /// Exact Hessian of the element energy, including the derivative of the
    /// rotation.
    pub fn stiffness(&self, x: &[Point3; 4], mat: &MaterialParams, id: usize) -> Result<Mat12, FemError> {
        let p = self.decompose(x, id)?;
        let (mu, lambda) = mat.lame();
        let tr = p.s.trace() - 3.0;
        let rot_solve = (Matrix3::identity() * p.s.trace() - p.s)
            .try_inverse()
            .ok_or(FemError::InvertedElement { element: id })?;

        // dP/dF column by column over the 9 unit directions of F.
        let mut dpdf = Mat9::zeros();
        for c in 0..9 {
            let mut df = Matrix3::zeros();
            df[(c % 3, c / 3)] = 1.0;
            let a = p.r.transpose() * df;
            let a = a - a.transpose();
            let w = rot_solve * Vector3::new(a[(2, 1)], a[(0, 2)], a[(1, 0)]);
            let dr = p.r * w.cross_matrix();
            let dtr = p.r.dot(&df);
            let dp = (df - dr) * (2.0 * mu) + p.r * (lambda * dtr) + dr * (lambda * tr);
            dpdf.set_column(c, &SVector::<f64, 9>::from_column_slice(dp.as_slice()));
        }

        // vec(F) = G · x for the 12 nodal coordinates.
        let mut g = SMatrix::<f64, 9, 12>::zeros();
        for a in 0..3 {
            for col in 0..3 {
                let row = a + 3 * col;
                let mut sum = 0.0;
                for node in 1..4 {
                    let coeff = self.rest_inverse[(node - 1, col)];
                    g[(row, 3 * node + a)] = coeff;
                    sum += coeff;
                }
                g[(row, a)] = -sum;
            }
        }
        let k = g.transpose() * dpdf * g * self.rest_volume;
        Ok((k + k.transpose()) * 0.5)
    }
}

fn edge_matrix(x: &[Point3; 4]) -> Matrix3<f64> {
    Matrix3::from_columns(&[x[1] - x[0], x[2] - x[0], x[3] - x[0]])
}

struct Polar {
    f: Matrix3<f64>,
    r: Matrix3<f64>,
    s: Matrix3<f64>,
}

impl Polar {
    fn of(f: Matrix3<f64>) -> Option<Self> {
        let svd = f.try_svd(true, true, 1e-15, 200)?;
        let r = svd.u? * svd.v_t?;
        let s = r.transpose() * f;
        let s = (s + s.transpose()) * 0.5;
        Some(Self { f, r, s })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn mat() -> MaterialParams {
        MaterialParams::new(1.0, 0.3, 1000.0).unwrap()
    }

    fn rest() -> [Point3; 4] {
        [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.1, 0.0),
            Point3::new(0.2, 1.0, 0.1),
            Point3::new(0.1, 0.0, 1.2),
        ]
    }

    fn perturbed() -> [Point3; 4] {
        let r = Rotation3::from_euler_angles(0.3, -0.4, 0.8);
        let mut x = rest().map(|p| r * p);
        x[1] += Vector3::new(0.05, -0.02, 0.03);
        x[3] += Vector3::new(-0.04, 0.06, 0.1);
        x
    }

    #[test]
    fn forces_are_energy_gradient() {
        let e = Element::new([0, 1, 2, 3], &rest()).unwrap();
        let x = perturbed();
        let f = e.forces(&x, &mat(), 0).unwrap();
        let h = 1e-6;
        for node in 0..4 {
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[node][a] += h;
                xm[node][a] -= h;
                let fd = (e.energy(&xp, &mat(), 0).unwrap() - e.energy(&xm, &mat(), 0).unwrap()) / (2.0 * h);
                assert!((fd - f[node][a]).abs() < 1e-7, "{node} {a}: {fd} vs {}", f[node][a]);
            }
        }
    }

    #[test]
    fn stiffness_matches_force_differences() {
        let e = Element::new([0, 1, 2, 3], &rest()).unwrap();
        let x = perturbed();
        let k = e.stiffness(&x, &mat(), 0).unwrap();
        let h = 1e-6;
        let mut max_err: f64 = 0.0;
        for node in 0..4 {
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[node][a] += h;
                xm[node][a] -= h;
                let fp = e.forces(&xp, &mat(), 0).unwrap();
                let fm = e.forces(&xm, &mat(), 0).unwrap();
                for n2 in 0..4 {
                    for b in 0..3 {
                        let fd = (fp[n2][b] - fm[n2][b]) / (2.0 * h);
                        max_err = max_err.max((fd - k[(3 * n2 + b, 3 * node + a)]).abs());
                    }
                }
            }
        }
        assert!(max_err < 1e-6 * k.abs().max(), "max error {max_err}");
    }

    #[test]
    fn rigid_motion_is_force_free() {
        let e = Element::new([0, 1, 2, 3], &rest()).unwrap();
        let r = Rotation3::from_axis_angle(&Vector3::z_axis(), 30f64.to_radians());
        let x = rest().map(|p| r * p + Vector3::new(3.0, -1.0, 2.0));
        for f in e.forces(&x, &mat(), 0).unwrap() {
            assert!(f.norm() < 1e-12);
        }
    }

    #[test]
    fn inversion_is_reported() {
        let e = Element::new([0, 1, 2, 3], &rest()).unwrap();
        let mut x = rest();
        x[3].z = -1.0;
        assert!(matches!(
            e.forces(&x, &mat(), 5),
            Err(FemError::InvertedElement { element: 5 })
        ));
    }
}
