//! Quasi-static finite elements for the soft body.
//!
//! Units are millimetres, newtons and megapascals (1 MPa = 1 N/mm²).
//! Cavity pressures are given in pascals and converted at load time.

mod cavity;
mod element;
pub mod linsolve;
mod solver;
pub mod sparse;

pub use cavity::{cavity_nodal_forces, cavity_volume, Cavity};
pub use element::Element;
pub use linsolve::LinearSolver;
pub use solver::{
    internal_forces, solve_equilibrium, tangent_stiffness, BoundaryConditions, PointLoad, SimState, SolverConfig,
    Spring,
};

use crate::registry::UnknownStrategy;

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("element {element} is inverted or degenerate")]
    InvertedElement { element: usize },
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("unknown cavity `{0}`")]
    UnknownCavity(String),
    #[error("cavity `{name}` is not a closed, consistently oriented surface")]
    OpenCavity { name: String },
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid boundary conditions: {0}")]
    InvalidBoundary(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    UnknownSolver(#[from] UnknownStrategy),
}

/// Isotropic Hookean material.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaterialParams {
    /// Young's modulus in MPa.
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    /// kg/m³.
    pub density: f64,
}

impl MaterialParams {
    pub fn new(young_modulus_mpa: f64, poisson_ratio: f64, density: f64) -> Result<Self, FemError> {
        if !(young_modulus_mpa > 0.0 && young_modulus_mpa.is_finite()) {
            return Err(FemError::InvalidMaterial(format!(
                "Young's modulus must be positive, got {young_modulus_mpa} MPa"
            )));
        }
        if !(0.0..0.5).contains(&poisson_ratio) {
            return Err(FemError::InvalidMaterial(format!(
                "Poisson ratio must lie in [0, 0.5), got {poisson_ratio}"
            )));
        }
        if !(density >= 0.0 && density.is_finite()) {
            return Err(FemError::InvalidMaterial(format!("bad density {density}")));
        }
        Ok(Self {
            young_modulus: young_modulus_mpa,
            poisson_ratio,
            density,
        })
    }

    pub fn from_pascals(young_modulus_pa: f64, poisson_ratio: f64, density: f64) -> Result<Self, FemError> {
        Self::new(young_modulus_pa * 1e-6, poisson_ratio, density)
    }

    /// Assumed Ecoflex 00-50 silicone: E = 0.083 MPa, ν = 0.45,
    /// ρ = 1070 kg/m³. Not a measured value; override it in scene files.
    pub fn ecoflex_00_50() -> Self {
        Self {
            young_modulus: 0.083,
            poisson_ratio: 0.45,
            density: 1070.0,
        }
    }

    /// Lamé parameters `(μ, λ)` in MPa.
    pub fn lame(&self) -> (f64, f64) {
        let (e, nu) = (self.young_modulus, self.poisson_ratio);
        (e / (2.0 * (1.0 + nu)), e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self::ecoflex_00_50()
    }
}
