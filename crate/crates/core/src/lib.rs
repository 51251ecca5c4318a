//! Digital twin of a pneumatically actuated soft body carrying a mutual
//! capacitance taxel grid.
//!
//! The crate is split along the data flow of one simulation frame:
//!
//! * [`mesh`]: tetrahedral geometry, boundary extraction, plane cuts and
//!   taxel-grid placement on curved surfaces.
//! * [`fem`]: quasi-static corotational FEM with springs, gravity and
//!   cavity pressure loads.
//! * [`mapping`]: barycentric anchoring of points to the deforming mesh.
//! * [`sensor`]: behavioral CDC-count model of the taxel grid.
//! * [`touch`]: weighted N9 localization, multitouch suppression and
//!   lifting of 2D estimates to 3D.
//! * [`bench`]: probe experiments, error statistics and recorded fixtures.
//! * [`scene`]: scene configuration files and procedural test geometry.
//!
//! Interchangeable algorithm variants (linear solvers, sensor response
//! kernels, indenter profiles) live behind traits and are looked up by name
//! through [`registry`].

pub mod bench;
pub mod fem;
pub mod mapping;
pub mod mesh;
pub mod registry;
pub mod scene;
pub mod sensor;
pub mod touch;

/// Positions and vectors in millimetres.
pub type Point3 = nalgebra::Vector3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
