//! Newton iteration for static equilibrium
//! `F(q) = P + f_springs(q) + f_pressure(q)` with fixed nodes eliminated.

use std::collections::BTreeSet;

use super::cavity::add_cavity_forces;
use super::element::Element;
use super::linsolve::{self, LinearSolver};
use super::sparse::{BlockPattern, CsrMatrix};
use super::{Cavity, FemError, MaterialParams};
use crate::mesh::TetMesh;
use crate::{Point3, Vec3};

/// Zero-length spring pulling `node` towards `anchor` (stiffness N/mm).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Spring {
    pub node: usize,
    pub anchor: Point3,
    pub stiffness: f64,
}

/// Constant force (N) on one node.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PointLoad {
    pub node: usize,
    pub force: Vec3,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BoundaryConditions {
    pub fixed_nodes: BTreeSet<usize>,
    pub springs: Vec<Spring>,
    /// Gravitational acceleration in mm/s².
    pub gravity: Vec3,
    pub point_loads: Vec<PointLoad>,
}

impl BoundaryConditions {
    pub fn validate(&self, num_vertices: usize) -> Result<(), FemError> {
        if let Some(&n) = self.fixed_nodes.iter().find(|&&n| n >= num_vertices) {
            return Err(FemError::InvalidBoundary(format!("fixed node {n} out of range")));
        }
        if let Some(l) = self.point_loads.iter().find(|l| l.node >= num_vertices) {
            return Err(FemError::InvalidBoundary(format!("load node {} out of range", l.node)));
        }
        for s in &self.springs {
            if s.node >= num_vertices {
                return Err(FemError::InvalidBoundary(format!(
                    "spring node {} out of range",
                    s.node
                )));
            }
            if !(s.stiffness >= 0.0) {
                return Err(FemError::InvalidBoundary(format!(
                    "negative spring stiffness {}",
                    s.stiffness
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Residual norm target in N over free degrees of freedom.
    pub tolerance: f64,
    pub max_newton_iters: usize,
    pub load_steps: usize,
    /// Registry name of the linear solver.
    pub linear_solver: String,
    pub cg_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_newton_iters: 50,
            load_steps: 10,
            linear_solver: "direct-sparse".into(),
            cg_tolerance: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), FemError> {
        if !(self.tolerance > 0.0) {
            return Err(FemError::InvalidConfig("tolerance must be positive".into()));
        }
        if self.load_steps == 0 {
            return Err(FemError::InvalidConfig("load_steps must be at least 1".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(FemError::InvalidConfig("max_newton_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Mesh, chambers and the outcome of the last solve.
#[derive(Debug, Clone)]
pub struct SimState {
    pub mesh: TetMesh,
    pub cavities: Vec<Cavity>,
    targets: Vec<f64>,
    elements: Vec<Element>,
    pattern: BlockPattern,
    /// `q_end − q_start` of the last solve, one entry per vertex.
    pub last_displacement: Vec<Vec3>,
    pub converged: bool,
    pub residual_norm: f64,
    /// Linear solves performed in the last call to [`solve_equilibrium`].
    pub newton_iterations: usize,
}

impl SimState {
    pub fn new(mesh: TetMesh, cavities: Vec<Cavity>) -> Result<Self, FemError> {
        let elements = build_elements(&mesh)?;
        let n = mesh.num_vertices();
        let targets = cavities.iter().map(|c| c.pressure).collect();
        let pattern = BlockPattern::from_elements(n, mesh.tets());
        Ok(Self {
            pattern,
            mesh,
            cavities,
            targets,
            elements,
            last_displacement: vec![Vec3::zeros(); n],
            converged: true,
            residual_norm: 0.0,
            newton_iterations: 0,
        })
    }

    pub fn cavity(&self, name: &str) -> Option<&Cavity> {
        self.cavities.iter().find(|c| c.name == name)
    }

    fn cavity_index(&self, name: &str) -> Result<usize, FemError> {
        self.cavities
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| FemError::UnknownCavity(name.to_owned()))
    }

    /// Stores a pressure target (Pa); the next solve ramps towards it.
    pub fn set_pressure(&mut self, name: &str, pascals: f64) -> Result<(), FemError> {
        let i = self.cavity_index(name)?;
        self.targets[i] = pascals;
        Ok(())
    }

    pub fn target_pressure(&self, name: &str) -> Result<f64, FemError> {
        Ok(self.targets[self.cavity_index(name)?])
    }

    /// Moves the current pressures directly to the targets without solving.
    pub fn apply_targets_now(&mut self) {
        for (c, &t) in self.cavities.iter_mut().zip(&self.targets) {
            c.pressure = t;
        }
    }

    pub fn positions(&self) -> &[Point3] {
        self.mesh.positions()
    }

    /// Back to rest positions with all pressures and targets zero.
    pub fn reset(&mut self) {
        self.mesh.reset();
        for (c, t) in self.cavities.iter_mut().zip(self.targets.iter_mut()) {
            c.pressure = 0.0;
            *t = 0.0;
        }
        self.last_displacement.fill(Vec3::zeros());
        self.converged = true;
        self.residual_norm = 0.0;
        self.newton_iterations = 0;
    }
}

fn build_elements(mesh: &TetMesh) -> Result<Vec<Element>, FemError> {
    let rest = mesh.rest_positions();
    mesh.tets()
        .iter()
        .enumerate()
        .map(|(t, &nodes)| Element::new(nodes, &nodes.map(|v| rest[v])).ok_or(FemError::InvertedElement { element: t }))
        .collect()
}

fn assemble_forces(elements: &[Element], material: &MaterialParams, q: &[Point3]) -> Result<Vec<Vec3>, FemError> {
    let mut f = vec![Vec3::zeros(); q.len()];
    for (id, e) in elements.iter().enumerate() {
        let fe = e.forces(&e.nodes.map(|v| q[v]), material, id)?;
        for (k, &v) in e.nodes.iter().enumerate() {
            f[v] += fe[k];
        }
    }
    Ok(f)
}

fn assemble_stiffness(
    elements: &[Element],
    pattern: &BlockPattern,
    material: &MaterialParams,
    q: &[Point3],
) -> Result<CsrMatrix, FemError> {
    let mut k = pattern.zeros();
    for (id, e) in elements.iter().enumerate() {
        let ke = e.stiffness(&e.nodes.map(|v| q[v]), material, id)?;
        for (a, &va) in e.nodes.iter().enumerate() {
            for (c, &vc) in e.nodes.iter().enumerate() {
                pattern.add_block(&mut k, va, vc, |i, j| ke[(3 * a + i, 3 * c + j)]);
            }
        }
    }
    Ok(k)
}

/// Internal elastic forces `F(q)` (N per node): the gradient of the stored
/// energy, zero at rest.
pub fn internal_forces(mesh: &TetMesh, material: &MaterialParams, q: &[Point3]) -> Result<Vec<Vec3>, FemError> {
    assemble_forces(&build_elements(mesh)?, material, q)
}

/// Tangent stiffness `K = ∂F/∂q` as a `3n × 3n` sparse matrix.
pub fn tangent_stiffness(mesh: &TetMesh, material: &MaterialParams, q: &[Point3]) -> Result<CsrMatrix, FemError> {
    let pattern = BlockPattern::from_elements(mesh.num_vertices(), mesh.tets());
    assemble_stiffness(&build_elements(mesh)?, &pattern, material, q)
}

fn lumped_gravity(mesh: &TetMesh, material: &MaterialParams, gravity: &Vec3) -> Vec<Vec3> {
    let mut f = vec![Vec3::zeros(); mesh.num_vertices()];
    if gravity.norm() == 0.0 {
        return f;
    }
    let rest = mesh.rest_positions();
    for (t, tet) in mesh.tets().iter().enumerate() {
        // kg/m³ · mm³ → kg is 1e-9; kg · mm/s² → N is 1e-3.
        let mass = material.density * mesh.tet_volume(t, rest) * 1e-9;
        let share = gravity * (mass * 1e-3 / 4.0);
        for &v in tet {
            f[v] += share;
        }
    }
    f
}

struct Problem<'a> {
    elements: &'a [Element],
    pattern: &'a BlockPattern,
    material: &'a MaterialParams,
    bcs: &'a BoundaryConditions,
    gravity: Vec<Vec3>,
    /// Global DOF → reduced DOF.
    dof_map: Vec<Option<usize>>,
    free: usize,
}

impl Problem<'_> {
    /// External minus internal force on the free DOFs.
    fn residual(&self, q: &[Point3], cavities: &[Cavity]) -> Result<Vec<f64>, FemError> {
        let mut f = self.gravity.clone();
        for l in &self.bcs.point_loads {
            f[l.node] += l.force;
        }
        for s in &self.bcs.springs {
            f[s.node] += (s.anchor - q[s.node]) * s.stiffness;
        }
        for c in cavities {
            add_cavity_forces(c, q, &mut f);
        }
        let internal = assemble_forces(self.elements, self.material, q)?;
        let mut r = vec![0.0; self.free];
        for (v, (fe, fi)) in f.iter().zip(&internal).enumerate() {
            for a in 0..3 {
                if let Some(k) = self.dof_map[3 * v + a] {
                    r[k] = fe[a] - fi[a];
                }
            }
        }
        Ok(r)
    }

    fn jacobian(&self, q: &[Point3]) -> Result<CsrMatrix, FemError> {
        let mut k = assemble_stiffness(self.elements, self.pattern, self.material, q)?;
        for s in &self.bcs.springs {
            for a in 0..3 {
                k.add_to_diagonal(3 * s.node + a, s.stiffness);
            }
        }
        Ok(k.restrict(&self.dof_map, self.free))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves for static equilibrium, ramping each cavity's pressure from its
/// current value to its target over `config.load_steps` steps (one step if
/// no pressure changes). On return `state.converged` tells whether every
/// step met `config.tolerance` within `config.max_newton_iters`.
pub fn solve_equilibrium(
    state: &mut SimState,
    material: &MaterialParams,
    bcs: &BoundaryConditions,
    config: &SolverConfig,
) -> Result<(), FemError> {
    config.validate()?;
    let n = state.mesh.num_vertices();
    bcs.validate(n)?;
    let solver: Box<dyn LinearSolver> = linsolve::builtin().create(&config.linear_solver)?;

    let mut dof_map = vec![None; 3 * n];
    let mut free = 0;
    for v in 0..n {
        if bcs.fixed_nodes.contains(&v) {
            continue;
        }
        for a in 0..3 {
            dof_map[3 * v + a] = Some(free);
            free += 1;
        }
    }
    let problem = Problem {
        elements: &state.elements,
        pattern: &state.pattern,
        material,
        bcs,
        gravity: lumped_gravity(&state.mesh, material, &bcs.gravity),
        dof_map,
        free,
    };

    let start: Vec<Point3> = state.mesh.positions().to_vec();
    let mut q = start.clone();
    let rest = state.mesh.rest_positions();
    for &v in &bcs.fixed_nodes {
        q[v] = rest[v];
    }

    let from: Vec<f64> = state.cavities.iter().map(|c| c.pressure).collect();
    let ramping = from.iter().zip(&state.targets).any(|(a, b)| a != b);
    let steps = if ramping { config.load_steps } else { 1 };

    state.newton_iterations = 0;
    state.converged = true;
    for step in 1..=steps {
        let s = step as f64 / steps as f64;
        for ((c, &a), &b) in state.cavities.iter_mut().zip(&from).zip(&state.targets) {
            c.pressure = if step == steps { b } else { a + (b - a) * s };
        }
        let mut r = problem.residual(&q, &state.cavities)?;
        let mut r_norm = norm(&r);
        let mut iters = 0;
        while r_norm > config.tolerance {
            if iters == config.max_newton_iters {
                state.converged = false;
                break;
            }
            iters += 1;
            let jac = problem.jacobian(&q)?;
            let dx = solver.solve(&jac, &r, config.cg_tolerance)?;
            let (q_next, r_next) = line_search(&problem, &state.cavities, &q, &dx, r_norm)?;
            q = q_next;
            r = r_next;
            r_norm = norm(&r);
        }
        state.newton_iterations += iters;
        state.residual_norm = r_norm;
        if !state.converged {
            break;
        }
    }

    state.last_displacement = q.iter().zip(&start).map(|(a, b)| a - b).collect();
    state.mesh.set_positions(&q);
    Ok(())
}

/// Backtracking on the residual norm. Inverted trial states are rejected;
/// if no step length reduces the residual the smallest non-inverting step
/// is taken.
fn line_search(
    problem: &Problem<'_>,
    cavities: &[Cavity],
    q: &[Point3],
    dx: &[f64],
    r_norm: f64,
) -> Result<(Vec<Point3>, Vec<f64>), FemError> {
    let mut alpha = 1.0;
    let mut fallback = None;
    let mut last_err = None;
    for _ in 0..12 {
        let mut trial = q.to_vec();
        for (v, p) in trial.iter_mut().enumerate() {
            for a in 0..3 {
                if let Some(k) = problem.dof_map[3 * v + a] {
                    p[a] += alpha * dx[k];
                }
            }
        }
        match problem.residual(&trial, cavities) {
            Ok(r) => {
                if norm(&r) < r_norm {
                    return Ok((trial, r));
                }
                fallback = Some((trial, r));
            }
            Err(e) => last_err = Some(e),
        }
        alpha *= 0.5;
    }
    match (fallback, last_err) {
        (Some(best), _) => Ok(best),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("line search ran no trials"),
    }
}
