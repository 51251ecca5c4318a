//! Scene files and their runtime counterpart.
//!
//! A scene bundles geometry, material, boundary conditions, pressure
//! schedules, taxel-grid placement and sensor settings. Files are JSON with
//! units spelled out in the field names (`young_modulus_pa`,
//! `row_spacing_mm`, …).

mod schedule;
pub mod shapes;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

pub use schedule::{Keyframe, PressureSchedule};

use crate::fem::{
    solve_equilibrium, BoundaryConditions, Cavity, FemError, MaterialParams, SimState, SolverConfig, Spring,
};
use crate::mesh::{extract_surface, load_mesh, place_grid, GridLayout, HalfSpace, MeshError, MeshFile, SurfaceMesh};
use crate::sensor::{calibrate_shift_gain, metric_between, GridError, SensorError, SensorModel, TaxelGrid};
use crate::touch::DetectionConfig;
use crate::{Point3, Vec3};

const DEMO_SCENE: &str = include_str!("../../scenes/fruit.json");

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("reading scene: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing scene: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error("unknown schedule `{0}`")]
    UnknownSchedule(String),
    #[error("equilibrium did not converge (residual {residual:.3e} N)")]
    NotConverged { residual: f64 },
    #[error("invalid scene: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeshSource {
    /// Procedural fruit-like stand-in body.
    Fruit(shapes::FruitParams),
    /// Axis-aligned box `[0, size]` split into `cells`.
    Box { size_mm: [f64; 3], cells: [usize; 3] },
    /// Centred cube with a cubic cavity `c1`.
    CubeWithCavity {
        size_mm: f64,
        cells: usize,
        hole_cells: usize,
    },
    /// `softmesh` or Gmsh v2 file, relative to the scene file.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "select", rename_all = "snake_case")]
pub enum NodeSelection {
    #[default]
    None,
    Nodes {
        nodes: Vec<usize>,
    },
    /// Vertices whose rest position lies in the closed box.
    Box {
        min_mm: [f64; 3],
        max_mm: [f64; 3],
    },
}

impl NodeSelection {
    pub fn resolve(&self, rest: &[Point3]) -> Result<Vec<usize>, SceneError> {
        match self {
            Self::None => Ok(Vec::new()),
            Self::Nodes { nodes } => {
                if let Some(n) = nodes.iter().find(|&&n| n >= rest.len()) {
                    return Err(SceneError::Invalid(format!("node {n} out of range")));
                }
                Ok(nodes.clone())
            }
            Self::Box { min_mm, max_mm } => Ok(rest
                .iter()
                .enumerate()
                .filter(|(_, p)| (0..3).all(|a| p[a] >= min_mm[a] && p[a] <= max_mm[a]))
                .map(|(i, _)| i)
                .collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaterialSpec {
    pub young_modulus_pa: f64,
    pub poisson_ratio: f64,
    pub density_kg_m3: f64,
}

impl Default for MaterialSpec {
    fn default() -> Self {
        let m = MaterialParams::ecoflex_00_50();
        Self {
            young_modulus_pa: m.young_modulus * 1e6,
            poisson_ratio: m.poisson_ratio,
            density_kg_m3: m.density,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SpringSpec {
    pub node: usize,
    pub anchor_mm: [f64; 3],
    pub stiffness_n_per_mm: f64,
}

/// Springs that drag a set of tip nodes to their rest positions rotated
/// about `axis` through `pivot_mm`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TipSpec {
    pub nodes: NodeSelection,
    pub axis: [f64; 3],
    pub pivot_mm: [f64; 3],
    pub angle_deg: f64,
    pub stiffness_n_per_mm: f64,
    #[serde(default = "default_ramp")]
    pub ramp_steps: usize,
}

fn default_ramp() -> usize {
    6
}

/// Taxel placement from two families of planes (see [`GridLayout`]).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub row_normal: [f64; 3],
    pub row_start_mm: f64,
    pub row_spacing_mm: f64,
    pub col_normal: [f64; 3],
    pub col_start_mm: f64,
    pub col_spacing_mm: f64,
    /// Only surface hits in this half-space count; the one furthest along
    /// its normal wins.
    pub side: HalfSpace,
}

/// Picks `shift_gain` so the grid average of per-taxel maximal shifts over
/// `schedule` equals `target_mean_cdc`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShiftCalibration {
    pub schedule: String,
    pub target_mean_cdc: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SceneConfig {
    pub name: String,
    pub mesh: MeshSource,
    #[serde(default)]
    pub material: MaterialSpec,
    #[serde(default)]
    pub gravity_mm_s2: [f64; 3],
    #[serde(default)]
    pub fixed: NodeSelection,
    #[serde(default)]
    pub springs: Vec<SpringSpec>,
    #[serde(default)]
    pub tip: Option<TipSpec>,
    #[serde(default)]
    pub schedules: BTreeMap<String, PressureSchedule>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub grid: GridSpec,
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default)]
    pub shift_calibration: Option<ShiftCalibration>,
    #[serde(default)]
    pub detection: DetectionConfig,
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn demo() -> Self {
        Self::from_json(DEMO_SCENE).expect("bundled demo scene parses")
    }
}

/// Everything needed to run one simulated body with its sensor.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub material: MaterialParams,
    pub bcs: BoundaryConditions,
    pub state: SimState,
    pub surface: SurfaceMesh,
    pub layout: GridLayout,
    pub grid: TaxelGrid,
    pub sensor: SensorModel,
    pub tip_nodes: Vec<usize>,
}

impl Scene {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneError> {
        let path = path.as_ref();
        let config = SceneConfig::from_json(&std::fs::read_to_string(path)?)?;
        Self::build(config, path.parent())
    }

    /// The bundled fruit stand-in.
    pub fn demo() -> Result<Self, SceneError> {
        Self::build(SceneConfig::demo(), None)
    }

    /// Builds the mesh, solves the initial equilibrium, places and anchors
    /// the grid at rest and, if requested, calibrates the shift gain.
    pub fn build(config: SceneConfig, base_dir: Option<&Path>) -> Result<Self, SceneError> {
        let file = match &config.mesh {
            MeshSource::Fruit(p) => shapes::fruit(p),
            MeshSource::Box { size_mm, cells } => MeshFile {
                mesh: shapes::box_mesh(*size_mm, *cells),
                cavities: Vec::new(),
                fixed: Vec::new(),
            },
            MeshSource::CubeWithCavity {
                size_mm,
                cells,
                hole_cells,
            } => {
                if hole_cells >= cells || (cells - hole_cells) % 2 != 0 {
                    return Err(SceneError::Invalid("cavity must be centred in the cube".into()));
                }
                shapes::cube_with_cavity(*size_mm, *cells, *hole_cells)
            }
            MeshSource::File { path } => load_mesh(base_dir.map_or(path.clone(), |d| d.join(path)))?,
        };
        let m = &config.material;
        let material = MaterialParams::from_pascals(m.young_modulus_pa, m.poisson_ratio, m.density_kg_m3)?;
        let rest = file.mesh.rest_positions().to_vec();

        let mut fixed: BTreeSet<usize> = file.fixed.iter().copied().collect();
        fixed.extend(config.fixed.resolve(&rest)?);
        let springs = config
            .springs
            .iter()
            .map(|s| Spring {
                node: s.node,
                anchor: Vec3::from(s.anchor_mm),
                stiffness: s.stiffness_n_per_mm,
            })
            .collect();
        let bcs = BoundaryConditions {
            fixed_nodes: fixed,
            springs,
            gravity: Vec3::from(config.gravity_mm_s2),
            point_loads: Vec::new(),
        };
        bcs.validate(rest.len())?;

        let cavities = file
            .cavities
            .iter()
            .map(|(name, tris)| Cavity::new(name.clone(), tris.clone(), &rest))
            .collect::<Result<Vec<_>, _>>()?;
        let names: Vec<&str> = cavities.iter().map(|c| c.name.as_str()).collect();
        for (name, s) in &config.schedules {
            s.validate(&names)
                .map_err(|e| SceneError::Invalid(format!("schedule `{name}`: {e}")))?;
        }
        if let Some(c) = &config.shift_calibration {
            if !config.schedules.contains_key(&c.schedule) {
                return Err(SceneError::UnknownSchedule(c.schedule.clone()));
            }
        }
        let tip_nodes = match &config.tip {
            Some(t) => t.nodes.resolve(&rest)?,
            None => Vec::new(),
        };
        config.sensor.validate()?;
        config
            .detection
            .validate()
            .map_err(|e| SceneError::Invalid(e.to_string()))?;

        let surface = extract_surface(&file.mesh);
        let g = &config.grid;
        let mut layout = GridLayout::uniform(
            Vec3::from(g.row_normal),
            g.row_start_mm,
            g.row_spacing_mm,
            g.rows,
            Vec3::from(g.col_normal),
            g.col_start_mm,
            g.col_spacing_mm,
            g.cols,
        )?;
        let points = place_grid(&surface, &mut layout, &g.side, &rest)?;
        let grid = TaxelGrid::from_placement(&layout, &points, &file.mesh)?;

        let mut scene = Self {
            sensor: config.sensor.clone(),
            material,
            bcs,
            state: SimState::new(file.mesh, cavities)?,
            surface,
            layout,
            grid,
            tip_nodes,
            config,
        };
        scene.solve()?;
        if let Some(c) = scene.config.shift_calibration.clone() {
            let maxima = scene.schedule_max_metric(&c.schedule)?;
            let valid: Vec<f64> = scene
                .grid
                .valid_cells()
                .map(|(i, j)| maxima[scene.grid.index(i, j)])
                .collect();
            scene.sensor.shift_gain = calibrate_shift_gain(&valid, c.target_mean_cdc, scene.sensor.shift_cap)
                .ok_or_else(|| SceneError::Invalid("shift calibration target is unreachable".into()))?;
        }
        Ok(scene)
    }

    /// Solves for equilibrium at the current pressure targets.
    pub fn solve(&mut self) -> Result<(), SceneError> {
        let config = self.config.solver.clone();
        self.solve_with(&config)
    }

    pub fn solve_with(&mut self, config: &SolverConfig) -> Result<(), SceneError> {
        solve_equilibrium(&mut self.state, &self.material, &self.bcs, config)?;
        if !self.state.converged {
            return Err(SceneError::NotConverged {
                residual: self.state.residual_norm,
            });
        }
        Ok(())
    }

    pub fn cavity_names(&self) -> Vec<String> {
        self.state.cavities.iter().map(|c| c.name.clone()).collect()
    }

    pub fn schedule(&self, name: &str) -> Result<&PressureSchedule, SceneError> {
        self.config
            .schedules
            .get(name)
            .ok_or_else(|| SceneError::UnknownSchedule(name.to_owned()))
    }

    /// Current 3D taxel positions, row-major.
    pub fn taxel_positions(&self) -> Vec<Option<Point3>> {
        self.grid.positions(&self.state.mesh)
    }

    /// Strain proxy per cell in the current configuration.
    pub fn metric(&self) -> Vec<f64> {
        metric_between(
            &self.grid,
            &self.grid.rest_positions(&self.state.mesh),
            &self.taxel_positions(),
        )
    }

    /// Rest positions, zero pressures, springs from the scene file only.
    pub fn reset(&mut self) {
        self.state.reset();
        let springs = self
            .config
            .springs
            .iter()
            .map(|s| Spring {
                node: s.node,
                anchor: Vec3::from(s.anchor_mm),
                stiffness: s.stiffness_n_per_mm,
            })
            .collect();
        self.bcs.springs = springs;
    }

    /// Plays the scene's schedule `name`; see [`Scene::play`].
    pub fn play_schedule(&mut self, name: &str, visit: impl FnMut(&Scene, f64)) -> Result<(), SceneError> {
        let schedule = self.schedule(name)?.clone();
        self.play(&schedule, visit)
    }

    /// Plays `schedule` from the current state, calling `visit` after each
    /// sample is solved. Consecutive samples are the load ramp, so each is
    /// solved in a single load step. Pressures are left at the final
    /// sample.
    pub fn play(&mut self, schedule: &PressureSchedule, mut visit: impl FnMut(&Scene, f64)) -> Result<(), SceneError> {
        let names = self.cavity_names();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        schedule.validate(&names).map_err(SceneError::Invalid)?;
        let config = SolverConfig {
            load_steps: 1,
            ..self.config.solver.clone()
        };
        for t in schedule.sample_times() {
            for (cavity, pa) in schedule.pressures_at(t) {
                self.state.set_pressure(&cavity, pa)?;
            }
            self.solve_with(&config)?;
            visit(self, t);
        }
        Ok(())
    }

    /// Largest strain proxy per cell over the schedule `name`, starting
    /// from and returning to the current state.
    pub fn schedule_max_metric(&mut self, name: &str) -> Result<Vec<f64>, SceneError> {
        let schedule = self.schedule(name)?.clone();
        self.max_metric_over(&schedule)
    }

    pub fn max_metric_over(&mut self, schedule: &PressureSchedule) -> Result<Vec<f64>, SceneError> {
        let saved = self.state.clone();
        let mut maxima = vec![0.0; self.grid.rows * self.grid.cols];
        let result = self.play(schedule, |scene, _| {
            for (m, x) in maxima.iter_mut().zip(scene.metric()) {
                *m = f64::max(*m, x);
            }
        });
        self.state = saved;
        result.map(|_| maxima)
    }
}
