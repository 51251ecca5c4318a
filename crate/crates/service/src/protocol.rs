//! JSON messages exchanged with clients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tactwin_core::scene::Scene;
use tactwin_core::touch::{DetectionConfig, TouchEstimate};

/// Client to server. Every command gets exactly one [`Reply`] before the
/// next command from the same connection is read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    SetPressure {
        cavity: String,
        pa: f64,
    },
    /// Press at a surface point for `frames` frames. The point is
    /// re-projected onto the current surface by the server.
    ApplyTouch {
        point: [f64; 3],
        #[serde(default = "one")]
        strength: f64,
        #[serde(default = "default_touch_frames")]
        frames: u32,
        #[serde(default = "one")]
        sigma_scale: f64,
    },
    ClearTouches,
    SetConfig {
        #[serde(default)]
        detection: Option<DetectionConfig>,
        #[serde(default)]
        sensor: Option<SensorOverrides>,
    },
    Reset,
    PlaySchedule {
        name: String,
    },
}

fn one() -> f64 {
    1.0
}

fn default_touch_frames() -> u32 {
    30
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SetPressure { .. } => "set_pressure",
            Self::ApplyTouch { .. } => "apply_touch",
            Self::ClearTouches => "clear_touches",
            Self::SetConfig { .. } => "set_config",
            Self::Reset => "reset",
            Self::PlaySchedule { .. } => "play_schedule",
        }
    }
}

/// Sensor fields a client may change at run time; absent fields keep
/// their value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorOverrides {
    pub touch_amplitude: Option<f64>,
    pub sigma: Option<f64>,
    pub kernel: Option<String>,
    pub noise_std: Option<f64>,
    pub shift_gain: Option<f64>,
    pub shift_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Reply {
    Ack { cmd: String },
    Error { kind: ErrorKind, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// The message is not a well-formed command.
    Parse,
    /// The command does not fit the loaded scene.
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchMessage {
    pub gw2d: [f64; 2],
    pub gw3d: [f64; 3],
    pub peak: [usize; 2],
    pub peak_value: u32,
}

impl From<&TouchEstimate> for TouchMessage {
    fn from(t: &TouchEstimate) -> Self {
        Self {
            gw2d: t.g_w,
            gw3d: [t.g_hat_w.x, t.g_hat_w.y, t.g_hat_w.z],
            peak: [t.peak.0, t.peak.1],
            peak_value: t.peak_value,
        }
    }
}

/// One simulation frame. `vertices` follows the order of
/// [`SceneInfo::surface_vertices`]; `grid` and `activation` are row-major
/// with `null` for cells without a taxel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(rename = "type")]
    pub kind: String,
    pub frame: u64,
    pub vertices: Vec<[f64; 3]>,
    pub grid: Vec<Option<[f64; 3]>>,
    pub activation: Vec<Option<u32>>,
    pub touches: Vec<TouchMessage>,
    pub pressures: BTreeMap<String, f64>,
    pub volumes: BTreeMap<String, f64>,
    pub converged: bool,
}

/// Static topology sent once over HTTP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInfo {
    pub name: String,
    /// Mesh vertex ids of the boundary, in snapshot order.
    pub surface_vertices: Vec<usize>,
    /// Boundary triangles indexing into `surface_vertices`.
    pub triangles: Vec<[usize; 3]>,
    pub rows: usize,
    pub cols: usize,
    pub row_spacing_mm: f64,
    pub col_spacing_mm: f64,
    /// `(row, col)` of every valid taxel.
    pub taxels: Vec<[usize; 2]>,
    pub cavities: Vec<String>,
    pub schedules: Vec<String>,
    pub detection_threshold: u32,
}

impl SceneInfo {
    pub fn of(scene: &Scene) -> Self {
        let surface = &scene.surface;
        let mut local = vec![usize::MAX; scene.state.mesh.num_vertices()];
        for (k, &v) in surface.vertices.iter().enumerate() {
            local[v] = k;
        }
        Self {
            name: scene.config.name.clone(),
            surface_vertices: surface.vertices.clone(),
            triangles: surface.triangles.iter().map(|t| t.map(|v| local[v])).collect(),
            rows: scene.grid.rows,
            cols: scene.grid.cols,
            row_spacing_mm: scene.grid.row_spacing,
            col_spacing_mm: scene.grid.col_spacing,
            taxels: scene.grid.valid_cells().map(|(i, j)| [i, j]).collect(),
            cavities: scene.cavity_names(),
            schedules: scene.config.schedules.keys().cloned().collect(),
            detection_threshold: scene.config.detection.threshold,
        }
    }
}
