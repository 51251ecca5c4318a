//! A flat 4×4 pad wrapped over a cylinder: the strain of the bend shifts
//! the baseline but must never be mistaken for a touch.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::BenchError;
use crate::mesh::HalfSpace;
use crate::scene::{GridSpec, MeshSource, NodeSelection, Scene, SceneConfig};
use crate::sensor::{metric_between, synthesize_frame, SensorModel, TouchStimulus};
use crate::touch::detect_touches;
use crate::Point3;

/// Radius that folds the 48 mm span between the outer taxel columns into
/// a half circle.
pub const PAD_BEND_RADIUS_MM: f64 = 48.0 / PI;

const PAD_SIZE: f64 = 80.0;
const PAD_THICKNESS: f64 = 3.0;
const BEND_HALF_SPAN: f64 = 24.0;
const SHIFT_CAP: f64 = 10.0;

/// 80×80×3 mm pad with 4×4 taxels at 16 mm pitch on its top face.
pub fn pad_scene() -> Result<Scene, BenchError> {
    let config = SceneConfig {
        name: "pad-4x4".into(),
        mesh: MeshSource::Box {
            size_mm: [PAD_SIZE, PAD_SIZE, PAD_THICKNESS],
            cells: [10, 10, 1],
        },
        material: Default::default(),
        gravity_mm_s2: [0.0; 3],
        fixed: NodeSelection::Box {
            min_mm: [-1.0, -1.0, -1.0],
            max_mm: [PAD_SIZE + 1.0, PAD_SIZE + 1.0, 0.0],
        },
        springs: Vec::new(),
        tip: None,
        schedules: Default::default(),
        solver: Default::default(),
        grid: GridSpec {
            rows: 4,
            cols: 4,
            row_normal: [0.0, 1.0, 0.0],
            row_start_mm: 16.0,
            row_spacing_mm: 16.0,
            col_normal: [1.0, 0.0, 0.0],
            col_start_mm: 16.0,
            col_spacing_mm: 16.0,
            side: HalfSpace::above_z(0.5 * PAD_THICKNESS),
        },
        sensor: SensorModel {
            sigma: 8.0,
            shift_cap: SHIFT_CAP,
            rng_seed: 48,
            ..Default::default()
        },
        shift_calibration: None,
        detection: Default::default(),
    };
    Ok(Scene::build(config, None)?)
}

/// Wraps a rest-frame point of the pad around a cylinder along `y`: the
/// top face keeps its length, `|x − 40| ≤ 24` follows an arc of radius
/// [`PAD_BEND_RADIUS_MM`] and the rest continues along the tangents.
pub fn bend_pad(p: &Point3) -> Point3 {
    let centre_x = 0.5 * PAD_SIZE;
    let s = p.x - centre_x;
    let h = p.z - PAD_THICKNESS;
    let r = PAD_BEND_RADIUS_MM;
    let s_arc = s.clamp(-BEND_HALF_SPAN, BEND_HALF_SPAN);
    let theta = s_arc / r;
    let (sin, cos) = theta.sin_cos();
    let along = s - s_arc;
    Point3::new(
        centre_x + (r + h) * sin + along * cos,
        p.y,
        PAD_THICKNESS - r + (r + h) * cos - along * sin,
    )
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PadReport {
    pub max_metric: f64,
    pub shift_gain: f64,
    pub max_shift: f64,
    pub noise_frames: usize,
    pub false_positive_frames: usize,
    pub touch_frames: usize,
    pub touch_detected: usize,
    pub contact: [f64; 3],
    /// Largest distance from the strongest estimate to the contact.
    pub max_error_mm: f64,
}

/// Bends the pad, calibrates the shift gain so the largest taxel shift is
/// the cap, then runs `noise_frames` untouched and `touch_frames` touched
/// noisy frames.
pub fn run_pad_scenario(noise_frames: usize, touch_frames: usize, seed: u64) -> Result<PadReport, BenchError> {
    let scene = pad_scene()?;
    let mesh = &scene.state.mesh;
    let q: Vec<Point3> = mesh.rest_positions().iter().map(bend_pad).collect();
    let positions = scene.grid.positions_in(mesh, &q);
    let metric = metric_between(&scene.grid, &scene.grid.rest_positions(mesh), &positions);
    let max_metric = metric.iter().copied().fold(0.0, f64::max);
    let model = SensorModel {
        shift_gain: SHIFT_CAP / max_metric,
        ..scene.sensor.clone()
    };
    let max_shift = (0..metric.len()).map(|k| model.shift(k, metric[k])).fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let detection = &scene.config.detection;
    let mut false_positive_frames = 0;
    for k in 0..noise_frames {
        let frame = synthesize_frame(&scene.grid, &positions, &[], &metric, &model, &mut rng, k as u64)?;
        if !detect_touches(&frame, &scene.grid, &positions, detection)?.is_empty() {
            false_positive_frames += 1;
        }
    }

    let contact = bend_pad(&Point3::new(44.0, 36.0, PAD_THICKNESS));
    let mut touch_detected = 0;
    let mut max_error_mm: f64 = 0.0;
    for k in 0..touch_frames {
        let id = (noise_frames + k) as u64;
        let frame = synthesize_frame(
            &scene.grid,
            &positions,
            &[TouchStimulus::at(contact)],
            &metric,
            &model,
            &mut rng,
            id,
        )?;
        if let Some(t) = detect_touches(&frame, &scene.grid, &positions, detection)?.first() {
            touch_detected += 1;
            max_error_mm = max_error_mm.max((t.g_hat_w - contact).norm());
        }
    }

    Ok(PadReport {
        max_metric,
        shift_gain: model.shift_gain,
        max_shift,
        noise_frames,
        false_positive_frames,
        touch_frames,
        touch_detected,
        contact: [contact.x, contact.y, contact.z],
        max_error_mm,
    })
}
