//! Baseline shift under actuation and its effect on detection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::probe::{sample_points, AlongNormal, Approach};
use super::BenchError;
use crate::scene::{PressureSchedule, Scene};
use crate::sensor::{synthesize_frame, TouchStimulus};
use crate::touch::detect_touches;
use crate::Point3;

/// Largest noise-free shift of every cell over one schedule playback.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShiftReport {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `None` for cells without a taxel.
    pub max_shift: Vec<Option<f64>>,
    pub global_max: f64,
    /// Average over valid taxels of their maxima.
    pub mean_of_maxima: f64,
    pub samples: usize,
}

/// Plays `schedule` from the scene's current state and restores it.
pub fn baseline_shift_report(scene: &mut Scene, schedule: &PressureSchedule) -> Result<ShiftReport, BenchError> {
    let maxima = scene.max_metric_over(schedule)?;
    let max_shift: Vec<Option<f64>> = (0..maxima.len())
        .map(|idx| scene.grid.valid_mask[idx].then(|| scene.sensor.shift(idx, maxima[idx])))
        .collect();
    let valid: Vec<f64> = max_shift.iter().flatten().copied().collect();
    Ok(ShiftReport {
        rows: scene.grid.rows,
        cols: scene.grid.cols,
        global_max: valid.iter().copied().fold(0.0, f64::max),
        mean_of_maxima: valid.iter().sum::<f64>() / valid.len() as f64,
        max_shift,
        samples: schedule.sample_times().len(),
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RobustnessConfig {
    /// Touch-free frames, cycling through the schedule samples.
    pub no_touch_frames: usize,
    /// Frames per quarter-offset touch point in each configuration.
    pub touch_repetitions: usize,
    pub strength: f64,
    pub offset_fraction: f64,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        Self {
            no_touch_frames: 10_000,
            touch_repetitions: 5,
            strength: 1.0,
            offset_fraction: 0.25,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RobustnessReport {
    pub no_touch_frames: usize,
    pub false_positive_frames: usize,
    pub false_positive_rate: f64,
    pub rest_touch_frames: usize,
    pub rest_detected: usize,
    /// Schedule time with the largest strain proxy anywhere on the grid.
    pub deformed_time_s: f64,
    pub deformed_touch_frames: usize,
    pub deformed_detected: usize,
}

struct Sample {
    time: f64,
    q: Vec<Point3>,
    positions: Vec<Option<Point3>>,
    metric: Vec<f64>,
}

impl Sample {
    fn of(scene: &Scene, time: f64) -> Self {
        Self {
            time,
            q: scene.state.positions().to_vec(),
            positions: scene.taxel_positions(),
            metric: scene.metric(),
        }
    }
}

/// Noisy frames with the calibrated shift model: touch-free frames over the
/// whole schedule, then touches at every quarter-offset point both in the
/// current configuration and at the most deformed schedule sample. The
/// scene state is restored afterwards.
pub fn robustness_scan(
    scene: &mut Scene,
    schedule: &PressureSchedule,
    config: &RobustnessConfig,
) -> Result<RobustnessReport, BenchError> {
    let rest = Sample::of(scene, 0.0);
    let saved = scene.state.clone();
    let mut samples = Vec::new();
    let played = scene.play(schedule, |s, t| samples.push(Sample::of(s, t)));
    scene.state = saved;
    played?;

    let model = &scene.sensor;
    let detection = &scene.config.detection;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut frame_id = 0u64;
    let mut false_positive_frames = 0;
    for k in 0..config.no_touch_frames {
        let s = &samples[k % samples.len()];
        let frame = synthesize_frame(&scene.grid, &s.positions, &[], &s.metric, model, &mut rng, frame_id)?;
        frame_id += 1;
        if !detect_touches(&frame, &scene.grid, &s.positions, detection)?.is_empty() {
            false_positive_frames += 1;
        }
    }

    let peak = |s: &Sample| s.metric.iter().copied().fold(0.0, f64::max);
    let deformed = samples
        .iter()
        .max_by(|a, b| peak(a).total_cmp(&peak(b)))
        .expect("schedule has at least one sample");
    let mut touch_run = |s: &Sample| -> Result<(usize, usize), BenchError> {
        let (mut frames, mut detected) = (0, 0);
        for point in sample_points(&scene.grid, &s.positions, config.offset_fraction) {
            let Some(contact) = AlongNormal.contact(&scene.surface, &s.q, &point.target, 0.0) else {
                continue;
            };
            let stimulus = TouchStimulus {
                strength: config.strength,
                ..TouchStimulus::at(contact)
            };
            for _ in 0..config.touch_repetitions {
                let frame = synthesize_frame(
                    &scene.grid,
                    &s.positions,
                    &[stimulus],
                    &s.metric,
                    model,
                    &mut rng,
                    frame_id,
                )?;
                frame_id += 1;
                frames += 1;
                if !detect_touches(&frame, &scene.grid, &s.positions, detection)?.is_empty() {
                    detected += 1;
                }
            }
        }
        Ok((frames, detected))
    };
    let (rest_touch_frames, rest_detected) = touch_run(&rest)?;
    let (deformed_touch_frames, deformed_detected) = touch_run(deformed)?;

    Ok(RobustnessReport {
        no_touch_frames: config.no_touch_frames,
        false_positive_frames,
        false_positive_rate: false_positive_frames as f64 / config.no_touch_frames.max(1) as f64,
        rest_touch_frames,
        rest_detected,
        deformed_time_s: deformed.time,
        deformed_touch_frames,
        deformed_detected,
    })
}
