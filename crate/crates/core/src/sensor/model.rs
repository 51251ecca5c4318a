//! Forward model from touches and body deformation to CDC counts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::kernel::{self, ResponseKernel};
use super::{ActivationMap, SensorError, TaxelGrid};
use crate::mesh::TetMesh;
use crate::Point3;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SensorModel {
    /// Peak response of a full-strength touch centred on a taxel (CDC).
    pub touch_amplitude: f64,
    /// Kernel width (mm).
    pub sigma: f64,
    /// Registry name of the spatial response kernel.
    pub kernel: String,
    /// Standard deviation of per-taxel read noise (CDC).
    pub noise_std: f64,
    /// Baseline shift per unit of strain proxy (CDC).
    pub shift_gain: f64,
    /// Upper bound on the deformation-induced shift (CDC).
    pub shift_cap: f64,
    /// Optional per-taxel multiplier on `shift_gain`, row-major over all
    /// cells.
    pub per_taxel_gain: Option<Vec<f64>>,
    /// Constant offset added before rounding (CDC). Zero for
    /// baseline-subtracted output; positive to emulate raw readings.
    pub baseline: f64,
    pub threshold: f64,
    pub rng_seed: u64,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            touch_amplitude: 100.0,
            sigma: 8.0,
            kernel: "gaussian".into(),
            noise_std: 1.9,
            shift_gain: 0.0,
            shift_cap: 16.0,
            per_taxel_gain: None,
            baseline: 0.0,
            threshold: 20.0,
            rng_seed: 0,
        }
    }
}

impl SensorModel {
    /// Defaults with `σ` at half the smallest taxel spacing.
    pub fn for_grid(grid: &TaxelGrid) -> Self {
        Self {
            sigma: 0.5 * grid.min_spacing(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let bad = |m: &str| Err(SensorError::InvalidModel(m.to_owned()));
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.noise_std >= 0.0) {
            return bad("noise_std must be non-negative");
        }
        if !(self.touch_amplitude >= 0.0 && self.shift_gain >= 0.0 && self.shift_cap >= 0.0) {
            return bad("amplitude, gain and cap must be non-negative");
        }
        if !kernel::builtin().contains(&self.kernel) {
            return bad(&format!("unknown kernel `{}`", self.kernel));
        }
        Ok(())
    }

    /// Deformation alone cannot reach the detection threshold without noise.
    pub fn rejects_deformation(&self) -> bool {
        self.threshold > self.shift_cap
    }

    fn gain_at(&self, idx: usize) -> f64 {
        self.shift_gain * self.per_taxel_gain.as_ref().map_or(1.0, |g| g[idx])
    }

    /// Deformation-induced baseline shift of one cell.
    pub fn shift(&self, idx: usize, metric: f64) -> f64 {
        (self.gain_at(idx) * metric).min(self.shift_cap)
    }
}

/// A grounded conductor touching the surface.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TouchStimulus {
    pub contact_point: Point3,
    /// Fraction of the touch amplitude, in `[0, 1]`.
    pub strength: f64,
    /// Multiplier on the model's kernel width (larger indenters spread
    /// further).
    #[serde(default = "one")]
    pub sigma_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl TouchStimulus {
    pub fn at(contact_point: Point3) -> Self {
        Self {
            contact_point,
            strength: 1.0,
            sigma_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(SensorError::InvalidStimulus(format!(
                "strength {} outside [0, 1]",
                self.strength
            )));
        }
        if !(self.sigma_scale > 0.0) || !self.contact_point.iter().all(|c| c.is_finite()) {
            return Err(SensorError::InvalidStimulus("bad contact point or width".into()));
        }
        Ok(())
    }
}

/// Noise-free analog value (before rounding and clamping) of every cell.
pub fn expected_values(
    positions: &[Option<Point3>],
    stimuli: &[TouchStimulus],
    metric: &[f64],
    model: &SensorModel,
    kernel: &dyn ResponseKernel,
) -> Vec<Option<f64>> {
    positions
        .iter()
        .enumerate()
        .map(|(idx, p)| {
            p.map(|g| {
                let touch: f64 = stimuli
                    .iter()
                    .map(|s| {
                        let d = (s.contact_point - g).norm();
                        s.strength * model.touch_amplitude * kernel.response(d, model.sigma * s.sigma_scale)
                    })
                    .sum();
                model.baseline + touch + model.shift(idx, metric[idx])
            })
        })
        .collect()
}

/// One activation frame:
/// `v = max(0, round(Σ strength·A·k(d) + shift + ε))` per valid taxel, with
/// `d` the 3D distance from the contact point to the taxel's current
/// position and `ε ~ N(0, noise_std)` drawn from `rng` in row-major order.
pub fn synthesize_frame(
    grid: &TaxelGrid,
    positions: &[Option<Point3>],
    stimuli: &[TouchStimulus],
    metric: &[f64],
    model: &SensorModel,
    rng: &mut ChaCha8Rng,
    frame_id: u64,
) -> Result<ActivationMap, SensorError> {
    model.validate()?;
    for s in stimuli {
        s.validate()?;
    }
    let cells = grid.rows * grid.cols;
    if positions.len() != cells || metric.len() != cells {
        return Err(SensorError::DimensionMismatch {
            expected: cells,
            found: positions.len().min(metric.len()),
        });
    }
    let kernel = kernel::builtin().create(&model.kernel)?;
    let noise = Normal::new(0.0, model.noise_std).map_err(|e| SensorError::InvalidModel(e.to_string()))?;
    let analog = expected_values(positions, stimuli, metric, model, kernel.as_ref());
    let values = analog
        .into_iter()
        .map(|v| {
            v.map(|x| {
                let eps = if model.noise_std > 0.0 { noise.sample(rng) } else { 0.0 };
                (x + eps).round().max(0.0) as u32
            })
        })
        .collect();
    Ok(ActivationMap {
        rows: grid.rows,
        cols: grid.cols,
        values,
        frame_id,
    })
}

/// Seeded frame source with a monotone frame counter.
#[derive(Debug, Clone)]
pub struct FrameStream {
    pub model: SensorModel,
    rng: ChaCha8Rng,
    next_frame: u64,
}

impl FrameStream {
    pub fn new(model: SensorModel) -> Self {
        use rand::SeedableRng;
        let rng = ChaCha8Rng::seed_from_u64(model.rng_seed);
        Self {
            model,
            rng,
            next_frame: 0,
        }
    }

    pub fn next_frame(
        &mut self,
        grid: &TaxelGrid,
        positions: &[Option<Point3>],
        stimuli: &[TouchStimulus],
        metric: &[f64],
    ) -> Result<ActivationMap, SensorError> {
        let id = self.next_frame;
        let frame = synthesize_frame(grid, positions, stimuli, metric, &self.model, &mut self.rng, id)?;
        self.next_frame += 1;
        Ok(frame)
    }

    pub fn frames_emitted(&self) -> u64 {
        self.next_frame
    }

    /// Draws one uniform number; lets callers decorrelate streams.
    pub fn jitter(&mut self) -> f64 {
        self.rng.random()
    }
}

/// Strain proxy per cell: `|Σ d_now / Σ d_rest − 1|` over the distances from
/// a taxel to its valid 4-neighbours. Zero for invalid or isolated taxels.
pub fn deformation_metric(grid: &TaxelGrid, mesh: &TetMesh) -> Vec<f64> {
    metric_between(grid, &grid.rest_positions(mesh), &grid.positions(mesh))
}

pub fn metric_between(grid: &TaxelGrid, rest: &[Option<Point3>], now: &[Option<Point3>]) -> Vec<f64> {
    let mut out = vec![0.0; grid.rows * grid.cols];
    for (i, j) in grid.valid_cells() {
        let idx = grid.index(i, j);
        let (mut d_rest, mut d_now) = (0.0, 0.0);
        for (a, b) in grid.line_neighbors(i, j) {
            let n = grid.index(a, b);
            d_rest += (rest[n].expect("valid") - rest[idx].expect("valid")).norm();
            d_now += (now[n].expect("valid") - now[idx].expect("valid")).norm();
        }
        if d_rest > 0.0 {
            out[idx] = (d_now / d_rest - 1.0).abs();
        }
    }
    out
}

/// Per-taxel mean and standard deviation of a stream of recorded frames.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BaselineReport {
    pub mean: Vec<Option<f64>>,
    pub std: Vec<Option<f64>>,
    pub frames: usize,
}

impl BaselineReport {
    pub fn max_std(&self) -> f64 {
        self.std.iter().flatten().fold(0.0, |m: f64, s| m.max(*s))
    }

    /// `max(0, v − C0)` per taxel, rounded.
    pub fn subtract(&self, frame: &ActivationMap) -> ActivationMap {
        let values = frame
            .values
            .iter()
            .zip(&self.mean)
            .map(|(v, m)| match (v, m) {
                (Some(v), Some(m)) => Some((*v as f64 - m).round().max(0.0) as u32),
                _ => None,
            })
            .collect();
        ActivationMap {
            values,
            ..frame.clone()
        }
    }
}

/// Population mean and standard deviation per taxel.
pub fn calibrate_baseline(frames: &[ActivationMap]) -> Result<BaselineReport, SensorError> {
    if frames.len() < 2 {
        return Err(SensorError::InsufficientFrames(frames.len()));
    }
    let cells = frames[0].values.len();
    if let Some(f) = frames.iter().find(|f| f.values.len() != cells) {
        return Err(SensorError::DimensionMismatch {
            expected: cells,
            found: f.values.len(),
        });
    }
    let n = frames.len() as f64;
    let mut mean = vec![None; cells];
    let mut std = vec![None; cells];
    for k in 0..cells {
        if frames[0].values[k].is_none() {
            continue;
        }
        let samples: Vec<f64> = frames.iter().map(|f| f.values[k].map_or(0.0, f64::from)).collect();
        let m = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        mean[k] = Some(m);
        std[k] = Some(var.sqrt());
    }
    Ok(BaselineReport {
        mean,
        std,
        frames: frames.len(),
    })
}

/// Chooses `shift_gain` so that the grid average of `min(gain·m, cap)`
/// equals `target_mean`, where `m` is each taxel's largest strain proxy
/// over a deformation sequence. Returns `None` when the target is
/// unreachable (all maxima zero, or target ≥ cap).
pub fn calibrate_shift_gain(max_metric: &[f64], target_mean: f64, cap: f64) -> Option<f64> {
    let mean_at = |g: f64| max_metric.iter().map(|m| (g * m).min(cap)).sum::<f64>() / max_metric.len() as f64;
    if max_metric.is_empty() || target_mean <= 0.0 || target_mean >= cap {
        return None;
    }
    let mut hi = 1.0;
    while mean_at(hi) < target_mean {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
