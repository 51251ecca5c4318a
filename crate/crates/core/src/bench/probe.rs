//! Virtual indenter probing of a solved scene.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::stats::{summarize, PointError};
use super::{BenchError, EvalReport};
use crate::mesh::SurfaceMesh;
use crate::registry::Registry;
use crate::scene::Scene;
use crate::sensor::{synthesize_frame, SensorModel, TaxelGrid, TouchStimulus};
use crate::touch::detect_touches;
use crate::{Point3, Vec3};

/// Probe tip: its size for contact search and its sensor footprint.
pub trait Indenter: Send + Sync {
    fn name(&self) -> &'static str;
    /// Radius of the spherical tip (mm).
    fn tip_radius(&self) -> f64;
    /// Stimulus produced by full contact at `contact`.
    fn stimulus(&self, contact: Point3) -> TouchStimulus;
}

#[derive(Debug, Clone, Copy)]
pub struct SphericalIndenter {
    pub name: &'static str,
    pub radius: f64,
    pub strength: f64,
    pub sigma_scale: f64,
}

impl Indenter for SphericalIndenter {
    fn name(&self) -> &'static str {
        self.name
    }

    fn tip_radius(&self) -> f64 {
        self.radius
    }

    fn stimulus(&self, contact: Point3) -> TouchStimulus {
        TouchStimulus {
            contact_point: contact,
            strength: self.strength,
            sigma_scale: self.sigma_scale,
        }
    }
}

pub const SMALL: SphericalIndenter = SphericalIndenter {
    name: "small",
    radius: 2.5,
    strength: 1.0,
    sigma_scale: 1.0,
};

pub const MEDIUM: SphericalIndenter = SphericalIndenter {
    name: "medium",
    radius: 5.0,
    strength: 1.0,
    sigma_scale: 1.4,
};

pub fn indenters() -> Registry<dyn Indenter> {
    let mut reg: Registry<dyn Indenter> = Registry::new("indenter");
    reg.register("small", || Box::new(SMALL));
    reg.register("medium", || Box::new(MEDIUM));
    reg
}

/// How the tip is brought onto the surface near a target point.
pub trait Approach: Send + Sync {
    fn name(&self) -> &'static str;
    /// First surface point touched by a sphere of `radius` aimed at
    /// `target`, or `None` if it never touches.
    fn contact(&self, surface: &SurfaceMesh, q: &[Point3], target: &Point3, radius: f64) -> Option<Point3>;
}

/// Lowers the tip along `direction` on the line through the target.
#[derive(Debug, Clone, Copy)]
pub struct FromAbove {
    pub direction: Vec3,
}

impl Default for FromAbove {
    fn default() -> Self {
        Self { direction: -Vec3::z() }
    }
}

impl Approach for FromAbove {
    fn name(&self) -> &'static str {
        "from-above"
    }

    fn contact(&self, surface: &SurfaceMesh, q: &[Point3], target: &Point3, radius: f64) -> Option<Point3> {
        let d = self.direction.try_normalize(1e-12)?;
        // Heights above the target along -d spanned by the body.
        let heights = q.iter().map(|p| (target - p).dot(&d));
        let (low, high) = heights.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| {
            (lo.min(-h), hi.max(-h))
        });
        let centre = |s: f64| target - d * s;
        let touching = |s: f64| surface.distance(&centre(s), q) <= radius;
        let step = 0.5 * radius;
        let mut s = high + 2.0 * radius;
        let bottom = low - 2.0 * radius;
        while s > bottom {
            let next = s - step;
            if touching(next) {
                let (mut free, mut hit) = (s, next);
                for _ in 0..50 {
                    let mid = 0.5 * (free + hit);
                    if touching(mid) {
                        hit = mid;
                    } else {
                        free = mid;
                    }
                }
                return surface.closest_point(&centre(hit), q).map(|(p, _)| p);
            }
            s = next;
        }
        None
    }
}

/// Approaches along the local surface normal: the contact is the surface
/// point closest to the target.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlongNormal;

impl Approach for AlongNormal {
    fn name(&self) -> &'static str {
        "normal"
    }

    fn contact(&self, surface: &SurfaceMesh, q: &[Point3], target: &Point3, _radius: f64) -> Option<Point3> {
        surface.closest_point(target, q).map(|(p, _)| p)
    }
}

pub fn approaches() -> Registry<dyn Approach> {
    let mut reg: Registry<dyn Approach> = Registry::new("approach");
    reg.register("from-above", || Box::new(FromAbove::default()));
    reg.register("normal", || Box::new(AlongNormal));
    reg
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ProbeProtocol {
    pub indenter: String,
    pub approach: String,
    /// Offset from each taxel towards its next row and column neighbour, as
    /// a fraction of the spacing.
    pub offset_fraction: f64,
    /// Frames synthesized per sample point.
    pub repetitions: usize,
    pub seed: u64,
    /// Overrides the scene's read noise when set.
    pub noise_std: Option<f64>,
}

impl Default for ProbeProtocol {
    fn default() -> Self {
        Self {
            indenter: "small".into(),
            approach: "from-above".into(),
            offset_fraction: 0.25,
            repetitions: 1,
            seed: 1,
            noise_std: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub label: (usize, usize),
    pub target: Point3,
}

/// One target per valid taxel, shifted by `fraction` of the way to the
/// next taxel along the row and along the column (towards the previous one,
/// mirrored, at the grid's far edges).
pub fn sample_points(grid: &TaxelGrid, positions: &[Option<Point3>], fraction: f64) -> Vec<SamplePoint> {
    let at = |i: isize, j: isize| -> Option<Point3> {
        (i >= 0 && j >= 0)
            .then(|| {
                grid.is_valid(i as usize, j as usize)
                    .then(|| positions[grid.index(i as usize, j as usize)])
            })
            .flatten()
            .flatten()
    };
    grid.valid_cells()
        .map(|(i, j)| {
            let p = positions[grid.index(i, j)].expect("valid cell has a position");
            let (ii, jj) = (i as isize, j as isize);
            let mut offset = Vec3::zeros();
            for (fwd, back) in [((ii, jj + 1), (ii, jj - 1)), ((ii + 1, jj), (ii - 1, jj))] {
                if let Some(n) = at(fwd.0, fwd.1) {
                    offset += (n - p) * fraction;
                } else if let Some(n) = at(back.0, back.1) {
                    offset += (n - p) * fraction;
                }
            }
            SamplePoint {
                label: (i, j),
                target: p + offset,
            }
        })
        .collect()
}

/// Probes every sample point of the scene in its current configuration:
/// contact search, one synthesized frame per repetition, detection, and
/// the distance from the strongest estimate `ĝ_w` to the contact point.
pub fn run_probe_experiment(scene: &Scene, protocol: &ProbeProtocol) -> Result<EvalReport, BenchError> {
    let indenter = indenters().create(&protocol.indenter)?;
    let approach = approaches().create(&protocol.approach)?;
    let q = scene.state.positions();
    let positions = scene.taxel_positions();
    let metric = scene.metric();
    let model = SensorModel {
        noise_std: protocol.noise_std.unwrap_or(scene.sensor.noise_std),
        ..scene.sensor.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(protocol.seed);
    let mut points = Vec::new();
    let mut frame_id = 0;
    for sample in sample_points(&scene.grid, &positions, protocol.offset_fraction) {
        let contact = approach.contact(&scene.surface, q, &sample.target, indenter.tip_radius());
        for _ in 0..protocol.repetitions.max(1) {
            let Some(contact) = contact else {
                points.push(PointError {
                    label: Some(sample.label),
                    truth: [sample.target.x, sample.target.y, sample.target.z],
                    estimate: None,
                    error_mm: None,
                });
                continue;
            };
            let frame = synthesize_frame(
                &scene.grid,
                &positions,
                &[indenter.stimulus(contact)],
                &metric,
                &model,
                &mut rng,
                frame_id,
            )?;
            frame_id += 1;
            let touches = detect_touches(&frame, &scene.grid, &positions, &scene.config.detection)?;
            let estimate = touches.first().map(|t| t.g_hat_w);
            points.push(PointError {
                label: Some(sample.label),
                truth: [contact.x, contact.y, contact.z],
                estimate: estimate.map(|e| [e.x, e.y, e.z]),
                error_mm: estimate.map(|e| (e - contact).norm()),
            });
        }
    }
    let report = summarize(points)?;
    if report.no_detection > 0 {
        log::warn!("{} probe(s) produced no detection", report.no_detection);
    }
    Ok(report)
}
