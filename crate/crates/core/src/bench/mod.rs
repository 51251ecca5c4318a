//! Experiment harness: virtual indenter probing of a scene at rest and in
//! its spring-deformed configuration, baseline-shift and false-positive
//! scans, the bent 4×4 pad scenario, and evaluation of the recorded
//! fixtures.

mod deform;
mod fixtures;
mod pad;
mod probe;
mod shift;
mod stats;

pub use deform::{apply_deformed_config, best_fit_rotation, rotation_angle, DeformReport};
pub use fixtures::{fixture_eval, load_fixture, FixtureDataset, FixtureEval, FIXTURE_NAMES};
pub use pad::{bend_pad, pad_scene, run_pad_scenario, PadReport, PAD_BEND_RADIUS_MM};
pub use probe::{
    approaches, indenters, run_probe_experiment, sample_points, AlongNormal, Approach, FromAbove, Indenter,
    ProbeProtocol, SamplePoint, SphericalIndenter, MEDIUM, SMALL,
};
pub use shift::{baseline_shift_report, robustness_scan, RobustnessConfig, RobustnessReport, ShiftReport};
pub use stats::{
    error_stats, summarize, write_points_csv, write_table_csv, EvalReport, PointError, TableRow, REFERENCE_SPAN_MM,
};

use crate::fem::FemError;
use crate::registry::UnknownStrategy;
use crate::scene::SceneError;
use crate::sensor::SensorError;
use crate::touch::TouchError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("unknown fixture `{0}` (known: rest_small, deformed_small)")]
    UnknownFixture(String),
    #[error("no error pairs to summarize")]
    EmptyInput,
    #[error("fixture data: {0}")]
    Fixture(String),
    #[error("writing report: {0}")]
    Output(String),
    #[error("scene has no tip configuration")]
    MissingTip,
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Touch(#[from] TouchError),
    #[error(transparent)]
    Unknown(#[from] UnknownStrategy),
}
