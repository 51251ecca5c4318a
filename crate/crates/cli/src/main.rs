//! `tactwin`: probe experiments, fixture evaluation, baseline-shift
//! reports and the live simulation service.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tactwin_core::bench::{
    apply_deformed_config, baseline_shift_report, fixture_eval, run_probe_experiment, write_points_csv,
    write_table_csv, DeformReport, EvalReport, FixtureEval, ProbeProtocol, ShiftReport, TableRow, FIXTURE_NAMES,
};
use tactwin_core::scene::{PressureSchedule, Scene};
use tactwin_service::ServiceConfig;

#[derive(Parser)]
#[command(
    name = "tactwin",
    version,
    about = "Soft-body digital twin with taxel-grid touch localization"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Configuration {
    Rest,
    Deformed,
}

impl Configuration {
    fn label(self) -> &'static str {
        match self {
            Self::Rest => "rest",
            Self::Deformed => "deformed",
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Probe every taxel of a scene with a virtual indenter.
    Probe {
        /// Scene file, or `demo` for the bundled stand-in body.
        #[arg(long, default_value = "demo")]
        scene: String,
        #[arg(long, value_enum, default_value = "rest")]
        config: Configuration,
        /// Indenter name (small, medium).
        #[arg(long, default_value = "small")]
        indenter: String,
        /// Approach name (from-above, normal).
        #[arg(long, default_value = "from-above")]
        approach: String,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Overrides the scene's read noise (CDC counts).
        #[arg(long)]
        noise_std: Option<f64>,
        /// JSON report; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary row in the error-table layout.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Per-point truth, estimate and error.
        #[arg(long)]
        points_csv: Option<PathBuf>,
    },
    /// Evaluate a recorded fixture against its reference band.
    Fixtures {
        /// Fixture name; all fixtures when absent.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Largest baseline shift per taxel over a pressure schedule.
    ShiftReport {
        #[arg(long, default_value = "demo")]
        scene: String,
        /// Schedule JSON file, or the name of a schedule in the scene.
        #[arg(long, default_value = "animation")]
        schedule: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Row-major grid of maxima, empty cells for missing taxels.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the live service.
    Serve {
        #[arg(long, default_value = "demo")]
        scene: String,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, default_value_t = 20.0)]
        rate: f64,
        /// Largest pressure change per frame (Pa).
        #[arg(long, default_value_t = 1000.0)]
        pressure_step: f64,
        /// Directory holding the browser UI bundle.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

fn load_scene(arg: &str) -> Result<Scene> {
    if arg == "demo" {
        return Scene::demo().context("building the demo scene");
    }
    Scene::load(arg).with_context(|| format!("loading scene {arg}"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let mut stdout = io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ProbeOutput {
    scene: String,
    configuration: Configuration,
    protocol: ProbeProtocol,
    deformation: Option<DeformReport>,
    report: EvalReport,
}

fn probe(
    scene_arg: &str,
    config: Configuration,
    protocol: ProbeProtocol,
    out: Option<&Path>,
    csv: Option<&Path>,
    points_csv: Option<&Path>,
) -> Result<()> {
    let mut scene = load_scene(scene_arg)?;
    let deformation = match config {
        Configuration::Rest => None,
        Configuration::Deformed => Some(apply_deformed_config(&mut scene)?),
    };
    let report = run_probe_experiment(&scene, &protocol)?;
    eprintln!(
        "{} / {}: mean {:.2} mm ({:.2}%), std {:.2} mm ({:.2}%), {} detected, {} without detection",
        config.label(),
        protocol.indenter,
        report.avg_error_mm,
        report.avg_percent,
        report.std_mm,
        report.std_percent,
        report.detected,
        report.no_detection
    );
    if let Some(path) = csv {
        write_table_csv(
            create(path)?,
            &[TableRow::new(config.label(), &protocol.indenter, &report)],
        )?;
    }
    if let Some(path) = points_csv {
        write_points_csv(create(path)?, &report)?;
    }
    emit_json(
        &ProbeOutput {
            scene: scene.config.name.clone(),
            configuration: config,
            protocol,
            deformation,
            report,
        },
        out,
    )
}

fn fixtures(name: Option<&str>, out: Option<&Path>, csv: Option<&Path>) -> Result<bool> {
    let names: Vec<&str> = match name {
        Some(n) => vec![n],
        None => FIXTURE_NAMES.to_vec(),
    };
    let evals = names
        .iter()
        .map(|n| fixture_eval(n))
        .collect::<Result<Vec<FixtureEval>, _>>()?;
    for e in &evals {
        eprintln!(
            "{} ({}D): mean {:.3} mm, std {:.3} mm, target {}: {}",
            e.name,
            e.dims,
            e.report.avg_error_mm,
            e.report.std_mm,
            e.target,
            if e.pass { "pass" } else { "FAIL" }
        );
    }
    if let Some(path) = csv {
        let rows: Vec<TableRow> = evals
            .iter()
            .map(|e| {
                let configuration = e.name.split('_').next().unwrap_or(&e.name);
                TableRow::new(configuration, "small", &e.report)
            })
            .collect();
        write_table_csv(create(path)?, &rows)?;
    }
    let all_pass = evals.iter().all(|e| e.pass);
    if evals.len() == 1 {
        emit_json(&evals[0], out)?;
    } else {
        emit_json(&evals, out)?;
    }
    Ok(all_pass)
}

fn load_schedule(scene: &Scene, arg: &str) -> Result<PressureSchedule> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return serde_json::from_str(&text).with_context(|| format!("parsing schedule {arg}"));
    }
    match scene.schedule(arg) {
        Ok(s) => Ok(s.clone()),
        Err(_) => bail!(
            "`{arg}` is neither a schedule file nor a schedule of the scene (known: {})",
            scene.config.schedules.keys().cloned().collect::<Vec<_>>().join(", ")
        ),
    }
}

fn write_shift_grid(path: &Path, report: &ShiftReport) -> Result<()> {
    let mut w = create(path)?;
    for i in 0..report.rows {
        let row: Vec<String> = (0..report.cols)
            .map(|j| report.max_shift[i * report.cols + j].map_or(String::new(), |v| format!("{v:.3}")))
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn shift_report(scene_arg: &str, schedule: &str, out: Option<&Path>, csv: Option<&Path>) -> Result<()> {
    let mut scene = load_scene(scene_arg)?;
    let schedule = load_schedule(&scene, schedule)?;
    let report = baseline_shift_report(&mut scene, &schedule)?;
    eprintln!(
        "{} samples: largest shift {:.2} CDC, mean of per-taxel maxima {:.2} CDC, detection threshold {}",
        report.samples, report.global_max, report.mean_of_maxima, scene.config.detection.threshold
    );
    if let Some(path) = csv {
        write_shift_grid(path, &report)?;
    }
    emit_json(&report, out)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Cmd::Probe {
            scene,
            config,
            indenter,
            approach,
            repetitions,
            seed,
            noise_std,
            out,
            csv,
            points_csv,
        } => {
            let protocol = ProbeProtocol {
                indenter,
                approach,
                repetitions,
                seed,
                noise_std,
                ..Default::default()
            };
            probe(
                &scene,
                config,
                protocol,
                out.as_deref(),
                csv.as_deref(),
                points_csv.as_deref(),
            )
        }
        Cmd::Fixtures { name, out, csv } => {
            if !fixtures(name.as_deref(), out.as_deref(), csv.as_deref())? {
                std::process::exit(1);
            }
            Ok(())
        }
        Cmd::ShiftReport {
            scene,
            schedule,
            out,
            csv,
        } => shift_report(&scene, &schedule, out.as_deref(), csv.as_deref()),
        Cmd::Serve {
            scene,
            bind,
            rate,
            pressure_step,
            ui_dir,
        } => {
            let scene = load_scene(&scene)?;
            let config = ServiceConfig {
                rate_hz: rate,
                pressure_step_pa: pressure_step,
                ui_dir,
                ..Default::default()
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(tactwin_service::serve(scene, bind, config))?;
            Ok(())
        }
    }
}
