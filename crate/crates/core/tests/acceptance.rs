//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p tactwin-core --test acceptance`.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tactwin_core::bench::{
    apply_deformed_config, baseline_shift_report, fixture_eval, robustness_scan, run_pad_scenario,
    run_probe_experiment, ProbeProtocol, RobustnessConfig,
};
use tactwin_core::fem::{
    cavity_nodal_forces, cavity_volume, internal_forces, solve_equilibrium, tangent_stiffness, BoundaryConditions,
    Cavity, MaterialParams, PointLoad, SimState, SolverConfig,
};
use tactwin_core::mesh::{bbox_diagonal, extract_surface, TetMesh};
use tactwin_core::scene::{shapes, Scene};
use tactwin_core::sensor::{ActivationMap, TaxelGrid};
use tactwin_core::touch::{detect_touches, DetectionConfig};
use tactwin_core::{Point3, Vec3};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_s {
        Ok(())
    } else {
        Err(format!("took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64()))
    }
}

fn fixtures() -> Outcome {
    let start = Instant::now();
    let rest = fixture_eval("rest_small").map_err(|e| e.to_string())?;
    let deformed = fixture_eval("deformed_small").map_err(|e| e.to_string())?;
    within(start.elapsed(), 1.0)?;
    check(
        rest.pass && deformed.pass,
        format!(
            "rest_small mean {:.3} mm std {:.3} mm (band [2.3, 2.9] / [1.0, 1.6]); deformed_small 2D mean {:.3} mm (<= 4.7)",
            rest.report.avg_error_mm, rest.report.std_mm, deformed.report.avg_error_mm
        ),
    )
}

/// Independent sequential-peak localization over plain arrays. `None`
/// marks a cell without a taxel.
struct Expected {
    peak: (usize, usize),
    weights: Vec<((usize, usize), f64)>,
    g_w: [f64; 2],
    g_hat_w: Point3,
}

fn brute_force_touches(
    values: &[[Option<u32>; 8]; 8],
    pos: &[[Option<Point3>; 8]; 8],
    spacing: (f64, f64),
    threshold: u32,
    max_touches: usize,
) -> Vec<Expected> {
    let mut v = *values;
    let mut out = Vec::new();
    while out.len() < max_touches {
        let mut peak = None;
        let mut peak_value = threshold;
        for i in 0..8 {
            for j in 0..8 {
                if let Some(x) = v[i][j] {
                    if x > peak_value {
                        peak_value = x;
                        peak = Some((i, j));
                    }
                }
            }
        }
        let Some((pi, pj)) = peak else { break };
        let mut cells = Vec::new();
        for i in pi.max(1) - 1..=(pi + 1).min(7) {
            for j in pj.max(1) - 1..=(pj + 1).min(7) {
                if let Some(x) = v[i][j] {
                    cells.push(((i, j), x));
                }
            }
        }
        let total: u64 = cells.iter().map(|c| u64::from(c.1)).sum();
        let weights: Vec<((usize, usize), f64)> =
            cells.iter().map(|&(c, x)| (c, f64::from(x) / total as f64)).collect();
        let mut g_w = [0.0; 2];
        let mut g_hat_w = Point3::zeros();
        for &((i, j), w) in &weights {
            g_w[0] += w * j as f64 * spacing.1;
            g_w[1] += w * i as f64 * spacing.0;
            g_hat_w += pos[i][j].expect("valid cell") * w;
        }
        for &((i, j), _) in &weights {
            v[i][j] = Some(0);
        }
        out.push(Expected {
            peak: (pi, pj),
            weights,
            g_w,
            g_hat_w,
        });
    }
    out
}

fn localization_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (row_spacing, col_spacing) = (10.0, 12.0);
    let mesh = shapes::box_mesh([8.0 * col_spacing, 8.0 * row_spacing, 4.0], [8, 8, 1]);
    let config = DetectionConfig::default();
    let mut maps_with_touches = 0;
    let mut total_touches = 0;
    for trial in 0..1000 {
        // Alternate blocks of 50 maps use full and holed layouts.
        let hole_rate = if trial % 100 < 50 { 0.0 } else { 0.15 };
        let mut pos = [[None; 8]; 8];
        for (i, row) in pos.iter_mut().enumerate() {
            for (j, p) in row.iter_mut().enumerate() {
                if !rng.random_bool(hole_rate) {
                    *p = Some(Point3::new(
                        (j as f64 + 0.5) * col_spacing,
                        (i as f64 + 0.5) * row_spacing,
                        4.0,
                    ));
                }
            }
        }
        if pos.iter().flatten().all(Option::is_none) {
            pos[0][0] = Some(Point3::new(0.5 * col_spacing, 0.5 * row_spacing, 4.0));
        }
        let flat: Vec<Option<Point3>> = pos.iter().flatten().copied().collect();
        let grid = TaxelGrid::new(8, 8, row_spacing, col_spacing, &flat, &mesh).map_err(|e| e.to_string())?;
        let positions = grid.positions(&mesh);
        // Narrow ranges produce frequent ties; the narrowest never crosses
        // the threshold.
        let hi = [21, 40, 120][trial as usize % 3];
        let mut values = [[None; 8]; 8];
        for i in 0..8 {
            for j in 0..8 {
                if pos[i][j].is_some() {
                    values[i][j] = Some(rng.random_range(0..hi));
                }
            }
        }
        let dense: Vec<u32> = values.iter().flatten().map(|v| v.unwrap_or(0)).collect();
        let map = ActivationMap::from_dense(8, 8, &dense, trial);
        let got = detect_touches(&map, &grid, &positions, &config).map_err(|e| e.to_string())?;
        let snapped: [[Option<Point3>; 8]; 8] = std::array::from_fn(|i| std::array::from_fn(|j| positions[i * 8 + j]));
        let want = brute_force_touches(
            &values,
            &snapped,
            (row_spacing, col_spacing),
            config.threshold,
            config.max_touches,
        );
        if got.len() != want.len() {
            return Err(format!("map {trial}: {} touches vs {} expected", got.len(), want.len()));
        }
        maps_with_touches += usize::from(!got.is_empty());
        total_touches += got.len();
        for (g, w) in got.iter().zip(&want) {
            if g.peak != w.peak || g.weights.len() != w.weights.len() {
                return Err(format!("map {trial}: peak {:?} vs {:?}", g.peak, w.peak));
            }
            for (a, b) in g.weights.iter().zip(&w.weights) {
                if a.0 != b.0 || (a.1 - b.1).abs() > 1e-12 {
                    return Err(format!("map {trial}: weight {a:?} vs {b:?}"));
                }
            }
            if (0..2).any(|k| (g.g_w[k] - w.g_w[k]).abs() > 1e-9) || (g.g_hat_w - w.g_hat_w).norm() > 1e-9 {
                return Err(format!("map {trial}: position {:?} vs {:?}", g.g_w, w.g_w));
            }
        }
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "1000 maps identical to brute force ({maps_with_touches} with touches, {total_touches} touches) in {:.2} s",
        start.elapsed().as_secs_f64()
    ))
}

fn fem_bar_and_tangent() -> Outcome {
    let start = Instant::now();
    let (len, side) = (100.0, 10.0);
    let mesh = shapes::box_mesh([len, side, side], [20, 2, 2]);
    let material = MaterialParams::from_pascals(1e5, 0.0, 1000.0).map_err(|e| e.to_string())?;
    let force = 0.005;
    let rest = mesh.rest_positions().to_vec();
    let fixed: BTreeSet<usize> = (0..rest.len()).filter(|&v| rest[v].x.abs() < 1e-9).collect();
    let surface = extract_surface(&mesh);
    let mut loads = vec![Vec3::zeros(); rest.len()];
    for tri in &surface.triangles {
        if tri.iter().all(|&v| (rest[v].x - len).abs() < 1e-9) {
            let area = 0.5
                * (rest[tri[1]] - rest[tri[0]])
                    .cross(&(rest[tri[2]] - rest[tri[0]]))
                    .norm();
            for &v in tri {
                loads[v].x += force / (side * side) * area / 3.0;
            }
        }
    }
    let bcs = BoundaryConditions {
        fixed_nodes: fixed,
        point_loads: loads
            .iter()
            .enumerate()
            .filter(|(_, f)| f.norm() > 0.0)
            .map(|(node, &force)| PointLoad { node, force })
            .collect(),
        ..Default::default()
    };
    let mut state = SimState::new(mesh, Vec::new()).map_err(|e| e.to_string())?;
    solve_equilibrium(&mut state, &material, &bcs, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let tip: Vec<usize> = (0..rest.len()).filter(|&v| (rest[v].x - len).abs() < 1e-9).collect();
    let stretch = tip.iter().map(|&v| state.positions()[v].x - len).sum::<f64>() / tip.len() as f64;
    let expected = force * len / (material.young_modulus * side * side);
    let bar_err = (stretch - expected).abs() / expected;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let base = shapes::cube_five_tets(1.0);
        let jittered: Vec<Point3> = base
            .rest_positions()
            .iter()
            .map(|p| p + Vec3::from_fn(|_, _| rng.random_range(-0.1..0.1)))
            .collect();
        let mesh = TetMesh::new(jittered, base.tets().to_vec()).map_err(|e| e.to_string())?;
        let q: Vec<Point3> = mesh
            .rest_positions()
            .iter()
            .map(|p| p + Vec3::from_fn(|_, _| rng.random_range(-0.05..0.05)))
            .collect();
        let k = tangent_stiffness(&mesh, &material, &q).map_err(|e| e.to_string())?;
        let h = 1e-6 * bbox_diagonal(&q);
        let scale = k.max_abs();
        for col in 0..3 * q.len() {
            let (mut plus, mut minus) = (q.clone(), q.clone());
            plus[col / 3][col % 3] += h;
            minus[col / 3][col % 3] -= h;
            let fp = internal_forces(&mesh, &material, &plus).map_err(|e| e.to_string())?;
            let fm = internal_forces(&mesh, &material, &minus).map_err(|e| e.to_string())?;
            for row in 0..3 * q.len() {
                let fd = (fp[row / 3][row % 3] - fm[row / 3][row % 3]) / (2.0 * h);
                worst = worst.max((fd - k.get(row, col)).abs() / scale);
            }
        }
    }
    within(start.elapsed(), 30.0)?;
    check(
        state.converged && bar_err < 0.02 && worst < 1e-4,
        format!(
            "bar dL {stretch:.6e} mm vs FL/EA {expected:.6e} mm ({:.3}% off); worst tangent/FD mismatch {worst:.2e} of max entry",
            100.0 * bar_err
        ),
    )
}

fn barycentric_invariance() -> Outcome {
    let mut scene = Scene::demo().map_err(|e| e.to_string())?;
    let created: Vec<(usize, [u64; 4])> = scene
        .grid
        .anchors
        .anchors
        .iter()
        .map(|a| (a.element(), a.coords().map(f64::to_bits)))
        .collect();
    let mut peak_volume: f64 = 0.0;
    scene
        .play_schedule("animation", |s, _| {
            peak_volume = peak_volume.max(cavity_volume(&s.state.cavities[0], s.state.positions()));
        })
        .map_err(|e| e.to_string())?;
    let after: Vec<(usize, [u64; 4])> = scene
        .grid
        .anchors
        .anchors
        .iter()
        .map(|a| (a.element(), a.coords().map(f64::to_bits)))
        .collect();
    let rest_volume = cavity_volume(&scene.state.cavities[0], scene.state.mesh.rest_positions());
    if created != after {
        return Err("anchor coordinates changed over the pressure cycle".into());
    }
    if peak_volume <= rest_volume {
        return Err("the pressure cycle did not inflate c1".into());
    }

    let mesh = &scene.state.mesh;
    let rest = mesh.rest_positions();
    let at_rest = scene.grid.anchors.positions_in(mesh, rest);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a = Matrix3::from_fn(|r, c| f64::from(u8::from(r == c)) + rng.random_range(-0.3..0.3));
        let b = Vec3::from_fn(|_, _| rng.random_range(-20.0..20.0));
        let q: Vec<Point3> = rest.iter().map(|p| a * p + b).collect();
        for (p, x) in at_rest.iter().zip(scene.grid.anchors.positions_in(mesh, &q)) {
            worst = worst.max((a * p + b - x).norm());
        }
    }
    check(
        worst <= 1e-9,
        format!(
            "{} anchors bit-identical after inflate/deflate (c1 peak {:.1} of {:.1} mm3); worst affine mismatch {worst:.1e} mm",
            created.len(),
            peak_volume,
            rest_volume
        ),
    )
}

fn cavity_load_soundness() -> Outcome {
    let scene = Scene::demo().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for cavity in &scene.state.cavities {
        for trial in 0..5 {
            let q: Vec<Point3> = if trial == 0 {
                scene.state.positions().to_vec()
            } else {
                scene
                    .state
                    .positions()
                    .iter()
                    .map(|p| p + Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
                    .collect()
            };
            let mut c = cavity.clone();
            c.pressure = 8000.0;
            let total: Vec3 = cavity_nodal_forces(&c, &q).iter().sum();
            worst = worst.max(total.norm() / (c.pressure * c.area(&q)));
        }
    }

    let file = shapes::cube_with_cavity(10.0, 4, 2);
    let rest = file.mesh.rest_positions().to_vec();
    let cavities = file
        .cavities
        .iter()
        .map(|(n, t)| Cavity::new(n.clone(), t.clone(), &rest))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let bcs = BoundaryConditions {
        fixed_nodes: (0..rest.len()).filter(|&v| (rest[v].z + 5.0).abs() < 1e-9).collect(),
        ..Default::default()
    };
    let mut state = SimState::new(file.mesh, cavities).map_err(|e| e.to_string())?;
    let material = MaterialParams::ecoflex_00_50();
    let config = SolverConfig {
        load_steps: 1,
        ..Default::default()
    };
    let mut volumes = vec![cavity_volume(&state.cavities[0], state.positions())];
    for k in 1..=10 {
        state.set_pressure("c1", 500.0 * k as f64).map_err(|e| e.to_string())?;
        solve_equilibrium(&mut state, &material, &bcs, &config).map_err(|e| e.to_string())?;
        if !state.converged {
            return Err(format!("ramp step {k} did not converge"));
        }
        volumes.push(cavity_volume(&state.cavities[0], state.positions()));
    }
    let increasing = volumes.windows(2).all(|w| w[1] > w[0]);
    check(
        worst <= 1e-9 && increasing,
        format!(
            "worst |sum f| / (P area) {worst:.1e} over the demo cavities; volume {:.3} -> {:.3} mm3 strictly increasing: {increasing}",
            volumes[0],
            volumes[10]
        ),
    )
}

fn deformation_robustness() -> Outcome {
    let mut scene = Scene::demo().map_err(|e| e.to_string())?;
    let schedule = scene.schedule("animation").map_err(|e| e.to_string())?.clone();
    let shift = baseline_shift_report(&mut scene, &schedule).map_err(|e| e.to_string())?;
    let r = robustness_scan(&mut scene, &schedule, &RobustnessConfig::default()).map_err(|e| e.to_string())?;
    check(
        shift.global_max <= 16.0 + 1e-9
            && r.no_touch_frames == 10_000
            && r.false_positive_rate < 0.01
            && r.rest_detected == r.rest_touch_frames
            && r.deformed_detected == r.deformed_touch_frames,
        format!(
            "shift max {:.2} CDC, mean of maxima {:.2}; {} / {} touch-free frames with a detection ({:.3}%); touches detected {} / {} at rest, {} / {} at t = {:.2} s",
            shift.global_max,
            shift.mean_of_maxima,
            r.false_positive_frames,
            r.no_touch_frames,
            100.0 * r.false_positive_rate,
            r.rest_detected,
            r.rest_touch_frames,
            r.deformed_detected,
            r.deformed_touch_frames,
            r.deformed_time_s
        ),
    )
}

fn pad_scenario() -> Outcome {
    let r = run_pad_scenario(1000, 100, 16).map_err(|e| e.to_string())?;
    check(
        r.false_positive_frames == 0 && r.touch_detected == r.touch_frames && r.max_error_mm <= 8.0,
        format!(
            "max shift {:.2} CDC, {} detections in {} untouched frames; touch found in {} / {} frames, worst error {:.2} mm (<= 8)",
            r.max_shift, r.false_positive_frames, r.noise_frames, r.touch_detected, r.touch_frames, r.max_error_mm
        ),
    )
}

fn end_to_end_probe() -> Outcome {
    let mut scene = Scene::demo().map_err(|e| e.to_string())?;
    let protocol = ProbeProtocol::default();
    let rest = run_probe_experiment(&scene, &protocol).map_err(|e| e.to_string())?;
    let deform = apply_deformed_config(&mut scene).map_err(|e| e.to_string())?;
    let deformed = run_probe_experiment(&scene, &protocol).map_err(|e| e.to_string())?;
    check(
        rest.avg_error_mm <= 4.0 && deformed.avg_error_mm <= 6.0,
        format!(
            "rest mean {:.2} mm (std {:.2}, {} missed); deformed ({:.1} deg tip) mean {:.2} mm (std {:.2}, {} missed)",
            rest.avg_error_mm,
            rest.std_mm,
            rest.no_detection,
            deform.measured_deg,
            deformed.avg_error_mm,
            deformed.std_mm,
            deformed.no_detection
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("fixture reproduction", fixtures),
        ("localization oracle equivalence", localization_oracle),
        ("FEM analytic bar and tangent", fem_bar_and_tangent),
        ("barycentric invariance", barycentric_invariance),
        ("cavity load soundness", cavity_load_soundness),
        ("deformation robustness", deformation_robustness),
        ("4x4 pad scenario", pad_scenario),
        ("end-to-end probe", end_to_end_probe),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} [{secs:.2} s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} [{secs:.2} s]: {detail}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", 8 - failed, 8);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
