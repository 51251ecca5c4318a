//! The simulation loop. One thread owns the scene; everything else talks
//! to it through the command queue and reads published snapshots.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use tactwin_core::fem::{cavity_volume, SolverConfig};
use tactwin_core::scene::{PressureSchedule, Scene};
use tactwin_core::sensor::{FrameStream, SensorModel, TouchStimulus};
use tactwin_core::touch::{detect_touches, TouchEstimate};
use tactwin_core::Point3;
use tokio::sync::{mpsc, oneshot, watch};

use crate::protocol::{Command, ErrorKind, Reply, SensorOverrides, Snapshot, TouchMessage};
use crate::ServiceConfig;

/// A command with the channel its reply goes back on.
#[derive(Debug)]
pub struct Request {
    pub command: Command,
    pub reply: oneshot::Sender<Reply>,
}

/// A snapshot together with its JSON text, serialized once per frame.
#[derive(Debug)]
pub struct Published {
    pub snapshot: Snapshot,
    pub json: String,
}

/// A press held at a fixed point of one boundary triangle, so it follows
/// the surface as the body deforms.
#[derive(Debug, Clone)]
struct HeldTouch {
    triangle: usize,
    weights: [f64; 3],
    strength: f64,
    sigma_scale: f64,
    frames_left: u32,
}

/// Barycentric weights of `p` (assumed on the triangle) with respect to
/// `a, b, c`.
fn triangle_weights(p: &Point3, [a, b, c]: [Point3; 3]) -> [f64; 3] {
    let (e0, e1, e2) = (b - a, c - a, p - a);
    let (d00, d01, d11) = (e0.dot(&e0), e0.dot(&e1), e1.dot(&e1));
    let (d20, d21) = (e2.dot(&e0), e2.dot(&e1));
    let denom = d00 * d11 - d01 * d01;
    if denom.abs() < 1e-300 {
        return [1.0, 0.0, 0.0];
    }
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    [1.0 - v - w, v, w]
}

pub struct Simulation {
    scene: Scene,
    stream: FrameStream,
    /// Commanded pressure per cavity (Pa); the solver target ramps towards
    /// it by at most `pressure_step_pa` per frame.
    commanded: BTreeMap<String, f64>,
    touches: Vec<HeldTouch>,
    playing: Option<(PressureSchedule, f64)>,
    solver: SolverConfig,
    config: ServiceConfig,
    dirty: bool,
    converged: bool,
    next_frame: u64,
}

impl Simulation {
    pub fn new(scene: Scene, config: ServiceConfig) -> Self {
        let commanded = scene.cavity_names().into_iter().map(|c| (c, 0.0)).collect();
        let solver = SolverConfig {
            load_steps: 1,
            ..scene.config.solver.clone()
        };
        Self {
            stream: FrameStream::new(scene.sensor.clone()),
            scene,
            commanded,
            touches: Vec::new(),
            playing: None,
            solver,
            config,
            dirty: false,
            converged: true,
            next_frame: 0,
        }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn sensor(&self) -> &SensorModel {
        &self.stream.model
    }

    pub fn apply(&mut self, command: Command) -> Reply {
        let name = command.name();
        match self.try_apply(command) {
            Ok(()) => Reply::Ack { cmd: name.into() },
            Err(message) => Reply::Error {
                kind: ErrorKind::Validation,
                message,
            },
        }
    }

    fn try_apply(&mut self, command: Command) -> Result<(), String> {
        match command {
            Command::SetPressure { cavity, pa } => {
                if !pa.is_finite() {
                    return Err("pressure must be finite".into());
                }
                let slot = self
                    .commanded
                    .get_mut(&cavity)
                    .ok_or_else(|| format!("unknown cavity `{cavity}`"))?;
                *slot = pa;
                self.playing = None;
            }
            Command::ApplyTouch {
                point,
                strength,
                frames,
                sigma_scale,
            } => {
                let p = Point3::from(point);
                if !p.iter().all(|x| x.is_finite()) {
                    return Err("touch point must be finite".into());
                }
                if frames == 0 {
                    return Err("frames must be at least 1".into());
                }
                let stimulus = TouchStimulus {
                    contact_point: p,
                    strength,
                    sigma_scale,
                };
                stimulus.validate().map_err(|e| e.to_string())?;
                let q = self.scene.state.positions();
                let (contact, triangle) = self
                    .scene
                    .surface
                    .closest_point(&p, q)
                    .ok_or_else(|| "scene has no surface".to_owned())?;
                let distance = (contact - p).norm();
                if distance > self.config.max_touch_distance_mm {
                    return Err(format!(
                        "touch point is {distance:.2} mm from the surface (limit {} mm)",
                        self.config.max_touch_distance_mm
                    ));
                }
                self.touches.push(HeldTouch {
                    triangle,
                    weights: triangle_weights(&contact, self.scene.surface.triangle_points(triangle, q)),
                    strength,
                    sigma_scale,
                    frames_left: frames,
                });
            }
            Command::ClearTouches => self.touches.clear(),
            Command::SetConfig { detection, sensor } => {
                let detection = detection.unwrap_or(self.scene.config.detection);
                detection.validate().map_err(|e| e.to_string())?;
                let model = match sensor {
                    Some(o) => overridden(&self.stream.model, o),
                    None => self.stream.model.clone(),
                };
                model.validate().map_err(|e| e.to_string())?;
                self.scene.config.detection = detection;
                self.stream.model = model;
            }
            Command::Reset => {
                self.scene.reset();
                self.commanded.values_mut().for_each(|p| *p = 0.0);
                self.touches.clear();
                self.playing = None;
                self.dirty = true;
            }
            Command::PlaySchedule { name } => {
                let schedule = self.scene.schedule(&name).map_err(|e| e.to_string())?.clone();
                self.playing = Some((schedule, 0.0));
            }
        }
        Ok(())
    }

    /// Advances schedule playback and moves each solver target at most one
    /// pressure step towards its commanded value.
    fn ramp_pressures(&mut self) {
        if let Some((schedule, t)) = &mut self.playing {
            *t += 1.0 / self.config.rate_hz;
            for (cavity, pa) in schedule.pressures_at(*t) {
                self.commanded.insert(cavity, pa);
            }
            if *t >= schedule.duration() {
                self.playing = None;
            }
        }
        let step = self.config.pressure_step_pa;
        for (cavity, &goal) in &self.commanded {
            let now = self.scene.state.target_pressure(cavity).unwrap_or(0.0);
            if now != goal {
                let next = if (goal - now).abs() <= step {
                    goal
                } else {
                    now + step * (goal - now).signum()
                };
                self.scene
                    .state
                    .set_pressure(cavity, next)
                    .expect("cavity names come from the scene");
                self.dirty = true;
            }
        }
    }

    /// One frame: ramp, solve if anything moved, synthesize, detect.
    pub fn step(&mut self) -> Snapshot {
        self.ramp_pressures();
        if self.dirty {
            let solver = self.solver.clone();
            match self.scene.solve_with(&solver) {
                Ok(()) => self.converged = true,
                Err(e) => {
                    log::warn!("frame {}: {e}", self.next_frame);
                    self.converged = false;
                }
            }
            self.dirty = false;
        }

        let scene = &self.scene;
        let q = scene.state.positions();
        let stimuli: Vec<TouchStimulus> = self
            .touches
            .iter()
            .map(|t| {
                let [a, b, c] = scene.surface.triangle_points(t.triangle, q);
                TouchStimulus {
                    contact_point: a * t.weights[0] + b * t.weights[1] + c * t.weights[2],
                    strength: t.strength,
                    sigma_scale: t.sigma_scale,
                }
            })
            .collect();
        let positions = scene.taxel_positions();
        let metric = scene.metric();
        let (activation, touches) = match self.stream.next_frame(&scene.grid, &positions, &stimuli, &metric) {
            Ok(frame) => {
                let touches =
                    detect_touches(&frame, &scene.grid, &positions, &scene.config.detection).unwrap_or_else(|e| {
                        log::warn!("detection failed: {e}");
                        Vec::new()
                    });
                (frame.values, touches)
            }
            Err(e) => {
                log::warn!("frame synthesis failed: {e}");
                (
                    vec![None; scene.grid.rows * scene.grid.cols],
                    Vec::<TouchEstimate>::new(),
                )
            }
        };
        for t in &mut self.touches {
            t.frames_left -= 1;
        }
        self.touches.retain(|t| t.frames_left > 0);

        let frame = self.next_frame;
        self.next_frame += 1;
        Snapshot {
            kind: "snapshot".into(),
            frame,
            vertices: scene.surface.vertices.iter().map(|&v| q[v].into()).collect(),
            grid: positions.iter().map(|p| p.map(Into::into)).collect(),
            activation,
            touches: touches.iter().map(TouchMessage::from).collect(),
            pressures: scene
                .state
                .cavities
                .iter()
                .map(|c| (c.name.clone(), c.pressure))
                .collect(),
            volumes: scene
                .state
                .cavities
                .iter()
                .map(|c| (c.name.clone(), cavity_volume(c, q)))
                .collect(),
            converged: self.converged,
        }
    }
}

fn overridden(model: &SensorModel, o: SensorOverrides) -> SensorModel {
    let mut m = model.clone();
    m.touch_amplitude = o.touch_amplitude.unwrap_or(m.touch_amplitude);
    m.sigma = o.sigma.unwrap_or(m.sigma);
    m.kernel = o.kernel.unwrap_or(m.kernel);
    m.noise_std = o.noise_std.unwrap_or(m.noise_std);
    m.shift_gain = o.shift_gain.unwrap_or(m.shift_gain);
    m.shift_cap = o.shift_cap.unwrap_or(m.shift_cap);
    m
}

fn publish(snapshot: Snapshot) -> Arc<Published> {
    let json = serde_json::to_string(&snapshot).expect("snapshots serialize");
    Arc::new(Published { snapshot, json })
}

/// Running simulation thread. Dropping the handle stops the loop.
pub struct SimHandle {
    pub commands: mpsc::UnboundedSender<Request>,
    pub snapshots: watch::Receiver<Arc<Published>>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl SimHandle {
    /// Publishes frame 0 before returning, then runs at `config.rate_hz`.
    pub fn spawn(scene: Scene, config: ServiceConfig) -> Self {
        let period = Duration::from_secs_f64(1.0 / config.rate_hz);
        let mut sim = Simulation::new(scene, config);
        let (tx, snapshots) = watch::channel(publish(sim.step()));
        let (commands, mut rx) = mpsc::unbounded_channel::<Request>();
        let stop = Arc::new(AtomicBool::new(false));
        let flag = stop.clone();
        let thread = std::thread::Builder::new()
            .name("simulation".into())
            .spawn(move || {
                let mut next = Instant::now() + period;
                while !flag.load(Ordering::Relaxed) {
                    let now = Instant::now();
                    if next > now {
                        std::thread::sleep(next - now);
                    }
                    // Slow solves push the schedule back instead of
                    // queueing catch-up frames.
                    next = Instant::now().max(next) + period;
                    loop {
                        match rx.try_recv() {
                            Ok(req) => {
                                let reply = sim.apply(req.command);
                                let _ = req.reply.send(reply);
                            }
                            Err(mpsc::error::TryRecvError::Empty) => break,
                            Err(mpsc::error::TryRecvError::Disconnected) => return,
                        }
                    }
                    tx.send_replace(publish(sim.step()));
                }
            })
            .expect("spawning the simulation thread");
        Self {
            commands,
            snapshots,
            stop,
            thread: Some(thread),
        }
    }

    /// Queues a command and waits for its reply.
    pub async fn send(&self, command: Command) -> Reply {
        let (reply, rx) = oneshot::channel();
        if self.commands.send(Request { command, reply }).is_err() {
            return stopped();
        }
        rx.await.unwrap_or_else(|_| stopped())
    }

    pub fn latest(&self) -> Arc<Published> {
        self.snapshots.borrow().clone()
    }
}

fn stopped() -> Reply {
    Reply::Error {
        kind: ErrorKind::Validation,
        message: "simulation stopped".into(),
    }
}

impl Drop for SimHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tactwin_core::bench::pad_scene;
    use tactwin_core::touch::DetectionConfig;

    fn quiet(sim: &mut Simulation) {
        let reply = sim.apply(Command::SetConfig {
            detection: None,
            sensor: Some(SensorOverrides {
                noise_std: Some(0.0),
                ..Default::default()
            }),
        });
        assert!(matches!(reply, Reply::Ack { .. }));
    }

    #[test]
    fn touch_is_held_for_its_frames() {
        let mut sim = Simulation::new(pad_scene().unwrap(), ServiceConfig::default());
        quiet(&mut sim);
        let reply = sim.apply(Command::ApplyTouch {
            point: [40.0, 40.0, 3.5],
            strength: 1.0,
            frames: 2,
            sigma_scale: 1.0,
        });
        assert_eq!(
            reply,
            Reply::Ack {
                cmd: "apply_touch".into()
            }
        );
        for _ in 0..2 {
            let s = sim.step();
            assert_eq!(s.touches.len(), 1);
            let g = s.touches[0].gw3d;
            assert!(((g[0] - 40.0).powi(2) + (g[1] - 40.0).powi(2)).sqrt() < 8.0);
        }
        assert!(sim.step().touches.is_empty());
    }

    #[test]
    fn validation_errors() {
        let mut sim = Simulation::new(pad_scene().unwrap(), ServiceConfig::default());
        let bad = [
            Command::SetPressure {
                cavity: "c9".into(),
                pa: 1.0,
            },
            Command::ApplyTouch {
                point: [40.0, 40.0, 30.0],
                strength: 1.0,
                frames: 1,
                sigma_scale: 1.0,
            },
            Command::ApplyTouch {
                point: [40.0, 40.0, 3.0],
                strength: 2.0,
                frames: 1,
                sigma_scale: 1.0,
            },
            Command::SetConfig {
                detection: Some(DetectionConfig {
                    threshold: 0,
                    max_touches: 1,
                }),
                sensor: None,
            },
            Command::SetConfig {
                detection: None,
                sensor: Some(SensorOverrides {
                    kernel: Some("square".into()),
                    ..Default::default()
                }),
            },
            Command::PlaySchedule { name: "none".into() },
        ];
        for c in bad {
            assert!(
                matches!(
                    sim.apply(c.clone()),
                    Reply::Error {
                        kind: ErrorKind::Validation,
                        ..
                    }
                ),
                "{c:?}"
            );
        }
        assert_eq!(sim.sensor().kernel, "gaussian");
        assert_eq!(sim.step().frame, 0);
    }

    #[test]
    fn triangle_weights_reconstruct_the_point() {
        let tri = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 1.0),
        ];
        let p = tri[0] * 0.2 + tri[1] * 0.3 + tri[2] * 0.5;
        let w = triangle_weights(&p, tri);
        assert!((w[0] - 0.2).abs() < 1e-12 && (w[1] - 0.3).abs() < 1e-12 && (w[2] - 0.5).abs() < 1e-12);
    }
}
