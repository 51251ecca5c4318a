//! Live host for one simulated body.
//!
//! A dedicated thread owns the scene and runs the frame loop at a fixed
//! rate: apply queued commands, ramp cavity pressures, solve, synthesize a
//! sensor frame, detect touches and publish a [`Snapshot`]. Clients
//! connect over WebSocket at `/ws`, send JSON [`Command`]s and receive
//! snapshots on a latest-wins basis, so a slow client skips frames instead
//! of stalling the loop. `GET /scene` returns the static topology once and
//! any other path is served from the optional UI directory.

mod protocol;
mod sim;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use tactwin_core::scene::Scene;
use tokio::net::TcpListener;
use tokio::sync::{mpsc, oneshot, watch};

pub use protocol::{Command, ErrorKind, Reply, SceneInfo, SensorOverrides, Snapshot, TouchMessage};
pub use sim::{Published, Request, SimHandle, Simulation};

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    /// Frame loop rate.
    pub rate_hz: f64,
    /// Largest pressure change applied to a cavity per frame (Pa).
    pub pressure_step_pa: f64,
    /// Touch points further than this from the surface are rejected.
    pub max_touch_distance_mm: f64,
    /// Static UI bundle served for paths other than `/ws` and `/scene`.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            rate_hz: 20.0,
            pressure_step_pa: 1000.0,
            max_touch_distance_mm: 5.0,
            ui_dir: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("binding {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("invalid service configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Request>,
    snapshots: watch::Receiver<Arc<Published>>,
    info: Arc<SceneInfo>,
}

fn router(state: AppState, ui_dir: Option<PathBuf>) -> Router {
    let app = Router::new()
        .route("/scene", get(scene_info))
        .route("/ws", get(ws_upgrade));
    let app = match ui_dir {
        Some(dir) => app.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => app,
    };
    app.with_state(state)
}

async fn scene_info(State(state): State<AppState>) -> Json<SceneInfo> {
    Json(state.info.as_ref().clone())
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client_session(socket, state))
}

fn reply_text(reply: &Reply) -> Message {
    Message::Text(serde_json::to_string(reply).expect("replies serialize").into())
}

/// Forwards commands one at a time, so each reply is sent before the next
/// command is read, and pushes the latest snapshot whenever a new one is
/// published.
async fn client_session(mut socket: WebSocket, state: AppState) {
    let mut snapshots = state.snapshots.clone();
    snapshots.mark_changed();
    let mut pending: Option<oneshot::Receiver<Reply>> = None;
    loop {
        tokio::select! {
            changed = snapshots.changed() => {
                if changed.is_err() {
                    break;
                }
                let text = snapshots.borrow_and_update().json.clone();
                if socket.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            reply = async { pending.as_mut().expect("guarded").await }, if pending.is_some() => {
                pending = None;
                let reply = reply.unwrap_or_else(|_| Reply::Error {
                    kind: ErrorKind::Validation,
                    message: "simulation stopped".into(),
                });
                if socket.send(reply_text(&reply)).await.is_err() {
                    break;
                }
            }
            incoming = socket.recv(), if pending.is_none() => {
                let text = match incoming {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                match serde_json::from_str::<Command>(&text) {
                    Ok(command) => {
                        let (reply, rx) = oneshot::channel();
                        if state.commands.send(Request { command, reply }).is_err() {
                            break;
                        }
                        pending = Some(rx);
                    }
                    Err(e) => {
                        let reply = Reply::Error { kind: ErrorKind::Parse, message: e.to_string() };
                        if socket.send(reply_text(&reply)).await.is_err() {
                            break;
                        }
                    }
                }
            }
        }
    }
}

/// A bound, running service. Dropping it stops the server and the
/// simulation loop.
pub struct RunningService {
    pub addr: SocketAddr,
    pub sim: SimHandle,
    shutdown: Option<oneshot::Sender<()>>,
    server: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl RunningService {
    /// Stops accepting connections and waits for the server task.
    pub async fn shutdown(mut self) -> Result<(), ServiceError> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let server = std::mem::replace(&mut self.server, tokio::spawn(async { Ok(()) }));
        server.await.map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
        Ok(())
    }

    /// Runs until the task is stopped through [`RunningService::shutdown`]
    /// or the server fails.
    pub async fn wait(mut self) -> Result<(), ServiceError> {
        let server = std::mem::replace(&mut self.server, tokio::spawn(async { Ok(()) }));
        server.await.map_err(|e| ServiceError::Io(std::io::Error::other(e)))??;
        Ok(())
    }
}

impl Drop for RunningService {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

/// Starts the frame loop and binds the HTTP/WebSocket server. Must be
/// called inside a Tokio runtime.
pub async fn start(scene: Scene, addr: SocketAddr, config: ServiceConfig) -> Result<RunningService, ServiceError> {
    if !(config.rate_hz > 0.0 && config.rate_hz.is_finite()) {
        return Err(ServiceError::Config("rate must be positive".into()));
    }
    if !(config.pressure_step_pa > 0.0) {
        return Err(ServiceError::Config("pressure step must be positive".into()));
    }
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::Bind { addr, source })?;
    let addr = listener.local_addr()?;
    let info = Arc::new(SceneInfo::of(&scene));
    let ui_dir = config.ui_dir.clone();
    let sim = SimHandle::spawn(scene, config);
    let state = AppState {
        commands: sim.commands.clone(),
        snapshots: sim.snapshots.clone(),
        info,
    };
    let (shutdown, stop) = oneshot::channel::<()>();
    let app = router(state, ui_dir);
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stop.await;
            })
            .await
    });
    log::info!("serving on {addr}");
    Ok(RunningService {
        addr,
        sim,
        shutdown: Some(shutdown),
        server,
    })
}

/// Runs the service until Ctrl-C.
pub async fn serve(scene: Scene, addr: SocketAddr, config: ServiceConfig) -> Result<(), ServiceError> {
    let running = start(scene, addr, config).await?;
    tokio::signal::ctrl_c().await?;
    log::info!("shutting down");
    running.shutdown().await
}
