use std::net::SocketAddr;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tactwin_core::bench::pad_scene;
use tactwin_core::mesh::HalfSpace;
use tactwin_core::scene::{GridSpec, MeshSource, NodeSelection, Scene, SceneConfig};
use tactwin_core::sensor::ActivationMap;
use tactwin_core::touch::detect_touches;
use tactwin_core::Point3;
use tactwin_service::{start, RunningService, ServiceConfig, Snapshot};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn launch(scene: Scene) -> RunningService {
    start(scene, SocketAddr::from(([127, 0, 0, 1], 0)), ServiceConfig::default())
        .await
        .unwrap()
}

async fn connect(service: &RunningService) -> Client {
    let (ws, _) = connect_async(format!("ws://{}/ws", service.addr)).await.unwrap();
    ws
}

async fn next_json(ws: &mut Client) -> Value {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("message within 10 s")
            .expect("stream open")
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(&t).unwrap();
        }
    }
}

async fn next_snapshot(ws: &mut Client) -> Snapshot {
    loop {
        let v = next_json(ws).await;
        if v["type"] == "snapshot" {
            return serde_json::from_value(v).unwrap();
        }
    }
}

/// Sends a command and returns its reply, skipping interleaved snapshots.
async fn command(ws: &mut Client, cmd: Value) -> Value {
    ws.send(Message::Text(cmd.to_string().into())).await.unwrap();
    loop {
        let v = next_json(ws).await;
        if v["type"] != "snapshot" {
            return v;
        }
    }
}

fn cube_scene() -> Scene {
    let config = SceneConfig {
        name: "cube".into(),
        mesh: MeshSource::CubeWithCavity {
            size_mm: 20.0,
            cells: 4,
            hole_cells: 2,
        },
        material: Default::default(),
        gravity_mm_s2: [0.0; 3],
        fixed: NodeSelection::Box {
            min_mm: [-11.0, -11.0, -11.0],
            max_mm: [11.0, 11.0, -10.0],
        },
        springs: Vec::new(),
        tip: None,
        schedules: Default::default(),
        solver: Default::default(),
        grid: GridSpec {
            rows: 2,
            cols: 2,
            row_normal: [0.0, 1.0, 0.0],
            row_start_mm: -5.0,
            row_spacing_mm: 10.0,
            col_normal: [1.0, 0.0, 0.0],
            col_start_mm: -5.0,
            col_spacing_mm: 10.0,
            side: HalfSpace::above_z(0.0),
        },
        sensor: Default::default(),
        shift_calibration: None,
        detection: Default::default(),
    };
    Scene::build(config, None).unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn idle_loop_keeps_its_rate() {
    let service = launch(pad_scene().unwrap()).await;
    let f0 = service.sim.latest().snapshot.frame;
    let t0 = Instant::now();
    tokio::time::sleep(Duration::from_secs(2)).await;
    let f1 = service.sim.latest().snapshot.frame;
    let rate = (f1 - f0) as f64 / t0.elapsed().as_secs_f64();
    assert!((rate - 20.0).abs() <= 4.0, "{rate} Hz");
}

#[tokio::test(flavor = "multi_thread")]
async fn touch_shows_up_in_the_next_snapshot() {
    let scene = pad_scene().unwrap();
    let grid = scene.grid.clone();
    let service = launch(scene).await;
    let mut ws = connect(&service).await;
    let ack = command(&mut ws, json!({"cmd": "set_config", "sensor": {"noise_std": 0.0}})).await;
    assert_eq!(ack, json!({"type": "ack", "cmd": "set_config"}));
    let point = [44.0, 36.0, 3.0];
    let ack = command(
        &mut ws,
        json!({"cmd": "apply_touch", "point": point, "strength": 1.0, "frames": 30}),
    )
    .await;
    assert_eq!(ack["type"], "ack");

    let mut seen = 0;
    while seen < 2 {
        let s = next_snapshot(&mut ws).await;
        if s.touches.is_empty() {
            continue;
        }
        seen += 1;
        let g = Point3::from(s.touches[0].gw3d);
        assert!((g - Point3::from(point)).norm() <= 8.0, "{g:?}");

        // The estimates are a pure function of the snapshot's own data.
        let dense: Vec<u32> = s.activation.iter().map(|v| v.unwrap_or(0)).collect();
        let map = ActivationMap::from_dense(grid.rows, grid.cols, &dense, s.frame);
        let positions: Vec<Option<Point3>> = s.grid.iter().map(|p| p.map(Point3::from)).collect();
        let again = detect_touches(&map, &grid, &positions, &Default::default()).unwrap();
        assert_eq!(again.len(), s.touches.len());
        for (a, b) in again.iter().zip(&s.touches) {
            assert_eq!([a.peak.0, a.peak.1], b.peak);
            assert_eq!(a.g_w, b.gw2d);
            assert_eq!([a.g_hat_w.x, a.g_hat_w.y, a.g_hat_w.z], b.gw3d);
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_commands_get_errors_and_the_stream_goes_on() {
    let service = launch(pad_scene().unwrap()).await;
    let mut ws = connect(&service).await;
    let first = next_snapshot(&mut ws).await.frame;
    let reply = command(&mut ws, json!({"cmd": "set_pressure", "cavity": "c9", "pa": 3000})).await;
    assert_eq!(reply["type"], "error");
    assert_eq!(reply["kind"], "validation");
    assert!(reply["message"].as_str().unwrap().contains("c9"));
    let reply = command(&mut ws, json!({"cmd": "launch"})).await;
    assert_eq!(reply["kind"], "parse");
    let mut last = first;
    for _ in 0..5 {
        let f = next_snapshot(&mut ws).await.frame;
        assert!(f > last);
        last = f;
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn pressure_moves_the_surface() {
    let service = launch(cube_scene()).await;
    let mut ws = connect(&service).await;
    let rest = next_snapshot(&mut ws).await;
    assert_eq!(rest.pressures["c1"], 0.0);
    let reply = command(&mut ws, json!({"cmd": "set_pressure", "cavity": "c1", "pa": 3000})).await;
    assert_eq!(reply["type"], "ack");
    let mut moved = false;
    for _ in 0..10 {
        let s = next_snapshot(&mut ws).await;
        assert_eq!(s.vertices.len(), rest.vertices.len());
        let shift = s
            .vertices
            .iter()
            .zip(&rest.vertices)
            .map(|(a, b)| (Point3::from(*a) - Point3::from(*b)).norm())
            .fold(0.0, f64::max);
        if shift > 1e-3 && s.volumes["c1"] > rest.volumes["c1"] {
            moved = true;
            break;
        }
    }
    assert!(moved);
    let reply = command(&mut ws, json!({"cmd": "reset"})).await;
    assert_eq!(reply["cmd"], "reset");
}

#[tokio::test(flavor = "multi_thread")]
async fn scene_endpoint_serves_the_topology() {
    let service = launch(pad_scene().unwrap()).await;
    let mut stream = TcpStream::connect(service.addr).await.unwrap();
    stream
        .write_all(b"GET /scene HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).await.unwrap();
    assert!(response.starts_with("HTTP/1.1 200"));
    let body = &response[response.find("\r\n\r\n").unwrap() + 4..];
    let info: Value = serde_json::from_str(body).unwrap();
    assert_eq!(info["taxels"].as_array().unwrap().len(), 16);
    let n = info["surface_vertices"].as_array().unwrap().len();
    assert!(info["triangles"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|t| t.as_array().unwrap())
        .all(|v| (v.as_u64().unwrap() as usize) < n));
    service.shutdown().await.unwrap();
}
