use std::sync::Arc;
use std::time::{Duration, Instant};

use futures::{SinkExt, StreamExt};
use mbf_cli::{spawn_server, ServerHandle, ServerOptions};
use mbf_core::control::{ControlMessage, MessageKind, Reply, SnapshotMessage};
use mbf_core::mapping::allocate_zone;
use mbf_core::session::{Runtime, RuntimeOptions, SessionState};
use serde_json::{json, Value};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio_tungstenite::tungstenite::Message;

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

struct Fixture {
    runtime: Arc<Runtime>,
    server: ServerHandle,
    _dir: tempfile::TempDir,
}

async fn start() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>console</html>").unwrap();
    let mut state = SessionState::default();
    for s in &mut state.sensors.slots {
        s.udp_port = 0;
    }
    let log_path = dir.path().join("session.csv");
    let runtime = Arc::new(
        Runtime::start(
            state,
            RuntimeOptions {
                log_path: Some(log_path.clone()),
                ..Default::default()
            },
        )
        .unwrap(),
    );
    let server = spawn_server(
        runtime.clone(),
        ServerOptions {
            addr: "127.0.0.1:0".parse().unwrap(),
            log_path: Some(log_path),
            static_dir: Some(dir.path().to_path_buf()),
        },
    )
    .await
    .unwrap();
    Fixture {
        runtime,
        server,
        _dir: dir,
    }
}

async fn connect(f: &Fixture) -> Ws {
    let (ws, _) = tokio_tungstenite::connect_async(format!("ws://{}/ws", f.server.addr))
        .await
        .unwrap();
    ws
}

async fn next_json(ws: &mut Ws) -> Value {
    loop {
        match tokio::time::timeout(Duration::from_secs(3), ws.next()).await.unwrap().unwrap().unwrap() {
            Message::Text(t) => return serde_json::from_str(&t).unwrap(),
            _ => continue,
        }
    }
}

async fn request(ws: &mut Ws, msg: &ControlMessage) -> Reply {
    ws.send(Message::Text(serde_json::to_string(msg).unwrap())).await.unwrap();
    request_reply(ws).await
}

async fn request_reply(ws: &mut Ws) -> Reply {
    loop {
        let v = next_json(ws).await;
        if v["kind"] == "reply" {
            return serde_json::from_value(v).unwrap();
        }
    }
}

async fn http_get(f: &Fixture, path: &str) -> (u16, String) {
    let mut s = tokio::net::TcpStream::connect(f.server.addr).await.unwrap();
    s.write_all(format!("GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").as_bytes())
        .await
        .unwrap();
    let mut buf = Vec::new();
    s.read_to_end(&mut buf).await.unwrap();
    let text = String::from_utf8_lossy(&buf).into_owned();
    let status = text[9..12].parse().unwrap();
    let body = text.split_once("\r\n\r\n").map(|(_, b)| b.to_string()).unwrap_or_default();
    (status, body)
}

#[tokio::test(flavor = "multi_thread")]
async fn set_get_clamp_and_unknown_path() {
    let f = start().await;
    let mut ws = connect(&f).await;
    let r = request(&mut ws, &ControlMessage::set("mapping.gamma", json!(2.0)).with_id(1)).await;
    assert!(r.ok, "{r:?}");
    assert_eq!(r.request_id, Some(json!(1)));
    let r = request(&mut ws, &ControlMessage::get("mapping.gamma").with_id(2)).await;
    assert_eq!(r.value, Some(json!(2.0)));

    let r = request(&mut ws, &ControlMessage::set("tempo", json!(999)).with_id(3)).await;
    assert!(r.ok);
    assert_eq!(r.value, Some(json!(240.0)));
    assert!(r.warning.is_some());

    let r = request(&mut ws, &ControlMessage::set("foo.bar", json!(1)).with_id(4)).await;
    assert!(r.is_error("unknown_path"));
    assert_eq!(r.request_id, Some(json!(4)));
}

#[tokio::test(flavor = "multi_thread")]
async fn malformed_messages_get_error_replies() {
    let f = start().await;
    let mut ws = connect(&f).await;
    let before = f.runtime.stats().seq_ticks;
    ws.send(Message::Text("{not json".into())).await.unwrap();
    let r = request_reply(&mut ws).await;
    assert!(r.is_error("malformed"));
    ws.send(Message::Text(r#"{"kind":"juggle","request_id":"x"}"#.into())).await.unwrap();
    let r = request_reply(&mut ws).await;
    assert!(r.is_error("malformed"));
    assert_eq!(r.request_id, Some(json!("x")));
    tokio::time::sleep(Duration::from_millis(200)).await;
    let stats = f.runtime.stats();
    assert!(stats.seq_ticks >= before + 150, "{stats:?}");
}

#[tokio::test(flavor = "multi_thread")]
async fn snapshots_arrive_at_fifteen_hertz() {
    let f = start().await;
    let mut ws = connect(&f).await;
    let t0 = Instant::now();
    let mut n = 0;
    while t0.elapsed() < Duration::from_secs(2) {
        let left = Duration::from_secs(2).saturating_sub(t0.elapsed());
        match tokio::time::timeout(left, ws.next()).await {
            Ok(Some(Ok(Message::Text(t)))) => {
                let m: SnapshotMessage = serde_json::from_str(&t).unwrap();
                let s = &m.snapshot;
                assert_eq!(s.zone, allocate_zone(s.movement.pos2d, &s.state.zones));
                assert_eq!(s.online.len(), 3);
                n += 1;
            }
            Ok(_) => {}
            Err(_) => break,
        }
    }
    assert!((29..=31).contains(&n), "{n} snapshots");
}

#[tokio::test(flavor = "multi_thread")]
async fn gamma_change_shows_in_snapshots_within_two_periods() {
    let f = start().await;
    let mut ws = connect(&f).await;
    ws.send(Message::Text(
        serde_json::to_string(&ControlMessage::set("mapping.gamma", json!(3.0))).unwrap(),
    ))
    .await
    .unwrap();
    let mut replied = false;
    let mut after_reply = 0;
    loop {
        let v = next_json(&mut ws).await;
        if v["kind"] == "reply" {
            replied = true;
            continue;
        }
        let gamma = v["snapshot"]["state"]["modes"]["static_balance"]["mapping"]["gamma"].as_f64().unwrap();
        if gamma == 3.0 {
            break;
        }
        if replied {
            after_reply += 1;
            assert!(after_reply <= 2, "stale gamma after {after_reply} snapshots");
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn standby_and_mode_commands() {
    let f = start().await;
    let mut ws = connect(&f).await;
    let r = request(&mut ws, &ControlMessage::new(MessageKind::Standby).with_value(json!(true))).await;
    assert!(r.ok);
    let r = request(&mut ws, &ControlMessage::new(MessageKind::SetMode).with_value(json!("reach"))).await;
    assert!(r.ok);
    let r = request(&mut ws, &ControlMessage::new(MessageKind::SnapshotRequest)).await;
    let s = r.snapshot.unwrap();
    assert!(s.state.standby);
    assert_eq!(s.state.mode.name(), "reach");
}

#[tokio::test(flavor = "multi_thread")]
async fn disconnect_leaves_engine_ticking() {
    let f = start().await;
    let ws = connect(&f).await;
    drop(ws);
    tokio::time::sleep(Duration::from_millis(50)).await;
    let a = f.runtime.stats().mbf_ticks;
    tokio::time::sleep(Duration::from_millis(300)).await;
    assert!(f.runtime.stats().mbf_ticks >= a + 20);
    let mut ws = connect(&f).await;
    let r = request(&mut ws, &ControlMessage::get("tempo")).await;
    assert_eq!(r.value, Some(json!(60.0)));
}

#[tokio::test(flavor = "multi_thread")]
async fn log_download_registry_and_static_files() {
    let f = start().await;
    tokio::time::sleep(Duration::from_millis(1500)).await;
    let (status, body) = http_get(&f, "/log").await;
    assert_eq!(status, 200);
    assert!(body.starts_with("# mbf-log schema=1"), "{}", &body[..body.len().min(80)]);
    assert!(body.lines().count() > 50);

    let (status, body) = http_get(&f, "/registry").await;
    assert_eq!(status, 200);
    let reg: Vec<Value> = serde_json::from_str(&body).unwrap();
    assert!(reg.iter().any(|p| p["path"] == "modes.sts.mapping.gamma"));

    let (status, body) = http_get(&f, "/index.html").await;
    assert_eq!((status, body.as_str()), (200, "<html>console</html>"));
    let (status, _) = http_get(&f, "/missing.js").await;
    assert_eq!(status, 404);
}
