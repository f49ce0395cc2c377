//! Control server for a running engine: WebSocket protocol, log download and
//! static files for the operator console.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use mbf_core::control::{
    handle_control_message, parse_message, registry, request_id_of, ControlError, Reply, SnapshotMessage,
};
use mbf_core::session::Runtime;
use tokio::sync::{mpsc, oneshot};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub addr: SocketAddr,
    pub log_path: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
}

#[derive(Clone)]
struct AppState {
    runtime: Arc<Runtime>,
    log_path: Option<PathBuf>,
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.task.await;
    }
}

pub fn router(runtime: Arc<Runtime>, opts: &ServerOptions) -> Router {
    let state = AppState {
        runtime,
        log_path: opts.log_path.clone(),
    };
    let app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/log", get(download_log))
        .route("/registry", get(get_registry))
        .route("/snapshot", get(get_snapshot))
        .with_state(state);
    match &opts.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Bind and serve in the background.
pub async fn spawn_server(runtime: Arc<Runtime>, opts: ServerOptions) -> std::io::Result<ServerHandle> {
    let listener = tokio::net::TcpListener::bind(opts.addr).await?;
    let addr = listener.local_addr()?;
    let app = router(runtime, &opts);
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        let served = axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await;
        if let Err(e) = served {
            log::error!("control server failed: {e}");
        }
    });
    log::info!("control server on {addr}");
    Ok(ServerHandle {
        addr,
        shutdown: Some(tx),
        task,
    })
}

async fn download_log(State(app): State<AppState>) -> Response {
    let Some(path) = app.log_path else {
        return (StatusCode::NOT_FOUND, "logging is off").into_response();
    };
    match tokio::fs::read(&path).await {
        Ok(bytes) => (
            [
                (header::CONTENT_TYPE, "text/csv"),
                (header::CONTENT_DISPOSITION, "attachment; filename=\"session.csv\""),
            ],
            bytes,
        )
            .into_response(),
        Err(e) => (StatusCode::NOT_FOUND, e.to_string()).into_response(),
    }
}

async fn get_registry(State(app): State<AppState>) -> impl IntoResponse {
    Json(registry(&app.runtime.snapshot().state))
}

async fn get_snapshot(State(app): State<AppState>) -> impl IntoResponse {
    Json(SnapshotMessage::new((*app.runtime.snapshot()).clone()))
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(app): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| session(socket, app.runtime))
}

fn snapshot_period(runtime: &Runtime) -> Duration {
    let hz = runtime.snapshot().state.control.snapshot_hz;
    Duration::from_secs_f64(1.0 / hz.max(0.1))
}

async fn session(socket: WebSocket, runtime: Arc<Runtime>) {
    let (mut sink, mut stream) = socket.split();
    let (out_tx, mut out_rx) = mpsc::channel::<String>(64);
    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if sink.send(Message::Text(text)).await.is_err() {
                break;
            }
        }
    });

    let pusher = {
        let runtime = runtime.clone();
        let out = out_tx.clone();
        tokio::spawn(async move {
            let mut period = snapshot_period(&runtime);
            let mut ticker = tokio::time::interval(period);
            ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                ticker.tick().await;
                if !runtime.is_running() {
                    break;
                }
                let msg = SnapshotMessage::new((*runtime.snapshot()).clone());
                let text = serde_json::to_string(&msg).expect("snapshot serializes");
                match out.try_send(text) {
                    Ok(()) | Err(mpsc::error::TrySendError::Full(_)) => {}
                    Err(mpsc::error::TrySendError::Closed(_)) => break,
                }
                let p = snapshot_period(&runtime);
                if p != period {
                    period = p;
                    ticker = tokio::time::interval_at(tokio::time::Instant::now() + p, p);
                    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
                }
            }
        })
    };

    while let Some(Ok(frame)) = stream.next().await {
        let text = match frame {
            Message::Text(t) => t,
            Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            Message::Close(_) => break,
            _ => continue,
        };
        let reply = match parse_message(&text) {
            Err(e) => {
                log::warn!("rejected message: {e}");
                Reply::error(request_id_of(&text), &e)
            }
            Ok(msg) => {
                let id = msg.request_id.clone();
                let rt = runtime.clone();
                let result = tokio::task::spawn_blocking(move || rt.with_engine(move |e| handle_control_message(e, &msg)))
                    .await;
                match result {
                    Ok(Ok(reply)) => reply,
                    _ => Reply::error(id, &ControlError::EngineStopped),
                }
            }
        };
        let text = serde_json::to_string(&reply).expect("reply serializes");
        if out_tx.send(text).await.is_err() {
            break;
        }
    }
    pusher.abort();
    drop(out_tx);
    let _ = writer.await;
    log::info!("console disconnected");
}
