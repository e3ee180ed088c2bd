//! HTTP routes and the `/track` WebSocket.

use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tokio::net::TcpListener;

use crate::wire::SessionHello;
use crate::{ApiError, ErrorKind, Service, TrackSession};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(60);

/// WebSocket close code sent when a session expires.
pub const CLOSE_NORMAL: u16 = 1000;

#[derive(Clone)]
struct AppState {
    service: Arc<Service>,
    idle_timeout: Duration,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind) = match self.kind {
            ErrorKind::Request => (StatusCode::BAD_REQUEST, "request"),
            ErrorKind::Config => (StatusCode::CONFLICT, "config"),
            ErrorKind::Internal => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        (status, Json(serde_json::json!({ "error": self.message, "kind": kind }))).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::request(format!("invalid request body: {e}")))
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ApiError::internal(format!("worker failed: {e}"))))
}

pub fn router(service: Arc<Service>, idle_timeout: Duration) -> Router {
    Router::new()
        .route("/chain", get(chain))
        .route("/fk", post(fk))
        .route("/ik", post(ik))
        .route("/grasp", post(grasp))
        .route("/track", get(track))
        .with_state(AppState { service, idle_timeout })
}

pub async fn serve(listener: TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router).await
}

async fn chain(State(app): State<AppState>) -> Response {
    Json(app.service.chain_info()).into_response()
}

async fn fk(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req = parse(&body)?;
    Ok(Json(app.service.fk(&req)?).into_response())
}

async fn ik(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req = parse(&body)?;
    let service = app.service.clone();
    Ok(Json(blocking(move || service.ik(&req)).await?).into_response())
}

async fn grasp(State(app): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req = parse(&body)?;
    let service = app.service.clone();
    Ok(Json(blocking(move || service.grasp(&req)).await?).into_response())
}

#[derive(Debug, Deserialize)]
struct TrackParams {
    /// Comma-separated initial joint values.
    seed: Option<String>,
}

async fn track(
    State(app): State<AppState>,
    Query(params): Query<TrackParams>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let seed = params
        .seed
        .map(|s| {
            s.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ApiError::request(format!("seed: {e}")))
        })
        .transpose()?;
    let session = app.service.open_session(seed)?;
    let dof = app.service.chain().dof();
    Ok(ws.on_upgrade(move |socket| run_track(socket, session, dof, app.idle_timeout)))
}

async fn run_track(mut socket: WebSocket, mut session: TrackSession, dof: usize, idle: Duration) {
    let hello = SessionHello { session: session.id().to_string(), dof, idle_timeout_s: idle.as_secs_f64() };
    let hello = serde_json::to_string(&hello).expect("wire types serialize");
    if socket.send(Message::Text(hello.into())).await.is_err() {
        return;
    }
    loop {
        let msg = match tokio::time::timeout(idle, socket.recv()).await {
            Err(_) => {
                let frame = CloseFrame { code: CLOSE_NORMAL, reason: "session expired".into() };
                let _ = socket.send(Message::Close(Some(frame))).await;
                return;
            }
            Ok(None | Some(Err(_))) => return,
            Ok(Some(Ok(m))) => m,
        };
        let reply = match msg {
            Message::Text(text) => {
                let worked = tokio::task::spawn_blocking(move || {
                    let reply = session.handle_text(text.as_str());
                    (session, reply)
                })
                .await;
                match worked {
                    Ok((s, reply)) => {
                        session = s;
                        reply
                    }
                    Err(_) => return,
                }
            }
            Message::Binary(_) => r#"{"seq":null,"error":"binary frames are not supported"}"#.to_string(),
            Message::Close(_) => return,
            Message::Ping(_) | Message::Pong(_) => continue,
        };
        if socket.send(Message::Text(reply.into())).await.is_err() {
            return;
        }
    }
}
