//! The steward HTTP service.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use biokey_core::sss::Share;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::store::{valid_rid, CrashPoint, PutError, PutOutcome, ShareStore};

/// Largest accepted request body.
pub const MAX_BODY: usize = 1024 * 1024;

/// Environment variable holding the service bearer token.
pub const TOKEN_ENV: &str = "BIOKEY_STEWARD_TOKEN";

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub token: Option<String>,
    /// Artificial delay before each response, for exercising slow stewards.
    pub latency: Option<Duration>,
    pub crash_point: Option<CrashPoint>,
}

#[derive(Clone)]
struct AppState {
    store: Arc<ShareStore>,
    token: Option<Arc<str>>,
    latency: Option<Duration>,
}

struct ApiError(StatusCode, &'static str, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1, "detail": self.2 }))).into_response()
    }
}

fn io_error(e: std::io::Error) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string())
}

fn constant_time_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

impl AppState {
    async fn admit(&self, headers: &HeaderMap) -> Result<(), ApiError> {
        if let Some(d) = self.latency {
            tokio::time::sleep(d).await;
        }
        let Some(token) = &self.token else {
            return Ok(());
        };
        let presented = headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        match presented {
            Some(p) if constant_time_eq(p.as_bytes(), token.as_bytes()) => Ok(()),
            _ => Err(ApiError(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or bad token".into(),
            )),
        }
    }
}

fn check_rid(rid: &str) -> Result<(), ApiError> {
    if valid_rid(rid) {
        Ok(())
    } else {
        Err(ApiError(
            StatusCode::BAD_REQUEST,
            "bad-path",
            "rid must be 32 lowercase hex digits".into(),
        ))
    }
}

fn check_x(x: &str) -> Result<u8, ApiError> {
    match x.parse::<u8>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(ApiError(
            StatusCode::BAD_REQUEST,
            "bad-path",
            "x must be in 1..=255".into(),
        )),
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> std::io::Result<T> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()))?
        .map_err(io_error)
}

async fn put_share(
    State(st): State<AppState>,
    Path((rid, x)): Path<(String, String)>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    st.admit(&headers).await?;
    check_rid(&rid)?;
    let x = check_x(&x)?;
    let text = std::str::from_utf8(&body).map_err(|_| {
        ApiError(
            StatusCode::BAD_REQUEST,
            "bad-envelope",
            "body is not UTF-8".into(),
        )
    })?;
    let share = Share::from_json(text)
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, "bad-envelope", e.to_string()))?;
    if share.recovery_id_hex() != rid || share.x != x {
        return Err(ApiError(
            StatusCode::BAD_REQUEST,
            "bad-envelope",
            "envelope does not match the path".into(),
        ));
    }
    if !share.checksum_ok() {
        return Err(ApiError(
            StatusCode::BAD_REQUEST,
            "corrupt-share",
            "checksum does not match payload".into(),
        ));
    }
    let store = st.store.clone();
    let key = rid.clone();
    let outcome = blocking(move || store.put(&key, x, &body)).await?;
    let (code, status) = match outcome {
        Ok(PutOutcome::Created) => (StatusCode::CREATED, "created"),
        Ok(PutOutcome::Unchanged) => (StatusCode::OK, "unchanged"),
        Err(PutError::Conflict) => {
            return Err(ApiError(
                StatusCode::CONFLICT,
                "conflict",
                format!("a different share is stored at {rid}/{x}"),
            ))
        }
    };
    Ok((code, Json(json!({ "rid": rid, "x": x, "status": status }))).into_response())
}

async fn get_share(
    State(st): State<AppState>,
    Path((rid, x)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    st.admit(&headers).await?;
    check_rid(&rid)?;
    let x = check_x(&x)?;
    let store = st.store.clone();
    let key = rid.clone();
    match blocking(move || store.get(&key, x)).await? {
        Some(bytes) => Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response()),
        None => Err(ApiError(
            StatusCode::NOT_FOUND,
            "not-found",
            format!("{rid}/{x}"),
        )),
    }
}

async fn delete_share(
    State(st): State<AppState>,
    Path((rid, x)): Path<(String, String)>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    st.admit(&headers).await?;
    check_rid(&rid)?;
    let x = check_x(&x)?;
    let store = st.store.clone();
    let key = rid.clone();
    if blocking(move || store.delete(&key, x)).await? {
        Ok(StatusCode::NO_CONTENT.into_response())
    } else {
        Err(ApiError(
            StatusCode::NOT_FOUND,
            "not-found",
            format!("{rid}/{x}"),
        ))
    }
}

async fn list_shares(
    State(st): State<AppState>,
    Path(rid): Path<String>,
    headers: HeaderMap,
) -> Result<Response, ApiError> {
    st.admit(&headers).await?;
    check_rid(&rid)?;
    let store = st.store.clone();
    let key = rid.clone();
    let indices = blocking(move || store.list(&key)).await?;
    Ok(Json(json!({ "rid": rid, "indices": indices })).into_response())
}

pub fn router(cfg: &ServiceConfig) -> std::io::Result<Router> {
    let mut store = ShareStore::open(&cfg.data_dir)?;
    if let Some(p) = cfg.crash_point {
        store = store.with_crash_point(p);
    }
    let state = AppState {
        store: Arc::new(store),
        token: cfg.token.as_deref().map(Arc::from),
        latency: cfg.latency,
    };
    Ok(Router::new()
        .route("/v1/shares/{rid}", get(list_shares))
        .route(
            "/v1/shares/{rid}/{x}",
            get(get_share).put(put_share).delete(delete_share),
        )
        .layer(DefaultBodyLimit::max(MAX_BODY))
        .with_state(state))
}

/// Serves until the future `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    cfg: &ServiceConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(cfg)?;
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
}

/// A service running on a background task.
pub struct StewardHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl StewardHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stops accepting connections and waits for in-flight requests.
    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        self.task.await.map_err(std::io::Error::other)?
    }
}

/// Binds `addr` (port 0 picks a free one) and serves in the background.
pub async fn spawn(addr: SocketAddr, cfg: ServiceConfig) -> std::io::Result<StewardHandle> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let app = router(&cfg)?;
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(StewardHandle {
        addr,
        stop: Some(tx),
        task,
    })
}
