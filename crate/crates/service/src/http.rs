//! axum adapter and the `serve` entry point.

use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, DefaultBodyLimit, State};
use axum::http::{HeaderMap, HeaderName, HeaderValue, Method as HttpMethod, StatusCode, Uri};
use axum::Router;
use cogcaptcha::bank::load_bank;
use cogcaptcha::lifecycle::{ChallengeStore, Clock, SystemClock};
use cogcaptcha::QuestionBank;
use rand::Rng;

use crate::api::{Method, Request, Response, Service};
use crate::config::ServiceConfig;

/// Request bodies larger than this are refused before parsing.
pub const MAX_BODY_BYTES: usize = 16 * 1024;

#[derive(Clone)]
struct AppState {
    service: Arc<Service>,
    clock: Arc<dyn Clock>,
}

pub fn router(service: Arc<Service>, clock: Arc<dyn Clock>) -> Router {
    Router::new()
        .fallback(dispatch)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(AppState { service, clock })
}

async fn dispatch(
    State(app): State<AppState>,
    ConnectInfo(remote): ConnectInfo<SocketAddr>,
    method: HttpMethod,
    uri: Uri,
    headers: HeaderMap,
    body: Bytes,
) -> axum::response::Response {
    let req = Request {
        method: Method::parse(method.as_str()),
        path: uri.path().to_owned(),
        headers: headers
            .iter()
            .filter_map(|(k, v)| Some((k.as_str().to_owned(), v.to_str().ok()?.to_owned())))
            .collect(),
        body: body.to_vec(),
        remote: Some(remote.ip()),
    };
    to_axum(app.service.handle(&req, app.clock.now()))
}

fn to_axum(r: Response) -> axum::response::Response {
    let mut out = axum::response::Response::new(axum::body::Body::from(r.body));
    *out.status_mut() = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    for (k, v) in r.headers {
        if let (Ok(k), Ok(v)) = (HeaderName::try_from(k), HeaderValue::try_from(v)) {
            out.headers_mut().insert(k, v);
        }
    }
    out
}

pub fn load_configured_bank(config: &ServiceConfig) -> anyhow::Result<QuestionBank> {
    Ok(match &config.bank {
        Some(path) => load_bank(&std::fs::read(path)?)?,
        None => QuestionBank::default_bank(),
    })
}

/// Builds the service from `config` and serves until ctrl-c.
pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let bank = load_configured_bank(&config)?;
    let store = match &config.journal {
        Some(path) => ChallengeStore::with_journal(config.lifecycle.clone(), path)?,
        None => ChallengeStore::new(config.lifecycle.clone()),
    };
    if config.lifecycle.signing_secret == [0; 32] {
        tracing::warn!("signing secret is all zeros; set {}", crate::config::ENV_SIGNING_SECRET);
    }
    let service = Arc::new(Service::new(&config, bank, store, rand::rng().random()));
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    let every = Duration::from_secs(config.sweep_interval_secs);
    serve_on(listener, service, Arc::new(SystemClock), every, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

/// Serves `service` on an already bound listener, sweeping every `every`,
/// until `shutdown` resolves.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    service: Arc<Service>,
    clock: Arc<dyn Clock>,
    every: Duration,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> anyhow::Result<()> {
    let sweeper = {
        let service = service.clone();
        let clock = clock.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(every);
            loop {
                tick.tick().await;
                match service.sweep(clock.now()) {
                    Ok(n) if n > 0 => tracing::debug!(changed = n, "sweep"),
                    Ok(_) => {}
                    Err(err) => tracing::error!(%err, "sweep failed"),
                }
            }
        })
    };
    tracing::info!(addr = %listener.local_addr()?, templates = service.bank().len(), "listening");
    let served = axum::serve(
        listener,
        router(service, clock).into_make_service_with_connect_info::<SocketAddr>(),
    )
    .with_graceful_shutdown(shutdown)
    .await;
    sweeper.abort();
    Ok(served?)
}
