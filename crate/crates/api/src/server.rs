//! Axum router exposing the backtest, diagnostics, schedule, synthetic data
//! and interactive forecasting operations.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use calitrade_core::backtest::run_backtest_on;
use calitrade_core::data::{parse_prices, synth_series, PriceSeries};
use calitrade_core::diagnostics::{calibrate_on, diagnostics_files};
use calitrade_core::game::Randomizer;
use calitrade_core::schedule::validate_schedule;
use calitrade_core::{Error as CoreError, Forecaster};
use tokio::net::TcpListener;
use uuid::Uuid;

use crate::wire::*;

/// Upper bound on concurrently open forecasting sessions.
pub const MAX_SESSIONS: usize = 4096;
/// Request body limit; minute-bar CSVs for many assets are large.
pub const BODY_LIMIT: usize = 256 * 1024 * 1024;

#[derive(Debug)]
pub enum ApiError {
    Invalid(String),
    NotFound(String),
    Busy(String),
    Internal(String),
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io(e) => ApiError::Internal(e.to_string()),
            other => ApiError::Invalid(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            ApiError::Invalid(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Busy(m) => (StatusCode::SERVICE_UNAVAILABLE, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(ErrorBody { error })).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

struct Session {
    forecaster: Forecaster,
    randomizer: Randomizer,
}

#[derive(Default)]
pub struct AppState {
    sessions: Mutex<HashMap<Uuid, Arc<Mutex<Session>>>>,
}

pub fn router() -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/v1/backtest", post(backtest))
        .route("/v1/calibrate", post(calibrate))
        .route("/v1/validate-schedule", post(schedule))
        .route("/v1/synth", post(synth))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(session_status).delete(delete_session))
        .route("/v1/sessions/{id}/forecast", post(forecast))
        .route("/v1/sessions/{id}/outcome", post(outcome))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(Arc::new(AppState::default()))
}

/// Serves the router on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router()).with_graceful_shutdown(shutdown).await
}

async fn health() -> &'static str {
    "ok"
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

/// Asset name from an uploaded file name: the stem, restricted to a safe
/// alphabet so it can appear in output file names.
pub fn asset_name(file: &str) -> Result<String, ApiError> {
    let base = file.rsplit(['/', '\\']).next().unwrap_or(file);
    let stem = base.strip_suffix(".csv").unwrap_or(base);
    if stem.is_empty() || !stem.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) || stem.starts_with('.') {
        return Err(ApiError::Invalid(format!("unusable asset file name {file:?}")));
    }
    Ok(stem.to_string())
}

fn parse_inputs(req: &RunRequest) -> Result<Vec<(String, PriceSeries)>, ApiError> {
    if !req.config.inputs.is_empty() {
        return Err(ApiError::Invalid(
            "config.inputs names server-side paths; send file contents in `files` instead".into(),
        ));
    }
    let mut out: Vec<(String, PriceSeries)> = Vec::with_capacity(req.files.len());
    for f in &req.files {
        let name = asset_name(&f.name)?;
        if out.iter().any(|(n, _)| *n == name) {
            return Err(ApiError::Invalid(format!("duplicate asset {name}")));
        }
        let series = parse_prices(f.csv.as_bytes()).map_err(|e| ApiError::Invalid(format!("{}: {e}", f.name)))?;
        out.push((name, series));
    }
    Ok(out)
}

fn resolve_assets(req: &RunRequest) -> Result<(Vec<(String, PriceSeries)>, bool), ApiError> {
    let files = parse_inputs(req)?;
    if files.is_empty() {
        Ok((req.config.synth_assets()?, true))
    } else {
        Ok((files, false))
    }
}

async fn backtest(Json(req): Json<RunRequest>) -> ApiResult<BacktestResponse> {
    blocking(move || {
        let (assets, synthetic) = resolve_assets(&req)?;
        tracing::info!(assets = assets.len(), synthetic, "backtest");
        let report = run_backtest_on(&req.config, assets, synthetic)?;
        Ok(Json(BacktestResponse {
            summary: report.summary_rows(),
            files: report.files()?,
        }))
    })
    .await
}

async fn calibrate(Json(req): Json<RunRequest>) -> ApiResult<CalibrateResponse> {
    blocking(move || {
        let (assets, synthetic) = resolve_assets(&req)?;
        tracing::info!(assets = assets.len(), synthetic, "calibrate");
        let rows = calibrate_on(&req.config, assets, synthetic)?;
        let files = diagnostics_files(&rows)?;
        Ok(Json(CalibrateResponse { rows, files }))
    })
    .await
}

/// Epochs checked per request at most; each epoch is constant work.
const MAX_EPOCHS: u64 = 1_000_000;

async fn schedule(Json(req): Json<ScheduleRequest>) -> ApiResult<ScheduleResponse> {
    if req.s_max > MAX_EPOCHS {
        return Err(ApiError::Invalid(format!("s_max {} exceeds {MAX_EPOCHS}", req.s_max)));
    }
    blocking(move || {
        let violations = validate_schedule(req.exponent, req.signal_dim, req.s_max);
        Ok(Json(ScheduleResponse {
            valid: violations.is_empty(),
            violations,
        }))
    })
    .await
}

async fn synth(Json(req): Json<SynthRequest>) -> ApiResult<SynthResponse> {
    blocking(move || {
        req.market.validate()?;
        let series = synth_series(&req.market, req.n, req.seed, req.price_lo, req.price_hi)?;
        Ok(Json(SynthResponse { csv: series.to_csv()? }))
    })
    .await
}

fn parse_id(id: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(id).map_err(|_| ApiError::NotFound(format!("no session {id}")))
}

fn session(state: &AppState, id: &str) -> Result<(Uuid, Arc<Mutex<Session>>), ApiError> {
    let uuid = parse_id(id)?;
    let map = state.sessions.lock().expect("session map poisoned");
    let s = map.get(&uuid).cloned().ok_or_else(|| ApiError::NotFound(format!("no session {id}")))?;
    Ok((uuid, s))
}

async fn create_session(State(state): State<Arc<AppState>>, Json(req): Json<SessionRequest>) -> ApiResult<SessionCreated> {
    let forecaster = Forecaster::new(req.plan, req.signal_dim, req.kernel)?;
    let id = Uuid::new_v4();
    let mut map = state.sessions.lock().expect("session map poisoned");
    if map.len() >= MAX_SESSIONS {
        return Err(ApiError::Busy(format!("{MAX_SESSIONS} sessions already open")));
    }
    map.insert(
        id,
        Arc::new(Mutex::new(Session {
            forecaster,
            randomizer: Randomizer::new(req.seed),
        })),
    );
    tracing::info!(%id, "session created");
    Ok(Json(SessionCreated { id: id.to_string() }))
}

fn status(id: Uuid, s: &Session) -> SessionStatus {
    let st = s.forecaster.state();
    SessionStatus {
        id: id.to_string(),
        steps: st.step(),
        delta: s.forecaster.grid().delta(),
        energy: st.energy(),
        pending: s.forecaster.pending(),
    }
}

async fn session_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionStatus> {
    let (uuid, s) = session(&state, &id)?;
    let s = s.lock().expect("session poisoned");
    Ok(Json(status(uuid, &s)))
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    let uuid = parse_id(&id)?;
    let removed = state.sessions.lock().expect("session map poisoned").remove(&uuid);
    match removed {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::NotFound(format!("no session {id}"))),
    }
}

async fn forecast(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<ForecastRequest>,
) -> ApiResult<ForecastResponse> {
    let (_, s) = session(&state, &id)?;
    blocking(move || {
        let mut s = s.lock().expect("session poisoned");
        let step = s.forecaster.state().step() + 1;
        let p = s.forecaster.forecast(&req.x)?;
        let grid = *s.forecaster.grid();
        let (p_tilde, x_tilde) = s.randomizer.draw(p, &req.x, &grid)?;
        Ok(Json(ForecastResponse {
            step,
            p,
            p_tilde,
            x_tilde,
            delta: grid.delta(),
        }))
    })
    .await
}

async fn outcome(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<OutcomeRequest>,
) -> ApiResult<SessionStatus> {
    let (uuid, s) = session(&state, &id)?;
    blocking(move || {
        let mut s = s.lock().expect("session poisoned");
        s.forecaster.reveal(req.outcome)?;
        Ok(Json(status(uuid, &s)))
    })
    .await
}
