//! HTTP session service under `/v1/`.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | GET | `/v1/health` | | `{status, variant}` |
//! | GET | `/v1/profiles` | | `[{profile, applicant_id, items}]` |
//! | POST | `/v1/sessions` | `{profile?, fake_items?, seed?}` | 201 `SessionView` |
//! | GET | `/v1/sessions/{id}` | | `SessionView` |
//! | GET | `/v1/sessions/{id}/question` | | `QuestionView`, 409 when none is pending |
//! | POST | `/v1/sessions/{id}/answer` | `{label}` | `SessionView`, 409 when none is pending |
//! | GET | `/v1/sessions/{id}/result` | | `ResultView`, 409 until finished |
//! | DELETE | `/v1/sessions/{id}` | | 204 |
//!
//! Every session route takes `?inspect=true` to include the policy's
//! distributions. Unknown sessions give 404 and malformed bodies 400.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kg::{Item, Label};
use crate::policy::Policy;
use crate::rng;
use crate::session::Session;
use crate::training::Dataset;

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub idle_timeout: Duration,
    pub max_sessions: usize,
    /// Base of the random profile and question-rendering seeds.
    pub seed: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { idle_timeout: Duration::from_secs(900), max_sessions: 1024, seed: 0 }
    }
}

struct Entry {
    session: Arc<Mutex<Session>>,
    last_used: Instant,
}

pub struct AppState {
    data: Arc<Dataset>,
    policy: Arc<Policy>,
    cfg: ServiceConfig,
    sessions: Mutex<HashMap<String, Entry>>,
    created: AtomicU64,
}

impl AppState {
    pub fn new(data: Arc<Dataset>, policy: Arc<Policy>, cfg: ServiceConfig) -> Arc<Self> {
        Arc::new(AppState { data, policy, cfg, sessions: Mutex::new(HashMap::new()), created: AtomicU64::new(0) })
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session store poisoned").len()
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let mut map = self.sessions.lock().expect("session store poisoned");
        let now = Instant::now();
        let expired = map.get(id).map(|e| now.duration_since(e.last_used) > self.cfg.idle_timeout);
        match expired {
            Some(false) => {
                let e = map.get_mut(id).expect("present");
                e.last_used = now;
                Ok(e.session.clone())
            }
            Some(true) => {
                map.remove(id);
                Err(ApiError::not_found(id))
            }
            None => Err(ApiError::not_found(id)),
        }
    }

    fn insert(&self, session: Session) -> Arc<Mutex<Session>> {
        let mut map = self.sessions.lock().expect("session store poisoned");
        let now = Instant::now();
        let timeout = self.cfg.idle_timeout;
        map.retain(|_, e| now.duration_since(e.last_used) <= timeout);
        while map.len() >= self.cfg.max_sessions.max(1) {
            let oldest = map.iter().min_by_key(|(_, e)| e.last_used).map(|(k, _)| k.clone()).expect("non-empty");
            map.remove(&oldest);
        }
        let id = session.id().to_string();
        let s = Arc::new(Mutex::new(session));
        map.insert(id, Entry { session: s.clone(), last_used: now });
        s
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn not_found(id: &str) -> Self {
        ApiError { status: StatusCode::NOT_FOUND, message: format!("no session `{id}`") }
    }

    fn bad_request(m: impl ToString) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, message: m.to_string() }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Conflict(_) => StatusCode::CONFLICT,
            Error::Invalid(_) | Error::Json(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError { status, message: e.to_string() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed body: {e}")))
}

#[derive(Debug, Default, Deserialize)]
pub struct InspectQuery {
    #[serde(default)]
    inspect: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default)]
    pub profile: Option<usize>,
    #[serde(default)]
    pub fake_items: Vec<Item>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub label: String,
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    variant: &'static str,
}

#[derive(Debug, Serialize)]
struct ProfileView {
    profile: usize,
    applicant_id: u32,
    items: Vec<(Item, String)>,
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Health> {
    Json(Health { status: "ok", variant: st.policy.variant.name() })
}

async fn profiles(State(st): State<Arc<AppState>>) -> Json<Vec<ProfileView>> {
    let world = &st.data.world;
    Json(
        st.data
            .profiles
            .iter()
            .enumerate()
            .map(|(i, p)| ProfileView {
                profile: i,
                applicant_id: p.applicant_id,
                items: Item::ALL.iter().map(|&it| (it, world.entity(p.item(it)).name.clone())).collect(),
            })
            .collect(),
    )
}

async fn create(State(st): State<Arc<AppState>>, Query(q): Query<InspectQuery>, body: Bytes) -> ApiResult<Response> {
    let req: CreateRequest = if body.iter().all(u8::is_ascii_whitespace) { CreateRequest::default() } else { parse_body(&body)? };
    let n = st.created.fetch_add(1, Ordering::Relaxed);
    let seed = req.seed.unwrap_or_else(|| rng::derive(st.cfg.seed, &[n]));
    let profile = match req.profile {
        Some(p) => p,
        None => (rng::derive(seed, &[0x9f]) % st.data.len().max(1) as u64) as usize,
    };
    let mut fakes = req.fake_items;
    fakes.sort();
    fakes.dedup();
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::start(id, st.data.clone(), st.policy.clone(), profile, fakes, seed)?;
    let view = session.view(q.inspect);
    st.insert(session);
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn show(State(st): State<Arc<AppState>>, Path(id): Path<String>, Query(q): Query<InspectQuery>) -> ApiResult<Response> {
    let s = st.lookup(&id)?;
    let view = s.lock().expect("session poisoned").view(q.inspect);
    Ok(Json(view).into_response())
}

async fn question(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = st.lookup(&id)?;
    let q = s.lock().expect("session poisoned").question();
    match q {
        Some(q) => Ok(Json(q).into_response()),
        None => Err(Error::Conflict("session is finished; no question pending".into()).into()),
    }
}

async fn answer(State(st): State<Arc<AppState>>, Path(id): Path<String>, Query(q): Query<InspectQuery>, body: Bytes) -> ApiResult<Response> {
    let s = st.lookup(&id)?;
    let req: AnswerRequest = parse_body(&body)?;
    let label: Label = req.label.parse().map_err(ApiError::bad_request)?;
    let mut s = s.lock().expect("session poisoned");
    s.answer(label)?;
    Ok(Json(s.view(q.inspect)).into_response())
}

async fn result(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = st.lookup(&id)?;
    let r = s.lock().expect("session poisoned").result();
    match r {
        Some(r) => Ok(Json(r).into_response()),
        None => Err(Error::Conflict("session has not finished".into()).into()),
    }
}

async fn remove(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    let gone = st.sessions.lock().expect("session store poisoned").remove(&id);
    match gone {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::not_found(&id)),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/profiles", get(profiles))
        .route("/v1/sessions", post(create))
        .route("/v1/sessions/{id}", get(show).delete(remove))
        .route("/v1/sessions/{id}/question", get(question))
        .route("/v1/sessions/{id}/answer", post(answer))
        .route("/v1/sessions/{id}/result", get(result))
        .with_state(state)
}

/// Binds and serves until the process is stopped.
pub async fn serve(state: Arc<AppState>, bind: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
