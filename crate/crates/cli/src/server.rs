//! Request/response service for human-listener sessions.
//!
//! Sessions live under `<sessions>/<id>/` as a task file plus an append-only
//! answer log; dataset and run references in requests resolve against the
//! server root.

use std::collections::HashMap;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use phrasegame::data::load_annotations;
use phrasegame::eval::{pair_index, tasks_from_decoded, Choice, EvalReport};
use phrasegame::harness::{Ack, Session, SessionStatus, TaskView};
use phrasegame::speaker::load_decoded;
use phrasegame::synth::DatasetDir;
use phrasegame::Error;

const SOURCE_FILE: &str = "source.json";

pub struct AppState {
    root: PathBuf,
    sessions_dir: PathBuf,
    panel_size: usize,
    sessions: RwLock<HashMap<String, Arc<Entry>>>,
    next_id: AtomicU64,
}

struct Entry {
    session: Mutex<Session>,
    dataset: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Source {
    dataset: String,
    run: String,
    split: String,
}

impl AppState {
    /// Reopens any sessions already stored under `sessions_dir`.
    pub fn new(root: &Path, sessions_dir: &Path, panel_size: usize) -> Result<Arc<AppState>, Error> {
        fs::create_dir_all(sessions_dir).map_err(|e| Error::Io {
            path: sessions_dir.to_path_buf(),
            source: e,
        })?;
        let state = AppState {
            root: root.to_path_buf(),
            sessions_dir: sessions_dir.to_path_buf(),
            panel_size,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        };
        let mut max_id = 0;
        let mut entries: Vec<PathBuf> = fs::read_dir(sessions_dir)
            .map_err(|e| Error::Io {
                path: sessions_dir.to_path_buf(),
                source: e,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(SOURCE_FILE).exists())
            .collect();
        entries.sort();
        for dir in entries {
            let source: Source = serde_json::from_str(&fs::read_to_string(dir.join(SOURCE_FILE)).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?)?;
            let session = Session::open(&dir)?;
            if let Some(n) = session.id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            let entry = Entry {
                dataset: state.resolve(&source.dataset)?,
                session: Mutex::new(session),
            };
            let id = entry.session.lock().unwrap().id.clone();
            state.sessions.write().unwrap().insert(id, Arc::new(entry));
        }
        state.next_id.store(max_id + 1, Ordering::SeqCst);
        Ok(Arc::new(state))
    }

    /// A reference relative to the root; absolute paths and `..` are refused.
    fn resolve(&self, reference: &str) -> Result<PathBuf, Error> {
        let p = Path::new(reference);
        if reference.is_empty() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
            return Err(Error::ConfigError(format!("bad reference {reference:?}")));
        }
        Ok(self.root.join(p))
    }

    fn entry(&self, id: &str) -> Result<Arc<Entry>, Error> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| Error::UnknownSession(id.to_string()))
    }
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::UnknownSession(_) | Error::UnknownTask(_) | Error::UnknownImage(_) => StatusCode::NOT_FOUND,
            Error::DuplicateAnswer { .. } | Error::SessionClosed(_) | Error::IncompletePanels { .. } => {
                StatusCode::CONFLICT
            }
            Error::InsufficientTasks { .. }
            | Error::ConfigError(_)
            | Error::MissingRanks { .. }
            | Error::Io { .. }
            | Error::ParseError { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = serde_json::json!({"code": self.0.code(), "message": self.0.to_string()});
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    /// Dataset directory, relative to the server root.
    pub dataset: String,
    /// Decoded-phrase file of a speaker run, relative to the server root.
    pub run: String,
    pub n_tasks: usize,
    pub seed: u64,
    /// Beam ranks per target to draw tasks from; defaults to all.
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default = "default_split")]
    pub split: String,
}

fn default_split() -> String {
    "test".into()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub n_tasks: usize,
}

async fn create(State(st): State<Arc<AppState>>, Json(req): Json<CreateRequest>) -> Result<Json<CreateResponse>, ApiError> {
    let dataset = st.resolve(&req.dataset)?;
    let run = st.resolve(&req.run)?;
    let records = load_annotations(&DatasetDir::new(&dataset).split(&req.split))?;
    let decoded = load_decoded(&run)?;
    let k = req
        .top_k
        .unwrap_or_else(|| decoded.iter().map(|d| d.rank).max().unwrap_or(1));
    let pool = tasks_from_decoded(&decoded, &pair_index(&records), k)?;
    let id = format!("s{:04}", st.next_id.fetch_add(1, Ordering::SeqCst));
    let dir = st.sessions_dir.join(&id);
    let session = Session::create(id.clone(), pool, req.n_tasks, st.panel_size, req.seed, Some(&dir))?;
    let source = Source {
        dataset: req.dataset,
        run: req.run,
        split: req.split,
    };
    let path = dir.join(SOURCE_FILE);
    fs::write(&path, serde_json::to_string_pretty(&source).map_err(Error::from)? + "\n")
        .map_err(|e| Error::Io { path, source: e })?;
    let n_tasks = session.tasks().len();
    st.sessions.write().unwrap().insert(
        id.clone(),
        Arc::new(Entry {
            session: Mutex::new(session),
            dataset,
        }),
    );
    Ok(Json(CreateResponse { session_id: id, n_tasks }))
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub voter: String,
}

/// Either the next task or a done marker.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextResponse {
    Task(TaskView),
    Done { done: bool, status: SessionStatus },
}

async fn next(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<NextQuery>,
) -> Result<Json<NextResponse>, ApiError> {
    if q.voter.is_empty() {
        return Err(Error::ConfigError("voter is required".into()).into());
    }
    let entry = st.entry(&id)?;
    let s = entry.session.lock().unwrap();
    let url = |image: &str| format!("/api/sessions/{id}/images/{image}.png");
    Ok(Json(match s.next_task(&q.voter, url) {
        Some(view) => NextResponse::Task(view),
        None => NextResponse::Done {
            done: true,
            status: s.status(),
        },
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub task_id: String,
    pub voter: String,
    pub choice: Choice,
}

async fn answer(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<AnswerRequest>,
) -> Result<Json<Ack>, ApiError> {
    if req.voter.is_empty() {
        return Err(Error::ConfigError("voter is required".into()).into());
    }
    let entry = st.entry(&id)?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
    let ack = entry.session.lock().unwrap().submit(&req.task_id, &req.voter, req.choice, now)?;
    Ok(Json(ack))
}

async fn summary(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> Result<Json<EvalReport>, ApiError> {
    let entry = st.entry(&id)?;
    let human = entry.session.lock().unwrap().summary()?;
    Ok(Json(EvalReport {
        human: Some(human),
        ..Default::default()
    }))
}

async fn image(
    State(st): State<Arc<AppState>>,
    UrlPath((id, file)): UrlPath<(String, String)>,
) -> Result<Response, ApiError> {
    let entry = st.entry(&id)?;
    let object = file.strip_suffix(".png").unwrap_or(&file).to_string();
    // only images that belong to this session's tasks are served
    let known = entry
        .session
        .lock()
        .unwrap()
        .tasks()
        .iter()
        .any(|t| t.image_a == object || t.image_b == object);
    if !known {
        return Err(Error::UnknownImage(object).into());
    }
    let path = DatasetDir::new(&entry.dataset).image(&object);
    let bytes = fs::read(&path).map_err(|_| Error::UnknownImage(object))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/sessions", post(create))
        .route("/api/sessions/{id}/next", get(next))
        .route("/api/sessions/{id}/answers", post(answer))
        .route("/api/sessions/{id}/summary", get(summary))
        .route("/api/sessions/{id}/images/{file}", get(image))
        .with_state(state)
}

pub fn serve(root: &Path, sessions_dir: &Path, addr: &str, panel_size: usize) -> anyhow::Result<()> {
    let state = AppState::new(root, sessions_dir, panel_size)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        println!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}
