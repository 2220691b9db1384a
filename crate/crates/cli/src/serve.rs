//! Review API for blind annotation: pooled triplet tasks, append-only
//! judgment and pairwise files, and live metrics.

use std::collections::{HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{Context, Result};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use openesd_core::evaluation::{
    evaluate, EvalInputs, Judgment, JudgmentIndex, PairwiseLine, Score,
};
use openesd_core::{Document, TripletKey};
use serde::Serialize;
use serde_json::{json, Value};

use crate::sources::EvalSources;

struct Store {
    inputs: EvalInputs,
    docs: HashMap<String, Document>,
    doc_order: Vec<String>,
    judgments_path: PathBuf,
    pairwise_path: PathBuf,
    scorer: Option<String>,
}

type Shared = Arc<Mutex<Store>>;

/// One pooled triplet to judge. Carries no method identity.
#[derive(Serialize)]
struct Task {
    task_id: String,
    doc_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    entity: String,
    attribute: String,
    value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<Score>,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn append_line<T: Serialize>(path: &Path, item: &T) -> std::io::Result<()> {
    let mut line = serde_json::to_string(item).map_err(std::io::Error::other)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())
}

fn pooled_tasks(store: &Store, annotator: Option<&str>) -> Vec<Task> {
    let rank: HashMap<&str, usize> = store
        .doc_order
        .iter()
        .enumerate()
        .map(|(i, d)| (d.as_str(), i))
        .collect();
    let mut seen: HashSet<(String, TripletKey)> = HashSet::new();
    let mut pool = Vec::new();
    for out in &store.inputs.outputs {
        for t in &out.triplets {
            if seen.insert((t.doc_id.clone(), t.key())) {
                pool.push(t.clone());
            }
        }
    }
    pool.sort_by_key(|t| rank.get(t.doc_id.as_str()).copied().unwrap_or(usize::MAX));

    let index = JudgmentIndex::new(&store.inputs.judgments);
    let mut tasks: Vec<Task> = pool
        .into_iter()
        .enumerate()
        .map(|(i, t)| Task {
            task_id: format!("t{:05}", i + 1),
            text: store.docs.get(&t.doc_id).map(|d| d.text.clone()),
            score: annotator.and_then(|a| index.get(a, &t.doc_id, &t.key())),
            doc_id: t.doc_id,
            entity: t.entity,
            attribute: t.attribute,
            value: t.value,
        })
        .collect();
    // unjudged first, otherwise stable
    tasks.sort_by_key(|t| t.score.is_some());
    tasks
}

async fn get_tasks(State(s): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Response {
    let store = s.lock().expect("store lock");
    Json(pooled_tasks(&store, q.get("annotator").map(String::as_str))).into_response()
}

fn non_empty(v: &Value, field: &str) -> Result<(), String> {
    match v.get(field).and_then(Value::as_str) {
        Some(s) if !s.trim().is_empty() => Ok(()),
        _ => Err(format!("{field} must be a non-empty string")),
    }
}

async fn post_judgment(State(s): State<Shared>, Json(body): Json<Value>) -> Response {
    let score = body.get("score").and_then(Value::as_f64);
    if let Err(e) = score
        .ok_or_else(|| "score must be a number".to_string())
        .and_then(|v| Score::try_from(v).map_err(|e| e.to_string()))
    {
        return error(StatusCode::UNPROCESSABLE_ENTITY, e);
    }
    for f in ["doc_id", "entity", "attribute", "value", "annotator_id"] {
        if let Err(e) = non_empty(&body, f) {
            return error(StatusCode::UNPROCESSABLE_ENTITY, e);
        }
    }
    let judgment: Judgment = match serde_json::from_value(body) {
        Ok(j) => j,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    };
    let mut store = s.lock().expect("store lock");
    if let Err(e) = append_line(&store.judgments_path, &judgment) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    }
    store.inputs.judgments.push(judgment.clone());
    (StatusCode::CREATED, Json(judgment)).into_response()
}

async fn get_pairwise(State(s): State<Shared>) -> Response {
    let store = s.lock().expect("store lock");
    Json(store.inputs.pairwise.clone()).into_response()
}

async fn post_pairwise(State(s): State<Shared>, Json(body): Json<Value>) -> Response {
    for f in ["doc_id", "method_i", "method_j", "annotator_id"] {
        if let Err(e) = non_empty(&body, f) {
            return error(StatusCode::UNPROCESSABLE_ENTITY, e);
        }
    }
    let line: PairwiseLine = match serde_json::from_value(body) {
        Ok(l) => l,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    };
    if line.method_i == line.method_j {
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            "method_i and method_j must differ",
        );
    }
    let mut store = s.lock().expect("store lock");
    if let Err(e) = append_line(&store.pairwise_path, &line) {
        return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
    }
    store.inputs.pairwise.push(line.clone());
    (StatusCode::CREATED, Json(line)).into_response()
}

async fn get_metrics(State(s): State<Shared>) -> Response {
    let store = s.lock().expect("store lock");
    match evaluate(&store.inputs, store.scorer.as_deref()) {
        Ok(report) => Json(report).into_response(),
        Err(e) => error(StatusCode::CONFLICT, e.to_string()),
    }
}

fn router(store: Store) -> Router {
    Router::new()
        .route("/api/tasks", get(get_tasks))
        .route("/api/judgments", axum::routing::post(post_judgment))
        .route("/api/pairwise", get(get_pairwise).post(post_pairwise))
        .route("/api/metrics", get(get_metrics))
        .with_state(Arc::new(Mutex::new(store)))
}

fn open_store(sources: &EvalSources) -> Result<Store> {
    let mut sources = sources.clone();
    let pairwise_path = sources
        .pairwise
        .get_or_insert_with(|| sources.judgments.with_file_name("pairwise.jsonl"))
        .clone();
    let inputs = sources
        .load()
        .context("refusing to start: cannot load existing judgments and predictions")?;
    let docs = sources.documents()?;
    let doc_order = docs.iter().map(|d| d.id.clone()).collect();
    let docs = docs.into_iter().map(|d| (d.id.clone(), d)).collect();
    Ok(Store {
        inputs,
        docs,
        doc_order,
        judgments_path: sources.judgments.clone(),
        pairwise_path,
        scorer: sources.scorer.clone(),
    })
}

/// Binds `addr`, prints the bound address and serves until killed.
pub fn run(sources: EvalSources, addr: &str) -> Result<()> {
    let store = open_store(&sources)?;
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting runtime")?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("cannot bind {addr}"))?;
        println!("listening on http://{}", listener.local_addr()?);
        std::io::stdout().flush()?;
        axum::serve(listener, router(store)).await?;
        Ok(())
    })
}
