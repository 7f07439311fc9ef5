// Copyright 2026 The evqa Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! HTTP routes.
//!
//! | method | path                     | body                                   |
//! |--------|--------------------------|----------------------------------------|
//! | POST   | /sessions                | `{seed, variant, time_budget?, seed_rng?, request_id?}` |
//! | POST   | /sessions/{id}/entity    | `{entity: string or null, request_id?}` |
//! | POST   | /sessions/{id}/actions   | `{kind: SELECT/REGENERATE/RETURN/STOP, index?, step?, request_id?}` |
//! | GET    | /sessions/{id}           |                                        |
//! | GET    | /sessions/{id}/metrics   |                                        |

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use evqa::generation::Variant;
use evqa::session::UserAction;

use crate::store::{CreateParams, ServiceError, SessionStore};

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Gone(_) => StatusCode::GONE,
            ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(json!({ "error": self.to_string() }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
struct CreateBody {
    seed: String,
    variant: Variant,
    #[serde(default)]
    time_budget: Option<u64>,
    #[serde(default)]
    seed_rng: Option<u64>,
    #[serde(default)]
    request_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct EntityBody {
    #[serde(default)]
    entity: Option<String>,
    #[serde(default)]
    request_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ActionBody {
    #[serde(flatten)]
    action: UserAction,
    #[serde(default)]
    request_id: Option<String>,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn blocking<T, F>(store: Arc<SessionStore>, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&SessionStore) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn create(
    State(store): State<Arc<SessionStore>>,
    payload: Result<Json<CreateBody>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let b = body(payload)?;
    let params = CreateParams {
        seed: b.seed,
        variant: b.variant,
        time_budget_secs: b.time_budget,
        rng_seed: b.seed_rng,
        request_id: b.request_id,
    };
    let (view, fresh) = blocking(store, move |s| s.create(params)).await?;
    let status = if fresh { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(view)).into_response())
}

async fn post_entity(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    payload: Result<Json<EntityBody>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let b = body(payload)?;
    let view = blocking(store, move |s| s.post_entity(&id, b.entity, b.request_id)).await?;
    Ok(Json(view).into_response())
}

async fn post_action(
    State(store): State<Arc<SessionStore>>,
    Path(id): Path<String>,
    payload: Result<Json<ActionBody>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let b = body(payload)?;
    let view = blocking(store, move |s| s.post_action(&id, b.action, b.request_id)).await?;
    Ok(Json(view).into_response())
}

async fn get_session(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(store.get(&id)?).into_response())
}

async fn get_metrics(State(store): State<Arc<SessionStore>>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(Json(store.metrics(&id)?).into_response())
}

pub fn router(store: Arc<SessionStore>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/entity", post(post_entity))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/metrics", get(get_metrics))
        .with_state(store)
}

/// Binds `addr` and serves the session API until the process is stopped.
pub async fn serve(addr: &str, store: Arc<SessionStore>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "session service listening");
    axum::serve(listener, router(store)).await
}
