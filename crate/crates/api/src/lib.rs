//! HTTP service over a plan-mining store.
//!
//! All bodies are JSON; errors are `{code, message}`. Every mutating
//! endpoint is a single store transaction, so a failed request leaves the
//! store as it was.

mod assist;
mod corpus;
pub mod error;
mod plans;
pub mod session;

use std::collections::HashMap;
use std::future::Future;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::http::{header, HeaderName, HeaderValue, Method};
use axum::routing::{delete, get, post};
use axum::Router;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

use planmine_core::llm::Gateway;
use planmine_core::store::Store;

pub use assist::{ExplainRequest, ExplainResponse, PredictRequest, PredictResponse};
pub use corpus::{NextCandidate, ProgramRow, RepresentativeSnippet, UseCaseRow};
pub use error::{ApiError, ErrorBody};
pub use plans::{ContextResponse, CreateGroup, CreatePlan, PatchGroup, PatchPlan, PlanMode, SpanRequest};
pub use session::{Sessions, SESSION_HEADER};

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub gateway: Gateway,
    pub sessions: Arc<Sessions>,
    /// Explain/predict responses keyed by request content hash.
    cache: Arc<Mutex<HashMap<String, String>>>,
}

impl AppState {
    pub fn new(store: Arc<Store>, gateway: Gateway, session_ttl: Duration) -> Self {
        AppState {
            store,
            gateway,
            sessions: Arc::new(Sessions::new(session_ttl)),
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }
}

pub fn router(state: AppState, cors_origin: Option<&str>) -> Router {
    let origin = match cors_origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(o) => AllowOrigin::exact(o),
        None => AllowOrigin::any(),
    };
    let session = HeaderName::from_static(SESSION_HEADER);
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST, Method::PATCH, Method::DELETE])
        .allow_headers([header::CONTENT_TYPE, session.clone()])
        .expose_headers([session]);

    Router::new()
        .route("/domains", get(corpus::list_domains))
        .route("/domains/{id}/use-cases", get(corpus::use_cases))
        .route("/domains/{id}/programs", get(corpus::programs))
        .route("/domains/{id}/candidates", get(corpus::candidates))
        .route("/domains/{id}/candidates/next", get(corpus::next_candidate))
        .route("/domains/{id}/plans", get(plans::list_plans))
        .route("/domains/{id}/groups", get(plans::list_groups))
        .route("/domains/{id}/export", get(plans::export))
        .route("/programs/{id}", get(corpus::program))
        .route("/plans", post(plans::create_plan))
        .route("/plans/{id}", get(plans::get_plan).patch(plans::patch_plan).delete(plans::delete_plan))
        .route("/plans/{id}/duplicate", post(plans::duplicate_plan))
        .route("/plans/{id}/changeable-areas", post(plans::add_area))
        .route("/plans/{id}/changeable-areas/{index}", delete(plans::remove_area))
        .route("/plans/{id}/similar", get(plans::similar))
        .route("/plans/{id}/context", get(plans::context))
        .route("/groups", post(plans::create_group))
        .route("/groups/{id}", get(plans::get_group).patch(plans::patch_group).delete(plans::delete_group))
        .route("/explain", post(assist::explain))
        .route("/predict-output", post(assist::predict))
        .fallback(|| async { ApiError::not_found("no such route") })
        .layer(cors)
        .with_state(state)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    cors_origin: Option<&str>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state, cors_origin)).with_graceful_shutdown(shutdown).await
}
