//! Explain-selection and predict-output, cached by request content.

use axum::extract::State;
use axum::Json;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use planmine_core::llm::LlmError;
use planmine_core::CodeSpan;

use crate::error::{ApiError, ApiJson, ApiResult};
use crate::AppState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainRequest {
    pub code: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainResponse {
    pub explanation: String,
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictRequest {
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub output: String,
    pub cached: bool,
}

fn cache_key(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Returns the cached value for `key`, or runs `call` off the async runtime
/// and caches its result. Failures are not cached.
async fn cached(
    st: &AppState,
    key: String,
    call: impl FnOnce() -> Result<String, LlmError> + Send + 'static,
) -> ApiResult<(String, bool)> {
    if let Some(hit) = st.cache.lock().unwrap_or_else(|p| p.into_inner()).get(&key) {
        return Ok((hit.clone(), true));
    }
    let value = tokio::task::spawn_blocking(call).await.map_err(|e| ApiError::internal(e.to_string()))??;
    st.cache.lock().unwrap_or_else(|p| p.into_inner()).insert(key, value.clone());
    Ok((value, false))
}

pub(crate) async fn explain(State(st): State<AppState>, ApiJson(req): ApiJson<ExplainRequest>) -> ApiResult<Json<ExplainResponse>> {
    let span = CodeSpan::new(req.start, req.end);
    span.check(&req.code).map_err(|e| ApiError::new(axum::http::StatusCode::UNPROCESSABLE_ENTITY, "invalid_span", e.to_string()))?;
    let key = cache_key(&[b"explain", req.code.as_bytes(), &(req.start as u64).to_le_bytes(), &(req.end as u64).to_le_bytes()]);
    let gw = st.gateway.clone();
    let (explanation, cached) = cached(&st, key, move || gw.explain_selection(&req.code, &span)).await?;
    Ok(Json(ExplainResponse { explanation, cached }))
}

pub(crate) async fn predict(State(st): State<AppState>, ApiJson(req): ApiJson<PredictRequest>) -> ApiResult<Json<PredictResponse>> {
    let key = cache_key(&[b"predict", req.code.as_bytes()]);
    let gw = st.gateway.clone();
    let (output, cached) = cached(&st, key, move || gw.predict_output(&req.code)).await?;
    Ok(Json(PredictResponse { output, cached }))
}
