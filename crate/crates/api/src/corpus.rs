//! Read-only corpus views and the candidate suggestion cursor.

use axum::extract::State;
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use planmine_core::store::SearchScope;
use planmine_core::*;

use crate::error::{ApiError, ApiPath, ApiQuery, ApiResult};
use crate::session::SESSION_HEADER;
use crate::AppState;

#[derive(Debug, Deserialize)]
pub(crate) struct SearchQuery {
    q: Option<String>,
}

impl SearchQuery {
    fn text(&self) -> Option<&str> {
        self.q.as_deref().filter(|q| !q.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UseCaseRow {
    pub id: UseCaseId,
    pub ordinal: u32,
    pub description: String,
    pub program_id: Option<ProgramId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramRow {
    pub id: ProgramId,
    pub ordinal: u32,
    pub use_case_id: Option<UseCaseId>,
    pub source_path: Option<String>,
    /// Subgoal-annotated source; the raw source when no annotation exists.
    pub annotated_source: String,
    pub syntactically_valid: bool,
    pub origin: Origin,
}

impl From<&ExampleProgram> for ProgramRow {
    fn from(p: &ExampleProgram) -> Self {
        ProgramRow {
            id: p.id,
            ordinal: p.ordinal,
            use_case_id: p.use_case_id,
            source_path: p.source_path.clone(),
            annotated_source: p.display_source().to_string(),
            syntactically_valid: p.syntactically_valid,
            origin: p.origin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeSnippet {
    pub snippet_id: SnippetId,
    pub program_id: ProgramId,
    pub goal: String,
    pub code: String,
    pub spans: Vec<CodeSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextCandidate {
    pub candidate_id: CandidateId,
    pub name: String,
    pub name_pending: bool,
    pub size: usize,
    pub rank: usize,
    pub representative: RepresentativeSnippet,
    /// Candidates not yet shown in this session.
    pub remaining: usize,
}

pub(crate) async fn list_domains(State(st): State<AppState>) -> ApiResult<Json<Vec<Domain>>> {
    Ok(Json(st.store.list_domains()?))
}

pub(crate) async fn use_cases(
    State(st): State<AppState>,
    ApiPath(id): ApiPath<DomainId>,
    ApiQuery(q): ApiQuery<SearchQuery>,
) -> ApiResult<Json<Vec<UseCaseRow>>> {
    let use_cases = st.store.list_use_cases(id)?;
    let programs = st.store.list_programs(id)?;
    let row = |u: &UseCase| UseCaseRow {
        id: u.id,
        ordinal: u.ordinal,
        description: u.description.clone(),
        program_id: programs.iter().find(|p| p.use_case_id == Some(u.id)).map(|p| p.id),
    };
    let rows = match q.text() {
        None => use_cases.iter().map(row).collect(),
        Some(text) => st
            .store
            .search(id, text, SearchScope::UseCases)?
            .iter()
            .filter_map(|h| use_cases.iter().find(|u| u.id.0 == h.id))
            .map(row)
            .collect(),
    };
    Ok(Json(rows))
}

pub(crate) async fn programs(
    State(st): State<AppState>,
    ApiPath(id): ApiPath<DomainId>,
    ApiQuery(q): ApiQuery<SearchQuery>,
) -> ApiResult<Json<Vec<ProgramRow>>> {
    let programs = st.store.list_programs(id)?;
    let rows = match q.text() {
        None => programs.iter().map(ProgramRow::from).collect(),
        Some(text) => st
            .store
            .search(id, text, SearchScope::Programs)?
            .iter()
            .filter_map(|h| programs.iter().find(|p| p.id.0 == h.id))
            .map(ProgramRow::from)
            .collect(),
    };
    Ok(Json(rows))
}

pub(crate) async fn program(State(st): State<AppState>, ApiPath(id): ApiPath<ProgramId>) -> ApiResult<Json<ProgramRow>> {
    Ok(Json(ProgramRow::from(&st.store.get_program(id)?)))
}

pub(crate) async fn candidates(
    State(st): State<AppState>,
    ApiPath(id): ApiPath<DomainId>,
) -> ApiResult<Json<Vec<PlanCandidate>>> {
    st.store.get_domain(id)?;
    Ok(Json(st.store.list_candidates(id)?))
}

pub(crate) fn representative(store: &planmine_core::store::Store, c: &PlanCandidate) -> ApiResult<RepresentativeSnippet> {
    let sid = c
        .representative_ids
        .first()
        .or(c.snippet_ids.first())
        .ok_or_else(|| ApiError::internal(format!("candidate {} has no members", c.id)))?;
    let s = store.get_snippet(*sid)?;
    Ok(RepresentativeSnippet { snippet_id: s.id, program_id: s.program_id, goal: s.goal, code: s.code, spans: s.changeable_spans })
}

/// Largest candidate not yet shown in the session; 410 once all were shown.
pub(crate) async fn next_candidate(
    State(st): State<AppState>,
    headers: HeaderMap,
    ApiPath(id): ApiPath<DomainId>,
) -> Response {
    let requested = headers.get(SESSION_HEADER).and_then(|v| v.to_str().ok());
    let (session, result) = st.sessions.with(requested, |state| -> ApiResult<NextCandidate> {
        st.store.get_domain(id)?;
        let mut all = st.store.list_candidates(id)?;
        if all.is_empty() && !st.store.completed_stages(id)?.iter().any(|s| s == "naming") {
            return Err(ApiError::new(StatusCode::CONFLICT, "pipeline_incomplete", format!("domain {id} has no mined candidates yet")));
        }
        all.sort_by(|a, b| b.size.cmp(&a.size).then(a.rank.cmp(&b.rank)));
        let Some(next) = all.iter().find(|c| !state.shown.contains(&c.id)) else {
            return Err(ApiError::new(StatusCode::GONE, "exhausted", "every candidate has been suggested in this session"));
        };
        let rep = representative(&st.store, next)?;
        state.shown.insert(next.id);
        let remaining = all.iter().filter(|c| !state.shown.contains(&c.id)).count();
        Ok(NextCandidate {
            candidate_id: next.id,
            name: next.name.clone(),
            name_pending: next.name_pending,
            size: next.size,
            rank: next.rank,
            representative: rep,
            remaining,
        })
    });
    let mut resp = result.map(Json).into_response();
    if let Ok(v) = HeaderValue::from_str(&session) {
        resp.headers_mut().insert(SESSION_HEADER, v);
    }
    resp
}
