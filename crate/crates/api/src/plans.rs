//! Plan authoring: creation, edits, changeable areas, groups, lookups.

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::Json;
use serde::{Deserialize, Serialize};

use planmine_core::store::{count_matches, ExportFormat, NewPlan, PlanPatch, Store};
use planmine_core::*;

use crate::corpus::representative;
use crate::error::{ApiError, ApiJson, ApiPath, ApiQuery, ApiResult};
use crate::AppState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanMode {
    Empty,
    FromSelection,
    FromProgram,
    FromCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreatePlan {
    pub mode: PlanMode,
    /// Required for `empty`; otherwise checked against the source's domain.
    #[serde(default)]
    pub domain_id: Option<DomainId>,
    /// Program id for `from_program`/`from_selection`, candidate id for
    /// `from_candidate`.
    #[serde(default)]
    pub source_ref: Option<i64>,
    #[serde(default)]
    pub selection: Option<Selection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PatchPlan {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub goal: Option<String>,
    #[serde(default)]
    pub solution: Option<String>,
    #[serde(default)]
    pub canvas_x: Option<f64>,
    #[serde(default)]
    pub canvas_y: Option<f64>,
    /// Version the edit was based on; a stale value yields 409.
    #[serde(default)]
    pub version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanRequest {
    pub start: usize,
    pub end: usize,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub version: Option<u64>,
}

#[derive(Debug, Deserialize)]
pub(crate) struct VersionQuery {
    version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateGroup {
    pub domain_id: DomainId,
    pub name: String,
    pub plan_ids: Vec<PlanId>,
    /// Take plans out of their current group instead of failing with 409.
    #[serde(default, rename = "move")]
    pub move_plans: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PatchGroup {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub plan_ids: Option<Vec<PlanId>>,
    #[serde(default, rename = "move")]
    pub move_plans: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextResponse {
    pub program_id: ProgramId,
    pub use_case: Option<String>,
    /// The full annotated program.
    pub source: String,
    /// Byte range of the plan's source inside `source`.
    pub start: usize,
    pub end: usize,
}

fn check_domain(requested: Option<DomainId>, actual: DomainId) -> ApiResult<()> {
    match requested {
        Some(d) if d != actual => Err(ApiError::invalid(format!("source belongs to domain {actual}, not {d}"))),
        _ => Ok(()),
    }
}

fn program_name(store: &Store, p: &ExampleProgram) -> ApiResult<String> {
    Ok(match p.use_case_id {
        Some(u) => store.get_use_case(u)?.description,
        None => p.source_path.clone().unwrap_or_default(),
    })
}

fn build_plan(store: &Store, req: &CreatePlan) -> ApiResult<NewPlan> {
    let source = || req.source_ref.ok_or_else(|| ApiError::invalid("source_ref is required for this mode"));
    if req.selection.is_some() && req.mode != PlanMode::FromSelection {
        return Err(ApiError::invalid("selection is only valid with mode from_selection"));
    }
    match req.mode {
        PlanMode::Empty => {
            let d = req.domain_id.ok_or_else(|| ApiError::invalid("domain_id is required for mode empty"))?;
            store.get_domain(d)?;
            Ok(NewPlan::empty(d))
        }
        PlanMode::FromProgram | PlanMode::FromSelection => {
            let program = store.get_program(ProgramId(source()?))?;
            check_domain(req.domain_id, program.domain_id)?;
            let text = program.display_source();
            let (solution, provenance) = if req.mode == PlanMode::FromProgram {
                (text.to_string(), Provenance::FromProgram { program_id: program.id })
            } else {
                let sel = req.selection.as_ref().ok_or_else(|| ApiError::invalid("selection is required"))?;
                let span = CodeSpan::new(sel.start, sel.end);
                span.check(text).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_span", e.to_string()))?;
                let slice = span.slice(text).unwrap_or_default().to_string();
                (slice, Provenance::FromSelection { program_id: program.id, start: sel.start, end: sel.end })
            };
            Ok(NewPlan {
                name: program_name(store, &program)?,
                solution,
                provenance,
                ..NewPlan::empty(program.domain_id)
            })
        }
        PlanMode::FromCandidate => {
            let cand = store.get_candidate(CandidateId(source()?))?;
            check_domain(req.domain_id, cand.domain_id)?;
            let rep = representative(store, &cand)?;
            Ok(NewPlan {
                name: cand.name.clone(),
                goal: rep.goal,
                solution: rep.code,
                changeable_areas: rep.spans,
                provenance: Provenance::FromCandidate { candidate_id: cand.id, snippet_id: rep.snippet_id },
                candidate_id: Some(cand.id),
                ..NewPlan::empty(cand.domain_id)
            })
        }
    }
}

pub(crate) async fn create_plan(State(st): State<AppState>, ApiJson(req): ApiJson<CreatePlan>) -> ApiResult<impl IntoResponse> {
    let plan = st.store.create_plan(&build_plan(&st.store, &req)?)?;
    Ok((StatusCode::CREATED, Json(plan)))
}

pub(crate) async fn get_plan(State(st): State<AppState>, ApiPath(id): ApiPath<PlanId>) -> ApiResult<Json<Plan>> {
    Ok(Json(st.store.get_plan(id)?))
}

pub(crate) async fn list_plans(State(st): State<AppState>, ApiPath(id): ApiPath<DomainId>) -> ApiResult<Json<Vec<Plan>>> {
    Ok(Json(st.store.list_plans(id)?))
}

pub(crate) async fn patch_plan(
    State(st): State<AppState>,
    ApiPath(id): ApiPath<PlanId>,
    ApiJson(req): ApiJson<PatchPlan>,
) -> ApiResult<Json<Plan>> {
    let patch = PlanPatch {
        name: req.name,
        goal: req.goal,
        solution: req.solution,
        canvas_x: req.canvas_x,
        canvas_y: req.canvas_y,
    };
    Ok(Json(st.store.update_plan(id, &patch, req.version)?))
}

pub(crate) async fn duplicate_plan(State(st): State<AppState>, ApiPath(id): ApiPath<PlanId>) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::CREATED, Json(st.store.duplicate_plan(id)?)))
}

pub(crate) async fn delete_plan(State(st): State<AppState>, ApiPath(id): ApiPath<PlanId>) -> ApiResult<StatusCode> {
    st.store.delete_plan(id)?;
    Ok(StatusCode::NO_CONTENT)
}

pub(crate) async fn add_area(
    State(st): State<AppState>,
    ApiPath(id): ApiPath<PlanId>,
    ApiJson(req): ApiJson<SpanRequest>,
) -> ApiResult<Json<Plan>> {
    let mut span = CodeSpan::new(req.start, req.end);
    span.note = req.note;
    Ok(Json(st.store.add_changeable_area(id, span, req.version)?))
}

pub(crate) async fn remove_area(
    State(st): State<AppState>,
    ApiPath((id, index)): ApiPath<(PlanId, usize)>,
    ApiQuery(q): ApiQuery<VersionQuery>,
) -> ApiResult<Json<Plan>> {
    Ok(Json(st.store.remove_changeable_area(id, index, q.version)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum Component {
    Name,
    Goal,
    Solution,
}

#[derive(Debug, Deserialize)]
pub(crate) struct SimilarQuery {
    component: Component,
}

const SIMILAR_LIMIT: usize = 10;

/// The component's value for a snippet: its program's use case for names.
fn component_value(store: &Store, s: &Snippet, c: Component) -> ApiResult<Option<String>> {
    Ok(match c {
        Component::Goal => Some(s.goal.clone()),
        Component::Solution => Some(s.code.clone()),
        Component::Name => {
            let p = store.get_program(s.program_id)?;
            Some(program_name(store, &p)?).filter(|n| !n.is_empty())
        }
    })
}

fn keywords(text: &str) -> Vec<String> {
    let mut words: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    words.sort();
    words.dedup();
    words
}

fn similar_values(store: &Store, plan: &Plan, c: Component) -> ApiResult<Vec<String>> {
    let mut out: Vec<String> = Vec::new();
    fn push(out: &mut Vec<String>, v: Option<String>) {
        if let Some(v) = v.filter(|v| !v.is_empty() && !out.contains(v)) {
            out.push(v);
        }
    }
    if let Some(cid) = plan.candidate_id {
        let cand = store.get_candidate(cid)?;
        for sid in &cand.snippet_ids {
            push(&mut out, component_value(store, &store.get_snippet(*sid)?, c)?);
        }
        return Ok(out);
    }
    let current = match c {
        Component::Name => &plan.name,
        Component::Goal => &plan.goal,
        Component::Solution => &plan.solution,
    };
    let words = keywords(current);
    if words.is_empty() {
        return Ok(out);
    }
    let mut scored: Vec<(usize, String)> = Vec::new();
    for s in store.list_snippets(plan.domain_id)?.iter().filter(|s| !s.goal.is_empty()) {
        let Some(v) = component_value(store, s, c)? else { continue };
        let score: usize = words.iter().map(|w| count_matches(&v, w)).sum();
        if score > 0 {
            scored.push((score, v));
        }
    }
    // Stable: equal scores keep corpus order.
    scored.sort_by(|a, b| b.0.cmp(&a.0));
    for (_, v) in scored {
        if out.len() == SIMILAR_LIMIT {
            break;
        }
        push(&mut out, Some(v));
    }
    Ok(out)
}

pub(crate) async fn similar(
    State(st): State<AppState>,
    ApiPath(id): ApiPath<PlanId>,
    ApiQuery(q): ApiQuery<SimilarQuery>,
) -> ApiResult<Json<Vec<String>>> {
    let plan = st.store.get_plan(id)?;
    Ok(Json(similar_values(&st.store, &plan, q.component)?))
}

pub(crate) async fn context(State(st): State<AppState>, ApiPath(id): ApiPath<PlanId>) -> ApiResult<Json<ContextResponse>> {
    let plan = st.store.get_plan(id)?;
    let (program_id, range) = match plan.provenance {
        Provenance::Empty => return Err(ApiError::not_found(format!("plan {id} has no source program"))),
        Provenance::FromProgram { program_id } => (program_id, None),
        Provenance::FromSelection { program_id, start, end } => (program_id, Some((start, end))),
        Provenance::FromCandidate { snippet_id, .. } => {
            let s = st.store.get_snippet(snippet_id)?;
            let start = s.code_offset - s.comment.len();
            (s.program_id, Some((start, s.code_offset + s.code.len())))
        }
    };
    let program = st.store.get_program(program_id)?;
    let source = program.display_source().to_string();
    let (start, end) = range.unwrap_or((0, source.len()));
    let use_case = match program.use_case_id {
        Some(u) => Some(st.store.get_use_case(u)?.description),
        None => None,
    };
    Ok(Json(ContextResponse { program_id, use_case, source, start, end }))
}

pub(crate) async fn create_group(State(st): State<AppState>, ApiJson(req): ApiJson<CreateGroup>) -> ApiResult<impl IntoResponse> {
    let g = st.store.create_group(req.domain_id, &req.name, &req.plan_ids, req.move_plans)?;
    Ok((StatusCode::CREATED, Json(g)))
}

pub(crate) async fn get_group(State(st): State<AppState>, ApiPath(id): ApiPath<GroupId>) -> ApiResult<Json<PlanGroup>> {
    Ok(Json(st.store.get_group(id)?))
}

pub(crate) async fn list_groups(State(st): State<AppState>, ApiPath(id): ApiPath<DomainId>) -> ApiResult<Json<Vec<PlanGroup>>> {
    Ok(Json(st.store.list_groups(id)?))
}

pub(crate) async fn patch_group(
    State(st): State<AppState>,
    ApiPath(id): ApiPath<GroupId>,
    ApiJson(req): ApiJson<PatchGroup>,
) -> ApiResult<Json<PlanGroup>> {
    Ok(Json(st.store.update_group(id, req.name.as_deref(), req.plan_ids.as_deref(), req.move_plans)?))
}

pub(crate) async fn delete_group(State(st): State<AppState>, ApiPath(id): ApiPath<GroupId>) -> ApiResult<StatusCode> {
    st.store.delete_group(id)?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
pub(crate) struct ExportQuery {
    format: Option<String>,
}

pub(crate) async fn export(
    State(st): State<AppState>,
    ApiPath(id): ApiPath<DomainId>,
    ApiQuery(q): ApiQuery<ExportQuery>,
) -> ApiResult<impl IntoResponse> {
    let format = match q.format.as_deref() {
        None => ExportFormat::Json,
        Some(f) => ExportFormat::parse(f).ok_or_else(|| ApiError::invalid(format!("unknown export format `{f}`")))?,
    };
    let body = st.store.export_plans(id, format)?;
    let mime = match format {
        ExportFormat::Json => "application/json",
        ExportFormat::Markdown => "text/markdown; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, mime)], body))
}
