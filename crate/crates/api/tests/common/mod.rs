#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::Value;
use tower::ServiceExt;

use planmine_api::{router, AppState, SESSION_HEADER};
use planmine_core::llm::{FnProvider, Gateway, GatewayOptions, LlmError, PromptKind, PromptRequest};
use planmine_core::segment::segment;
use planmine_core::store::{NewProgram, Store};
use planmine_core::*;

pub const USE_CASES: [&str; 16] = [
    "Reading a CSV file",
    "Merge frames on a shared key",
    "Filter rows by a condition",
    "Group rows and aggregate",
    "Sort by a column",
    "Drop missing values",
    "Rename columns",
    "Merge frames with different key names",
    "Pivot a table",
    "Compute a rolling mean",
    "Write a frame to CSV",
    "Select columns by name",
    "Concatenate frames",
    "Fill missing values",
    "Convert a column type",
    "Count unique values",
];

pub struct Fixture {
    pub store: Arc<Store>,
    pub domain: Domain,
    pub app: Router,
    pub provider_calls: Arc<AtomicUsize>,
    /// Candidate ids by rank: sizes 9, 5, 2 (inserted as 2, 9, 5).
    pub candidates: Vec<CandidateId>,
}

/// Annotated program for use case `i`: a preamble import plus one
/// goal-carrying snippet.
pub fn program_text(i: usize) -> String {
    let verb = if USE_CASES[i].starts_with("Merge") { "merge" } else { "head" };
    format!(
        "import pandas as pd\n# {}\ndf = pd.read_csv('data_{i}.csv')\nout = df.{verb}()\n",
        USE_CASES[i]
    )
}

pub fn fixture() -> Fixture {
    let store = Arc::new(Store::open_in_memory().unwrap());
    let domain = store.create_domain("pandas", "pandas", "python").unwrap();
    let ucs = store.replace_use_cases(domain.id, &USE_CASES.map(String::from)).unwrap();
    let rows: Vec<NewProgram> = ucs
        .iter()
        .enumerate()
        .map(|(i, u)| NewProgram {
            use_case_id: Some(u.id),
            source_path: None,
            raw_source: program_text(i),
            annotated_source: program_text(i),
            syntactically_valid: true,
            origin: Origin::Generated,
        })
        .collect();
    let programs = store.insert_programs(domain.id, &rows).unwrap();
    let segmented: Vec<_> = programs.iter().map(|p| (p.id, segment(&p.annotated_source).all().cloned().collect())).collect();
    store.replace_snippets(&segmented).unwrap();
    let goals: Vec<Snippet> = store.list_snippets(domain.id).unwrap().into_iter().filter(|s| !s.goal.is_empty()).collect();
    assert_eq!(goals.len(), 16);
    // Mark the file name literal in each snippet as changeable.
    let spans: Vec<_> = goals
        .iter()
        .map(|s| {
            let start = s.code.find('\'').unwrap();
            let end = s.code[start + 1..].find('\'').unwrap() + start + 2;
            (s.id, vec![CodeSpan::new(start, end)])
        })
        .collect();
    store.set_snippet_spans(&spans).unwrap();

    let cand = |members: &[usize], rank: usize, name: &str| PlanCandidate {
        id: CandidateId(0),
        domain_id: domain.id,
        name: name.into(),
        name_pending: false,
        snippet_ids: members.iter().map(|&i| goals[i].id).collect(),
        centroid: Vector::new(vec![rank as f64, 0.0]).unwrap(),
        size: members.len(),
        representative_ids: members.iter().take(3).map(|&i| goals[i].id).collect(),
        rank,
        top: rank < 2,
    };
    let stored = store
        .replace_candidates(
            domain.id,
            &[
                cand(&[14, 15], 2, "Convert and count"),
                cand(&[1, 0, 2, 3, 4, 5, 6, 7, 8], 0, "Merge data frames"),
                cand(&[9, 10, 11, 12, 13], 1, "Write and reshape"),
            ],
        )
        .unwrap();

    let provider_calls = Arc::new(AtomicUsize::new(0));
    let calls = provider_calls.clone();
    let provider = FnProvider::new("contract", move |r: &PromptRequest| {
        calls.fetch_add(1, Ordering::SeqCst);
        let last = r.values.last().map(|v| v.1.clone()).unwrap_or_default();
        if last.contains("FAIL") {
            return Err(LlmError::Malformed("provider refused".into()));
        }
        match r.kind {
            PromptKind::ExplainSelection => Ok("It loads the data file.".into()),
            PromptKind::PredictOutput => Ok("The program prints a sum.\nOUTPUT:\n42\n".into()),
            _ => Err(LlmError::Malformed("unexpected prompt".into())),
        }
    });
    let gateway = Gateway::new(Arc::new(provider), GatewayOptions::default());
    let state = AppState::new(store.clone(), gateway, Duration::from_secs(3600));
    Fixture { app: router(state, None), store, domain, provider_calls, candidates: stored.iter().map(|c| c.id).collect() }
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
    pub headers: HeaderMap,
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>, session: Option<&str>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(s) = session {
        req = req.header(SESSION_HEADER, s);
    }
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    Reply { status, body, headers }
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    call(app, Method::GET, uri, None, None).await
}

pub async fn post(app: &Router, uri: &str, body: Value) -> Reply {
    call(app, Method::POST, uri, Some(body), None).await
}

pub async fn patch(app: &Router, uri: &str, body: Value) -> Reply {
    call(app, Method::PATCH, uri, Some(body), None).await
}

pub async fn delete(app: &Router, uri: &str) -> Reply {
    call(app, Method::DELETE, uri, None, None).await
}

/// Referential integrity of plans and groups across every domain.
pub fn check_integrity(store: &Store) -> Result<(), String> {
    for d in store.list_domains().map_err(|e| e.to_string())? {
        let plans = store.list_plans(d.id).map_err(|e| e.to_string())?;
        let groups = store.list_groups(d.id).map_err(|e| e.to_string())?;
        for p in &plans {
            check_spans(&p.solution, &p.changeable_areas).map_err(|e| format!("plan {}: {e}", p.id))?;
            if !p.canvas_x.is_finite() || !p.canvas_y.is_finite() {
                return Err(format!("plan {} has a non-finite position", p.id));
            }
            if let Some(g) = p.group_id {
                let group = groups.iter().find(|x| x.id == g).ok_or(format!("plan {} points at missing group {g}", p.id))?;
                if !group.plan_ids.contains(&p.id) {
                    return Err(format!("group {g} does not list plan {}", p.id));
                }
            }
            if let Some(c) = p.candidate_id {
                let cand = store.get_candidate(c).map_err(|e| format!("plan {}: {e}", p.id))?;
                if cand.domain_id != d.id {
                    return Err(format!("plan {} links a foreign candidate", p.id));
                }
            }
        }
        for g in &groups {
            if g.plan_ids.is_empty() {
                return Err(format!("group {} is empty", g.id));
            }
            for id in &g.plan_ids {
                let p = plans.iter().find(|p| p.id == *id).ok_or(format!("group {} lists missing plan {id}", g.id))?;
                if p.group_id != Some(g.id) {
                    return Err(format!("plan {id} does not point back at group {}", g.id));
                }
            }
        }
    }
    Ok(())
}
