//! Random sequences of well-formed requests never break plan/group
//! referential integrity and never produce a server error.

mod common;

use axum::http::Method;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use common::*;

const STEPS: usize = 500;

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let words = ["df", "merge", "frames", "read", "é", "csv", "x = 1", "\n", "🙂", "group"];
    (0..rng.random_range(0..6)).map(|_| *words.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

async fn run(seed: u64) -> (usize, usize) {
    let f = fixture();
    let d = f.domain.id;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let programs: Vec<Value> = get(&f.app, &format!("/domains/{d}/programs")).await.body.as_array().unwrap().clone();
    let (mut ok, mut rejected) = (0, 0);
    for step in 0..STEPS {
        let plans = f.store.list_plans(d).unwrap();
        let groups = f.store.list_groups(d).unwrap();
        let plan = plans.choose(&mut rng).map(|p| p.id.0);
        let (method, uri, body): (Method, String, Option<Value>) = match (rng.random_range(0..12), plan) {
            (0, _) | (_, None) => (Method::POST, "/plans".into(), Some(json!({"mode": "empty", "domain_id": d}))),
            (1, _) => {
                let p = programs.choose(&mut rng).unwrap();
                let len = p["annotated_source"].as_str().unwrap().len();
                let start = rng.random_range(0..len);
                let end = rng.random_range(start..=len);
                let body = if rng.random_bool(0.5) {
                    json!({"mode": "from_selection", "source_ref": p["id"], "selection": {"start": start, "end": end}})
                } else {
                    json!({"mode": "from_program", "source_ref": p["id"]})
                };
                (Method::POST, "/plans".into(), Some(body))
            }
            (2, _) => {
                let c = f.candidates.choose(&mut rng).unwrap().0;
                (Method::POST, "/plans".into(), Some(json!({"mode": "from_candidate", "source_ref": c})))
            }
            (3, Some(id)) => {
                let mut body = json!({});
                for k in ["name", "goal", "solution"] {
                    if rng.random_bool(0.4) {
                        body[k] = json!(random_text(&mut rng));
                    }
                }
                if rng.random_bool(0.3) {
                    body["canvas_x"] = json!(rng.random_range(-500.0..2000.0));
                }
                if rng.random_bool(0.3) {
                    let v = plans.iter().find(|p| p.id.0 == id).unwrap().version;
                    body["version"] = json!(if rng.random_bool(0.7) { v } else { v + 1 });
                }
                (Method::PATCH, format!("/plans/{id}"), Some(body))
            }
            (4, Some(id)) => (Method::POST, format!("/plans/{id}/duplicate"), None),
            (5, Some(id)) => (Method::DELETE, format!("/plans/{id}"), None),
            (6, Some(id)) => {
                let len = plans.iter().find(|p| p.id.0 == id).unwrap().solution.len();
                let start = rng.random_range(0..=len);
                let end = rng.random_range(start..=len + 1);
                (Method::POST, format!("/plans/{id}/changeable-areas"), Some(json!({"start": start, "end": end})))
            }
            (7, Some(id)) => (Method::DELETE, format!("/plans/{id}/changeable-areas/{}", rng.random_range(0..3)), None),
            (8, Some(_)) => {
                let n = rng.random_range(1..=plans.len().min(4));
                let ids: Vec<i64> = plans.choose_multiple(&mut rng, n).map(|p| p.id.0).collect();
                let body = json!({"domain_id": d, "name": random_text(&mut rng), "plan_ids": ids, "move": rng.random_bool(0.5)});
                (Method::POST, "/groups".into(), Some(body))
            }
            (9, Some(_)) if !groups.is_empty() => {
                let g = groups.choose(&mut rng).unwrap();
                let n = rng.random_range(1..=plans.len().min(3));
                let ids: Vec<i64> = plans.choose_multiple(&mut rng, n).map(|p| p.id.0).collect();
                let body = json!({"name": random_text(&mut rng), "plan_ids": ids, "move": rng.random_bool(0.5)});
                (Method::PATCH, format!("/groups/{}", g.id), Some(body))
            }
            (10, Some(_)) if !groups.is_empty() => {
                (Method::DELETE, format!("/groups/{}", groups.choose(&mut rng).unwrap().id), None)
            }
            (_, Some(id)) => {
                let c = ["name", "goal", "solution"].choose(&mut rng).unwrap();
                let uri = if rng.random_bool(0.5) { format!("/plans/{id}/similar?component={c}") } else { format!("/plans/{id}/context") };
                (Method::GET, uri, None)
            }
        };
        let r = call(&f.app, method.clone(), &uri, body.clone(), None).await;
        assert!(!r.status.is_server_error(), "step {step}: {method} {uri} {body:?} -> {} {}", r.status, r.body);
        if r.status.is_success() {
            ok += 1;
        } else {
            assert!(r.body["code"].is_string(), "step {step}: error without code: {}", r.body);
            rejected += 1;
        }
        if let Err(e) = check_integrity(&f.store) {
            panic!("step {step}: {method} {uri} {body:?} broke integrity: {e}");
        }
    }
    (ok, rejected)
}

#[tokio::test]
async fn random_request_sequences_preserve_integrity() {
    for seed in [1, 2, 3] {
        let (ok, rejected) = run(seed).await;
        assert_eq!(ok + rejected, STEPS);
        // The generator is mostly valid; rejections come from deliberate
        // stale versions, overlaps and group conflicts.
        assert!(ok > STEPS / 2, "seed {seed}: only {ok} successes");
    }
}
