use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use fairpia_server::session::{Action, Session, Snapshot, StepOutcome};
use fairpia_server::{router, AppState, History};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let builder = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(v) => builder.header(header::CONTENT_TYPE, "application/json").body(Body::from(v.to_string())),
        None => builder.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()))
    };
    (status, value)
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, Method::POST, uri, Some(body)).await
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, Method::GET, uri, None).await
}

fn app() -> Router {
    router(AppState::default())
}

fn snapshot(v: Value) -> Snapshot {
    serde_json::from_value(v).unwrap()
}

fn outcome(v: Value) -> StepOutcome {
    serde_json::from_value(v).unwrap()
}

async fn create(app: &Router, body: Value) -> Snapshot {
    let (status, v) = post(app, "/sessions", body).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    snapshot(v)
}

fn starfish() -> Value {
    json!({ "data": { "kind": "starfish", "m": 100 }, "n": 34 })
}

/// Twenty points on a smooth planar arc, eight control points.
fn small_points() -> Value {
    let points: Vec<Vec<f64>> = (0..20)
        .map(|i| {
            let t = i as f64 / 19.0;
            vec![t, 0.3 * (2.0 * std::f64::consts::PI * t).sin() + 0.05 * (7.0 * t).cos()]
        })
        .collect();
    json!({ "kind": "points", "points": points })
}

#[tokio::test]
async fn create_starfish_session() {
    let app = app();
    let snap = create(&app, starfish()).await;
    assert_eq!(snap.control.len(), 34);
    assert_eq!(snap.n, 34);
    assert_eq!(snap.k, 0);
    assert_eq!(snap.data_count, 100);
    assert_eq!(snap.knots.len(), 38);
    assert_eq!((snap.metrics.fit_rel, snap.metrics.energy_rel, snap.metrics.iter_rel), (1.0, 1.0, 1.0));
    assert_eq!(snap.curve.len(), 400);
    assert!(snap.comb.samples.len() <= 400);

    let (status, v) = get(&app, &format!("/sessions/{}", snap.id)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snapshot(v), snap);
}

#[tokio::test]
async fn create_rejects_bad_input() {
    let app = app();
    let (status, _) = call(&app, Method::POST, "/sessions", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let req = Request::post("/sessions").body(Body::from("{\"data\": ")).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::BAD_REQUEST);

    let (status, _) =
        post(&app, "/sessions", json!({ "data": { "kind": "file", "path": "/etc/passwd" }, "n": 5 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, v) = post(&app, "/sessions", json!({ "data": small_points(), "n": 21 })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert!(v["error"].is_string());

    let (status, _) = post(&app, "/sessions", json!({ "data": small_points(), "n": 8, "r": 4 })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let ragged =
        json!({ "kind": "points", "points": [[0.0, 0.0], [1.0, 2.0, 3.0], [2.0, 0.0], [3.0, 1.0], [4.0, 0.0]] });
    let (status, _) = post(&app, "/sessions", json!({ "data": ragged, "n": 4 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unknown_session_is_404() {
    let app = app();
    for uri in ["/sessions/nope", "/sessions/nope/comb", "/sessions/nope/history"] {
        assert_eq!(get(&app, uri).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    assert_eq!(post(&app, "/sessions/nope/step", json!({ "count": 1 })).await.0, StatusCode::NOT_FOUND);
    assert_eq!(post(&app, "/sessions/nope/weights", json!({ "ranges": [] })).await.0, StatusCode::NOT_FOUND);
    assert_eq!(post(&app, "/sessions/nope/knots", json!({ "values": [0.5] })).await.0, StatusCode::NOT_FOUND);
    assert_eq!(post(&app, "/sessions/nope/run", json!({})).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn single_steps_compose() {
    let app = app();
    let a = create(&app, starfish()).await;
    let b = create(&app, starfish()).await;
    post(&app, &format!("/sessions/{}/step", a.id), json!({ "count": 1 })).await;
    let (_, va) = post(&app, &format!("/sessions/{}/step", a.id), json!({ "count": 1 })).await;
    let (_, vb) = post(&app, &format!("/sessions/{}/step", b.id), json!({ "count": 2 })).await;
    let (oa, ob) = (outcome(va), outcome(vb));
    assert_eq!(oa.snapshot.k, 2);
    assert_eq!(oa.trace.len(), 1);
    assert_eq!(ob.trace.len(), 2);
    assert_eq!(oa.snapshot.control, ob.snapshot.control);
    assert_eq!(oa.snapshot.metrics, ob.snapshot.metrics);
}

#[tokio::test]
async fn knot_insertion_preserves_shape() {
    let app = app();
    let snap = create(&app, starfish()).await;
    let uri = format!("/sessions/{}/knots", snap.id);
    let (status, v) = post(&app, &uri, json!({ "values": [0.3, 0.6] })).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let after = snapshot(v);
    assert_eq!(after.n, snap.n + 2);
    assert_eq!(after.omega.len(), snap.n + 2);
    let gap = snap
        .curve
        .iter()
        .zip(&after.curve)
        .flat_map(|(p, q)| p.iter().zip(q).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    assert!(gap < 1e-12, "curve moved by {gap}");

    for bad in [json!([0.0]), json!([1.0]), json!([-0.2]), json!([0.5, 1.5])] {
        let (status, _) = post(&app, &uri, json!({ "values": bad })).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }
    // a rejected batch leaves the session as it was
    let (_, v) = get(&app, &format!("/sessions/{}", snap.id)).await;
    assert_eq!(snapshot(v).n, snap.n + 2);

    let (status, _) = post(&app, &uri, json!({ "values": [0.45, 0.45, 0.45, 0.45] })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn weights_paint_without_moving_controls() {
    let app = app();
    let snap = create(&app, starfish()).await;
    let uri = format!("/sessions/{}/weights", snap.id);
    post(&app, &format!("/sessions/{}/step", snap.id), json!({ "count": 5 })).await;
    let (_, v) = get(&app, &format!("/sessions/{}", snap.id)).await;
    let before = snapshot(v);

    let (status, v) = post(
        &app,
        &uri,
        json!({ "base_omega": 1e-7, "ranges": [
            { "from_index": 5, "to_index": 20, "omega": 3e-6 },
            { "from_index": 10, "to_index": 12, "omega": 1e-4 }
        ] }),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let after = snapshot(v);
    assert_eq!(after.control, before.control);
    assert_eq!(after.k, before.k);
    assert_eq!(after.round, 2);
    assert_eq!(after.omega[0], 1e-7);
    assert_eq!(after.omega[4], 3e-6);
    assert_eq!(after.omega[9..12], [1e-4; 3]);
    assert_eq!(after.omega[12], 3e-6);
    assert_eq!(after.omega[20], 1e-7);
    assert_ne!(after.diagnostics, before.diagnostics);

    let (status, v) = post(&app, &uri, json!({ "ranges": [] })).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snapshot(v).omega, after.omega);

    for bad in [
        json!({ "ranges": [{ "from_index": 0, "to_index": 3, "omega": 0.1 }] }),
        json!({ "ranges": [{ "from_index": 30, "to_index": 35, "omega": 0.1 }] }),
        json!({ "ranges": [{ "from_index": 6, "to_index": 3, "omega": 0.1 }] }),
        json!({ "ranges": [{ "from_index": 1, "to_index": 3, "omega": 1.5 }] }),
        json!({ "base_omega": -1.0 }),
    ] {
        let (status, _) = post(&app, &uri, bad.clone()).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
    }
    let (_, v) = get(&app, &format!("/sessions/{}", snap.id)).await;
    assert_eq!(snapshot(v).omega, after.omega);
}

#[tokio::test]
async fn run_converges_on_small_instance() {
    let app = app();
    let snap =
        create(&app, json!({ "data": small_points(), "n": 8, "weights": { "kind": "uniform", "omega": 1e-3 } })).await;
    let tol = 1e-10;
    let (status, v) =
        post(&app, &format!("/sessions/{}/run", snap.id), json!({ "tol": tol, "max_iters": 100000 })).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let out = outcome(v);
    assert_eq!(out.stop_reason, Some(fairpia::StopReason::Converged));
    let n = out.trace.len();
    assert!(n >= 2);
    assert!((out.trace[n - 1].iter_rel - out.trace[n - 2].iter_rel).abs() < tol);
    assert_eq!(out.snapshot.k, n);
}

#[tokio::test]
async fn diverged_session_is_gone() {
    let app = app();
    let body = json!({ "data": small_points(), "n": 8, "mu_policy": { "explicit": vec![50.0; 8] } });
    let snap = create(&app, body).await;
    let uri = format!("/sessions/{}/step", snap.id);
    let (status, v) = post(&app, &uri, json!({ "count": 2000 })).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let out = outcome(v);
    assert_eq!(out.stop_reason, Some(fairpia::StopReason::Diverged));
    assert!(out.trace.iter().all(|r| r.fit_abs.is_finite() && r.iter_rel.is_finite()));
    assert!(matches!(out.snapshot.status, fairpia_server::session::Status::Diverged { .. }));

    let (status, v) = post(&app, &uri, json!({ "count": 1 })).await;
    assert_eq!(status, StatusCode::GONE);
    assert!(v["error"].as_str().unwrap().contains("diverged"));
    assert_eq!(post(&app, &format!("/sessions/{}/run", snap.id), json!({})).await.0, StatusCode::GONE);
    // still readable
    assert_eq!(get(&app, &format!("/sessions/{}", snap.id)).await.0, StatusCode::OK);
}

#[tokio::test]
async fn comb_endpoint_and_fairing_lowers_peak_curvature() {
    let app = app();
    let snap = create(&app, starfish()).await;
    let comb_uri = format!("/sessions/{}/comb?samples=400", snap.id);
    let (status, v) = get(&app, &comb_uri).await;
    assert_eq!(status, StatusCode::OK);
    let before: fairpia::geometry::CurvatureComb = serde_json::from_value(v).unwrap();
    assert!(!before.samples.is_empty() && before.samples.len() <= 400);

    post(&app, &format!("/sessions/{}/weights", snap.id), json!({ "base_omega": 1e-5 })).await;
    let (status, v) = post(&app, &format!("/sessions/{}/run", snap.id), json!({ "tol": 1e-6 })).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let (_, v) = get(&app, &comb_uri).await;
    let after: fairpia::geometry::CurvatureComb = serde_json::from_value(v).unwrap();
    assert!(after.max_curvature() <= before.max_curvature(), "{} > {}", after.max_curvature(), before.max_curvature());

    assert_eq!(get(&app, &format!("/sessions/{}/comb?samples=1", snap.id)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(get(&app, &format!("/sessions/{}/comb?samples=x", snap.id)).await.0, StatusCode::BAD_REQUEST);
}

fn affected_controls(knots: &[f64], degree: usize, lo: f64, hi: f64) -> (usize, usize) {
    let n = knots.len() - degree - 1;
    let hits: Vec<usize> = (0..n).filter(|&j| knots[j] < hi && knots[j + degree + 1] > lo).collect();
    (hits[0] + 1, hits[hits.len() - 1] + 1)
}

#[tokio::test]
async fn second_round_improves_fit() {
    let app = app();
    let snap = create(&app, starfish()).await;
    let id = snap.id.clone();
    post(&app, &format!("/sessions/{id}/weights"), json!({ "base_omega": 1e-5 })).await;
    let (_, v) = post(&app, &format!("/sessions/{id}/run"), json!({ "tol": 1e-6 })).await;
    let round1 = outcome(v);
    assert_eq!(round1.snapshot.round, 1);

    // two knots in every span of [0.2, 0.5]
    let (lo, hi) = (0.2, 0.5);
    let spans: Vec<(f64, f64)> =
        snap.knots.windows(2).filter(|w| w[1] > w[0] && w[0] >= lo && w[1] <= hi).map(|w| (w[0], w[1])).collect();
    assert!(!spans.is_empty());
    let values: Vec<f64> = spans.iter().flat_map(|&(a, b)| [a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0]).collect();
    let (status, v) = post(&app, &format!("/sessions/{id}/knots"), json!({ "values": values })).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let refined = snapshot(v);
    assert_eq!(refined.round, 2);
    assert_eq!(refined.n, 34 + values.len());

    let (from, to) = affected_controls(&refined.knots, refined.degree, lo, hi);
    let (status, _) = post(
        &app,
        &format!("/sessions/{id}/weights"),
        json!({ "ranges": [{ "from_index": from, "to_index": to, "omega": 6e-6 }] }),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (_, v) = post(&app, &format!("/sessions/{id}/run"), json!({ "tol": 1e-6 })).await;
    let round2 = outcome(v);
    assert_eq!(round2.snapshot.round, 2);
    assert!(round2.trace[0].k > round1.snapshot.k);
    assert!(
        round2.snapshot.metrics.fit_abs < round1.snapshot.metrics.fit_abs,
        "{} vs {}",
        round2.snapshot.metrics.fit_abs,
        round1.snapshot.metrics.fit_abs
    );

    let (_, v) = get(&app, &format!("/sessions/{id}/history")).await;
    let history: History = serde_json::from_value(v).unwrap();
    assert_eq!(history.rounds.len(), 2);
    assert_eq!(history.rounds[1].initial_control.len(), refined.n);
}

#[tokio::test]
async fn history_replays_bit_exactly() {
    let app = app();
    let snap = create(&app, starfish()).await;
    let id = snap.id.clone();
    post(&app, &format!("/sessions/{id}/weights"), json!({ "base_omega": 1e-5 })).await;
    post(&app, &format!("/sessions/{id}/step"), json!({ "count": 7 })).await;
    post(&app, &format!("/sessions/{id}/knots"), json!({ "values": [0.25, 0.7] })).await;
    post(
        &app,
        &format!("/sessions/{id}/weights"),
        json!({ "ranges": [{ "from_index": 3, "to_index": 9, "omega": 6e-6 }] }),
    )
    .await;
    post(&app, &format!("/sessions/{id}/run"), json!({ "tol": 1e-6 })).await;
    let (_, v) = get(&app, &format!("/sessions/{id}")).await;
    let last = snapshot(v);
    let (_, v) = get(&app, &format!("/sessions/{id}/history")).await;
    let history: History = serde_json::from_value(v).unwrap();
    assert_eq!(history.actions.len(), 5);

    let replayed = Session::replay("r".into(), history.create.clone(), &history.actions).unwrap();
    assert_eq!(replayed.state().control.row_vecs(), last.control);

    // the same log played through a fresh server
    let other = self::app();
    let fresh = create(&other, serde_json::to_value(&history.create).unwrap()).await;
    for action in &history.actions {
        let (uri, body) = match action {
            Action::Weights(w) => ("weights", serde_json::to_value(w).unwrap()),
            Action::Step { count } => ("step", json!({ "count": count })),
            Action::Run { steps, .. } => ("step", json!({ "count": steps })),
            Action::Knots { values } => ("knots", json!({ "values": values })),
        };
        let (status, _) = post(&other, &format!("/sessions/{}/{uri}", fresh.id), body).await;
        assert_eq!(status, StatusCode::OK);
    }
    let (_, v) = get(&other, &format!("/sessions/{}", fresh.id)).await;
    let end = snapshot(v);
    assert_eq!(end.control, last.control);
    assert_eq!(end.omega, last.omega);
    assert_eq!(end.k, last.k);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn background_run_locks_session_only() {
    let app = app();
    let busy = create(&app, starfish()).await;
    let other = create(&app, starfish()).await;
    let (status, v) = post(
        &app,
        &format!("/sessions/{}/run", busy.id),
        json!({ "tol": 0.0, "max_iters": 1_000_000_000usize, "background": true }),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    assert_eq!(snapshot(v).status, fairpia_server::session::Status::Running);

    assert_eq!(post(&app, &format!("/sessions/{}/step", busy.id), json!({ "count": 1 })).await.0, StatusCode::CONFLICT);
    assert_eq!(post(&app, &format!("/sessions/{}/run", busy.id), json!({})).await.0, StatusCode::CONFLICT);
    assert_eq!(get(&app, &format!("/sessions/{}/history", busy.id)).await.0, StatusCode::CONFLICT);
    let (status, v) = get(&app, &format!("/sessions/{}", busy.id)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(snapshot(v).status, fairpia_server::session::Status::Running);
    assert_eq!(get(&app, &format!("/sessions/{}/comb", busy.id)).await.0, StatusCode::OK);

    // other sessions are unaffected
    assert_eq!(post(&app, &format!("/sessions/{}/step", other.id), json!({ "count": 3 })).await.0, StatusCode::OK);

    tokio::time::sleep(Duration::from_millis(150)).await;
    let (status, v) = post(&app, &format!("/sessions/{}/cancel", busy.id), json!({})).await;
    assert_eq!(status, StatusCode::ACCEPTED);
    assert_eq!(v["running"], true);

    let mut idle = None;
    for _ in 0..200 {
        let (_, v) = get(&app, &format!("/sessions/{}", busy.id)).await;
        let snap = snapshot(v);
        if snap.status == fairpia_server::session::Status::Idle {
            idle = Some(snap);
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    let idle = idle.expect("run did not stop after cancel");
    assert!(idle.k > 0);
    assert_eq!(post(&app, &format!("/sessions/{}/step", busy.id), json!({ "count": 1 })).await.0, StatusCode::OK);

    let (_, v) = get(&app, &format!("/sessions/{}/history", busy.id)).await;
    let history: History = serde_json::from_value(v).unwrap();
    let replayed = Session::replay("r".into(), history.create, &history.actions).unwrap();
    let (_, v) = get(&app, &format!("/sessions/{}", busy.id)).await;
    assert_eq!(replayed.state().control.row_vecs(), snapshot(v).control);
}

#[tokio::test]
async fn cors_and_delete() {
    let app = app();
    let snap = create(&app, starfish()).await;
    let req = Request::get(format!("/sessions/{}", snap.id))
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");

    let (status, _) = call(&app, Method::DELETE, &format!("/sessions/{}", snap.id), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    assert_eq!(get(&app, &format!("/sessions/{}", snap.id)).await.0, StatusCode::NOT_FOUND);
}
