use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::Utc;
use dosefind_core::decision::decision_card;
use dosefind_core::document::{parse_designs, table_document};
use dosefind_core::export::{comparison_csv, decisions_csv, reports_csv, side_by_side_csv};
use dosefind_core::sim::{parse_scenarios, reference_suite, SimConfig};
use dosefind_core::{CohortOutcome, DecisionCard, DesignParams, DoseData, TrialStatus, Variant};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use uuid::Uuid;

use crate::error::{ApiError, ApiResult};
use crate::store::{LogRecord, Session, SlotHandle};
use crate::AppState;

fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::body(&e))
}

fn parse_object(body: &[u8]) -> ApiResult<serde_json::Map<String, Value>> {
    match parse::<Value>(body)? {
        Value::Object(m) => Ok(m),
        _ => Err(ApiError::invalid("request body must be a JSON object")),
    }
}

fn params_from(map: serde_json::Map<String, Value>) -> ApiResult<DesignParams> {
    let params: DesignParams =
        serde_json::from_value(Value::Object(map)).map_err(|e| ApiError::body(&e))?;
    params.validate()?;
    Ok(params)
}

fn csv_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

pub async fn health() -> Json<Value> {
    Json(serde_json::json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

#[derive(Deserialize)]
pub struct FormatQuery {
    format: Option<String>,
}

/// Design parameters with `variant` set to `mtpi`, `mtpi2` or `both`.
pub async fn design_table(Query(q): Query<FormatQuery>, body: Bytes) -> ApiResult<Response> {
    let mut map = parse_object(&body)?;
    let designs = match map.remove("variant") {
        None => vec![Variant::Mtpi2],
        Some(Value::String(s)) => parse_designs(&s)?,
        Some(_) => return Err(ApiError::field("variant", "must be a string")),
    };
    let params = params_from(map)?;
    let doc = tokio::task::spawn_blocking(move || table_document(&params, &designs))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    match q.format.as_deref() {
        None | Some("json") => Ok(Json(doc).into_response()),
        Some("csv") => {
            let csv = match doc.tables.as_slice() {
                [a, b] => side_by_side_csv(a, b)?,
                [t] => decisions_csv(t)?,
                _ => unreachable!("one or two designs"),
            };
            Ok(csv_response(csv))
        }
        Some(other) => Err(ApiError::field(
            "format",
            format!("unknown format '{other}'"),
        )),
    }
}

/// Decision card for cumulative data `x` of `n` at one dose.
pub async fn decision(body: Bytes) -> ApiResult<Json<DecisionCard>> {
    let mut map = parse_object(&body)?;
    let mut count = |name: &str| -> ApiResult<u32> {
        let v = map
            .remove(name)
            .ok_or_else(|| ApiError::field(name, "required"))?;
        v.as_u64()
            .and_then(|v| u32::try_from(v).ok())
            .ok_or_else(|| ApiError::field(name, "must be a non-negative integer"))
    };
    let (x, n) = (count("x")?, count("n")?);
    if !map.contains_key("max_n") {
        map.insert("max_n".into(), Value::from(n.max(1)));
    }
    let params = params_from(map)?;
    let data = DoseData::new(x, n)?;
    Ok(Json(decision_card(data, &params)?))
}

#[derive(Deserialize)]
pub struct CreateTrial {
    params: Value,
    num_doses: usize,
}

pub async fn create_trial(State(app): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: CreateTrial = parse(&body)?;
    let params = match req.params {
        Value::Object(m) => params_from(m)?,
        _ => return Err(ApiError::field("params", "must be an object")),
    };
    let session = app.store.create(params, req.num_doses)?;
    let location = format!("/api/trials/{}", session.id);
    let mut resp = (StatusCode::CREATED, Json(session)).into_response();
    resp.headers_mut().insert(
        header::LOCATION,
        HeaderValue::from_str(&location).expect("uuid path is a valid header"),
    );
    Ok(resp)
}

fn lookup(app: &AppState, id: &str) -> ApiResult<SlotHandle> {
    Uuid::parse_str(id)
        .ok()
        .and_then(|id| app.store.get(id))
        .ok_or_else(|| ApiError::NotFound(format!("no trial with id {id}")))
}

#[derive(Serialize)]
pub struct TrialSummary {
    id: Uuid,
    status: TrialStatus,
    version: u64,
    num_doses: usize,
    total_enrolled: u32,
    created_at: chrono::DateTime<Utc>,
    updated_at: chrono::DateTime<Utc>,
}

pub async fn list_trials(State(app): State<AppState>) -> Json<Vec<TrialSummary>> {
    let mut out = Vec::new();
    for handle in app.store.handles() {
        let s = &handle.lock().await.session;
        out.push(TrialSummary {
            id: s.id,
            status: s.state.status,
            version: s.version,
            num_doses: s.num_doses,
            total_enrolled: s.state.total_enrolled,
            created_at: s.created_at,
            updated_at: s.updated_at,
        });
    }
    out.sort_by_key(|t| (t.created_at, t.id));
    Json(out)
}

pub async fn get_trial(
    State(app): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let session = lookup(&app, &id)?.lock().await.session.clone();
    let etag = HeaderValue::from_str(&format!("\"{}\"", session.version)).expect("digits");
    let cached = headers
        .get(header::IF_NONE_MATCH)
        .is_some_and(|v| v == etag);
    let mut resp = if cached {
        StatusCode::NOT_MODIFIED.into_response()
    } else {
        Json(session).into_response()
    };
    resp.headers_mut().insert(header::ETAG, etag);
    resp.headers_mut()
        .insert(header::CACHE_CONTROL, HeaderValue::from_static("no-cache"));
    Ok(resp)
}

#[derive(Deserialize)]
pub struct CohortRequest {
    dlt_count: u32,
    cohort_n: u32,
    expected_version: u64,
}

#[derive(Serialize)]
pub struct CohortResponse {
    session: Session,
    outcome: CohortOutcome,
    card: DecisionCard,
}

fn outcome_card(
    session: &Session,
    dlt_count: u32,
    cohort_n: u32,
) -> ApiResult<(CohortOutcome, DecisionCard)> {
    let (_, outcome) = session
        .state
        .advance(dlt_count, cohort_n, &session.params)?;
    let card = decision_card(outcome.data, &session.params)?;
    Ok((outcome, card))
}

pub async fn post_cohort(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<CohortResponse>> {
    let req: CohortRequest = parse(&body)?;
    let handle = lookup(&app, &id)?;
    let mut slot = handle.lock().await;
    let current = &slot.session;
    if req.expected_version != current.version {
        return Err(ApiError::stale(req.expected_version, current.version));
    }
    let (outcome, card) = outcome_card(current, req.dlt_count, req.cohort_n)?;
    let record = LogRecord::Cohort {
        version: current.version + 1,
        at: Utc::now(),
        dlt_count: req.dlt_count,
        cohort_n: req.cohort_n,
    };
    let next = current.apply(&record)?;
    slot.commit(&record, next.clone())?;
    Ok(Json(CohortResponse {
        session: next,
        outcome,
        card,
    }))
}

#[derive(Deserialize)]
pub struct WhatIfRequest {
    dlt_count: Option<u32>,
    cohort_n: Option<u32>,
}

#[derive(Serialize)]
pub struct Preview {
    dlt_count: u32,
    outcome: CohortOutcome,
    card: DecisionCard,
}

#[derive(Serialize)]
pub struct WhatIfResponse {
    version: u64,
    dose: usize,
    cohort_n: u32,
    previews: Vec<Preview>,
}

/// Would-be outcomes of the next cohort; every DLT count when none is given.
pub async fn whatif(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<WhatIfResponse>> {
    let req: WhatIfRequest = if body.is_empty() {
        WhatIfRequest {
            dlt_count: None,
            cohort_n: None,
        }
    } else {
        parse(&body)?
    };
    let session = lookup(&app, &id)?.lock().await.session.clone();
    if session.state.status != TrialStatus::Active {
        return Err(dosefind_core::Error::Inactive(session.state.status.to_string()).into());
    }
    let remaining = session.params.max_n - session.state.total_enrolled;
    let cohort_n = req
        .cohort_n
        .unwrap_or(session.params.cohort_size.min(remaining));
    let counts: Vec<u32> = match req.dlt_count {
        Some(x) => vec![x],
        None => (0..=cohort_n).collect(),
    };
    let previews = counts
        .into_iter()
        .map(|x| {
            let (outcome, card) = outcome_card(&session, x, cohort_n)?;
            Ok(Preview {
                dlt_count: x,
                outcome,
                card,
            })
        })
        .collect::<ApiResult<Vec<_>>>()?;
    Ok(Json(WhatIfResponse {
        version: session.version,
        dose: session.state.current_dose,
        cohort_n,
        previews,
    }))
}

#[derive(Deserialize, Default)]
pub struct FinalizeRequest {
    expected_version: Option<u64>,
}

/// Ends the trial if it is still running and returns the MTD selection.
pub async fn finalize(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let req: FinalizeRequest = if body.is_empty() {
        FinalizeRequest::default()
    } else {
        parse(&body)?
    };
    let handle = lookup(&app, &id)?;
    let mut slot = handle.lock().await;
    let current = &slot.session;
    if let Some(v) = req.expected_version {
        if v != current.version {
            return Err(ApiError::stale(v, current.version));
        }
    }
    if let (TrialStatus::StoppedToxicity | TrialStatus::Completed, Some(mtd)) =
        (current.state.status, &current.mtd)
    {
        return Ok(Json(mtd.clone()).into_response());
    }
    let record = LogRecord::Finalized {
        version: current.version + 1,
        at: Utc::now(),
    };
    let next = current.apply(&record)?;
    slot.commit(&record, next.clone())?;
    Ok(Json(next.mtd.expect("finalized sessions carry an MTD")).into_response())
}

#[derive(Deserialize)]
pub struct SimulationRequest {
    config: SimConfig,
    scenarios: Option<Value>,
}

pub async fn submit_simulation(State(app): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: SimulationRequest = parse(&body)?;
    req.config.validate()?;
    let scenarios = match req.scenarios {
        None => reference_suite(),
        Some(v) => parse_scenarios(&v.to_string())?,
    };
    if scenarios.is_empty() {
        return Err(ApiError::field("scenarios", "give at least one scenario"));
    }
    for (i, s) in scenarios.iter().enumerate() {
        for &v in &req.config.designs {
            s.design(v, &req.config)
                .map_err(|e| dosefind_core::Error::Scenario {
                    index: i,
                    label: Some(s.label.clone()),
                    message: e.to_string(),
                })?;
        }
    }
    let job = app
        .jobs
        .submit(req.config, scenarios)
        .ok_or_else(|| ApiError::Unavailable("too many simulation jobs pending".into()))?;
    let location = format!("/api/simulations/{}", job.id);
    let mut resp = (StatusCode::ACCEPTED, Json(job)).into_response();
    resp.headers_mut().insert(
        header::LOCATION,
        HeaderValue::from_str(&location).expect("uuid path is a valid header"),
    );
    Ok(resp)
}

fn find_job(app: &AppState, id: &str) -> ApiResult<crate::jobs::Job> {
    Uuid::parse_str(id)
        .ok()
        .and_then(|id| app.jobs.get(id))
        .ok_or_else(|| ApiError::NotFound(format!("no simulation job with id {id}")))
}

pub async fn get_simulation(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    Ok(Json(find_job(&app, &id)?).into_response())
}

fn finished(app: &AppState, id: &str) -> ApiResult<Arc<dosefind_core::document::StudyDocument>> {
    let job = find_job(app, id)?;
    job.result.ok_or_else(|| ApiError::Conflict {
        message: format!(
            "job is {}",
            serde_json::to_value(job.status).expect("status")
        ),
        current_version: None,
    })
}

pub async fn simulation_reports_csv(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    Ok(csv_response(reports_csv(&finished(&app, &id)?.reports)?))
}

pub async fn simulation_comparison_csv(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Response> {
    let doc = finished(&app, &id)?;
    let cmp = doc
        .comparison
        .as_ref()
        .ok_or_else(|| ApiError::NotFound("the job ran a single design".into()))?;
    Ok(csv_response(comparison_csv(cmp)?))
}
