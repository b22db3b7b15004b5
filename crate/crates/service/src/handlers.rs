use std::sync::Arc;

use attnshift_core::imaging::{EditRecipe, Mode};
use attnshift_core::metrics::evaluate;
use attnshift_core::optimizer::{multi_style, optimize, ObjectiveConfig, OptimizerConfig};
use attnshift_core::saliency::{ProxySaliency, SaliencySource};
use attnshift_toolkit::io::{decode_image, decode_mask, encode_png, fit_mask, MaskFit};
use attnshift_toolkit::netpbm::saliency_to_pgm;
use attnshift_toolkit::recipe::{recipe_hash, recipes_to_json, RecipeDocument};
use attnshift_toolkit::report::report_json;
use attnshift_toolkit::{apply_recipe, ToolError};
use axum::extract::{Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{ApiError, ApiResult};
use crate::session::{JobStatus, Session};
use crate::AppState;

const PNG: &str = "image/png";
const PGM: &str = "image/x-portable-graymap";

fn session(state: &AppState, id: &str) -> ApiResult<Arc<Session>> {
    state.store.get(id).ok_or_else(|| ApiError::not_found(id))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

fn summary(s: &Session) -> Value {
    let st = s.state.read();
    json!({
        "id": s.id,
        "width": st.image.width(),
        "height": st.image.height(),
        "job": st.job,
        "has_recipe": st.recipe.is_some(),
        "styles": st.styles.len(),
    })
}

pub async fn health() -> &'static str {
    "ok"
}

pub async fn create_session(State(state): State<AppState>, mut multipart: Multipart) -> ApiResult<Response> {
    let mut image_bytes = None;
    let mut mask_bytes = None;
    let mut resize = false;
    while let Some(field) = multipart.next_field().await.map_err(multipart_error)? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(multipart_error)?;
        match name.as_str() {
            "image" => image_bytes = Some(bytes),
            "mask" => mask_bytes = Some(bytes),
            "resize_mask" => resize = matches!(&bytes[..], b"true" | b"1" | b"yes"),
            other => {
                return Err(ApiError::bad_request(format!("unexpected field {other:?}")).with_field(other));
            }
        }
    }
    let image_bytes = image_bytes.ok_or_else(|| ApiError::bad_request("missing image").with_field("image"))?;
    let mask_bytes = mask_bytes.ok_or_else(|| ApiError::bad_request("missing mask").with_field("mask"))?;

    let (image, mask) = blocking(move || {
        let image = decode_image(&image_bytes, "image")
            .map_err(|e| ApiError::bad_request(e.to_string()).with_field("image"))?;
        let mask = decode_mask(&mask_bytes, "mask")
            .map_err(|e| ApiError::bad_request(e.to_string()).with_field("mask"))?;
        let fit = if resize { MaskFit::Resize } else { MaskFit::Exact };
        let mask = fit_mask(mask, image.width(), image.height(), fit).map_err(|e| {
            ApiError::bad_request(format!("{e}; send resize_mask=true to resize")).with_field("mask")
        })?;
        Ok::<_, ApiError>((image, mask))
    })
    .await??;

    let s = state.store.create(image, mask);
    Ok((StatusCode::CREATED, Json(summary(&s))).into_response())
}

fn multipart_error(e: axum::extract::multipart::MultipartError) -> ApiError {
    ApiError::new(e.status(), e.body_text())
}

pub async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(Json(summary(&*session(&state, &id)?)))
}

pub async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    if state.store.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(&id))
    }
}

pub async fn status(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let st = s.state.read();
    let (job, message) = match &st.job {
        JobStatus::Idle => ("idle", None),
        JobStatus::Running => ("running", None),
        JobStatus::Done => ("done", None),
        JobStatus::Failed(m) => ("failed", Some(m.clone())),
    };
    Ok(Json(json!({ "job": job, "message": message, "trace": st.trace })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeRequest {
    pub mode: Option<Mode>,
    pub iters: Option<usize>,
    pub seed: Option<u64>,
    pub styles: Option<usize>,
}

pub async fn start_optimize(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Option<Json<OptimizeRequest>>,
) -> ApiResult<Response> {
    let s = session(&state, &id)?;
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let iters = req.iters.unwrap_or(100);
    if iters == 0 || iters > state.config.max_iterations {
        return Err(ApiError::unprocessable(format!(
            "iters must be in [1, {}]",
            state.config.max_iterations
        ))
        .with_field("iters"));
    }
    let styles = req.styles.unwrap_or(1);
    if styles == 0 || styles > state.config.max_styles {
        return Err(
            ApiError::unprocessable(format!("styles must be in [1, {}]", state.config.max_styles)).with_field("styles"),
        );
    }
    let (image, mask) = {
        let mut st = s.state.write();
        if st.job == JobStatus::Running {
            return Err(ApiError::conflict("an optimization job is already running"));
        }
        st.job = JobStatus::Running;
        (st.image.clone(), st.mask.clone())
    };
    let objective = ObjectiveConfig {
        mode: req.mode.unwrap_or_default(),
        ..ObjectiveConfig::default()
    };
    let config = OptimizerConfig {
        iterations: iters,
        seed: req.seed.unwrap_or(0),
        ..OptimizerConfig::default()
    };
    let store = state.store.clone();
    let job_session = s.clone();
    tokio::task::spawn_blocking(move || {
        let source = ProxySaliency::default();
        let result = if styles == 1 {
            optimize(&image, &mask, &source, &objective, &config).map(|r| vec![r])
        } else {
            multi_style(&image, &mask, styles, config.seed, &source, &objective, &config)
        };
        {
            let mut st = job_session.state.write();
            match result {
                Ok(runs) => {
                    let mut recipes: Vec<EditRecipe> = runs.into_iter().map(|r| r.recipe).collect();
                    st.trace = recipes[0].provenance.trace.take();
                    for r in &mut recipes {
                        r.provenance.trace = None;
                    }
                    st.set_recipe(recipes[0].clone());
                    st.styles = recipes;
                    st.job = JobStatus::Done;
                }
                Err(e) => st.job = JobStatus::Failed(e.to_string()),
            }
        }
        store.persist(&job_session);
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job": "running" }))).into_response())
}

#[derive(Debug, Deserialize)]
pub struct RenderQuery {
    pub alpha: Option<f64>,
    pub max_dim: Option<usize>,
}

pub async fn render(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RenderQuery>,
) -> ApiResult<Response> {
    let s = session(&state, &id)?;
    let alpha = q.alpha.unwrap_or(1.0);
    if !(0.0..=1.5).contains(&alpha) {
        return Err(ApiError::unprocessable(format!("alpha = {alpha} is outside [0, 1.5]")).with_field("alpha"));
    }
    let max_dim = q.max_dim.unwrap_or(state.config.preview_dim);
    if max_dim == 0 {
        return Err(ApiError::unprocessable("max_dim must be positive").with_field("max_dim"));
    }
    let png = blocking(move || {
        let st = s.state.read();
        let recipe = match (&st.recipe, alpha == 0.0) {
            (Some(r), _) => r.clone(),
            (None, true) => EditRecipe::identity(8),
            (None, false) => return Err(ApiError::conflict("no recipe yet; optimize or PATCH params first")),
        };
        let key = (alpha.to_bits(), max_dim, recipe_hash(&recipe));
        if let Some(hit) = st.previews.lock().get(&key) {
            return Ok(hit.clone());
        }
        let scaled = st.scaled(max_dim);
        let edited = apply_recipe(&scaled.0, &scaled.1, &recipe, alpha)?;
        let png = Arc::new(encode_png(&edited)?);
        st.previews.lock().insert(key, png.clone());
        Ok::<_, ApiError>(png)
    })
    .await??;
    Ok(([(header::CONTENT_TYPE, PNG)], png.as_ref().clone()).into_response())
}

pub async fn get_params(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let recipe = s.state.read().recipe_or_identity();
    Ok(Json(RecipeDocument::from_recipe(&recipe).to_value()))
}

pub async fn patch_params(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(patch): Json<Value>,
) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    if !patch.is_object() {
        return Err(ApiError::unprocessable("patch must be a JSON object"));
    }
    let doc = {
        let mut st = s.state.write();
        let mut merged = RecipeDocument::from_recipe(&st.recipe_or_identity()).to_value();
        merge(&mut merged, patch);
        let doc = RecipeDocument::from_value(merged)?;
        st.set_recipe(doc.to_recipe()?);
        doc
    };
    state.store.persist(&s);
    Ok(Json(doc.to_value()))
}

/// JSON merge patch: objects merge key by key, anything else replaces.
fn merge(target: &mut Value, patch: Value) {
    match (target, patch) {
        (Value::Object(t), Value::Object(p)) => {
            for (k, v) in p {
                if v.is_null() {
                    t.remove(&k);
                } else {
                    merge(t.entry(k).or_insert(Value::Null), v);
                }
            }
        }
        (t, p) => *t = p,
    }
}

pub async fn styles(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let s = session(&state, &id)?;
    let json = recipes_to_json(&s.state.read().styles);
    Ok(([(header::CONTENT_TYPE, "application/json")], json).into_response())
}

#[derive(Debug, Deserialize)]
pub struct SaliencyQuery {
    pub stage: Option<String>,
}

pub async fn saliency(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SaliencyQuery>,
) -> ApiResult<Response> {
    let s = session(&state, &id)?;
    let after = match q.stage.as_deref().unwrap_or("before") {
        "before" => false,
        "after" => true,
        other => {
            return Err(ApiError::unprocessable(format!("stage must be before or after, got {other:?}")).with_field("stage"))
        }
    };
    let pgm = blocking(move || {
        let st = s.state.read();
        let source = ProxySaliency::default();
        let map = if after {
            let recipe = st.recipe.as_ref().ok_or_else(|| ApiError::conflict("no recipe yet"))?;
            let edited = apply_recipe(&st.image, &st.mask, recipe, 1.0)?;
            source.saliency(&edited)
        } else {
            source.saliency(&st.image)
        }
        .map_err(|e| ApiError::from(ToolError::Core(e)))?;
        Ok::<_, ApiError>(saliency_to_pgm(&map))
    })
    .await??;
    Ok(([(header::CONTENT_TYPE, PGM)], pgm).into_response())
}

pub async fn metrics(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let report = blocking(move || {
        let st = s.state.read();
        let recipe = st.recipe.as_ref().ok_or_else(|| ApiError::conflict("no recipe yet"))?;
        let edited = apply_recipe(&st.image, &st.mask, recipe, 1.0)?;
        let mask = st.mask.binarized();
        evaluate(&st.image, &edited, &mask, &ProxySaliency::default())
            .map_err(|e| ApiError::unprocessable(e.to_string()))
    })
    .await??;
    Ok(Json(report_json(&report)))
}
