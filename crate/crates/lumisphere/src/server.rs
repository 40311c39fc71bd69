//! Local HTTP service over a workspace, for the annotation and review UI.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use lumisphere_core::analysis::{CrossSetPairing, PairOrientation};
use lumisphere_core::estimate::ChannelLighting;
use lumisphere_core::render::{render_sphere, shared_scale, RenderSpec};
use serde::{Deserialize, Serialize};

use crate::pipeline::{annotation_hash, process_image, PipelineOptions};
use crate::report::{cross_from_records, within_from_records};
use crate::schema::{Annotation, AnnotationDoc, ImageRecord};
use crate::workspace::{ImageResults, Workspace};
use crate::{io, Error};

/// Structured error body: `{"error": {"kind", "message", "module"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub kind: String,
    pub message: String,
    pub module: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    detail: ErrorDetail,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, module: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            detail: ErrorDetail {
                kind: kind.into(),
                module: module.into(),
                message: message.into(),
            },
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "not-found",
            "serve-api",
            format!("no {what} for image {id:?}"),
        )
    }

    fn in_module(mut self, module: &str) -> Self {
        self.detail.module = module.into();
        self
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Core(_) | Error::Packing { .. } | Error::EmptyInput => StatusCode::UNPROCESSABLE_ENTITY,
            Error::InvalidAnnotation(_) | Error::InvalidCrop(_) => StatusCode::BAD_REQUEST,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.kind(), e.module(), e.to_string())
    }
}

impl From<lumisphere_core::Error> for ApiError {
    fn from(e: lumisphere_core::Error) -> Self {
        Error::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.detail })).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

struct AppState {
    ws: Workspace,
    /// Images with an annotation write or fit in progress.
    busy: Mutex<HashSet<String>>,
}

/// Exclusive claim on one image's write path, released on drop.
struct Claim {
    state: Arc<AppState>,
    id: String,
}

impl Claim {
    fn take(state: &Arc<AppState>, id: &str) -> ApiResult<Self> {
        let mut busy = state.busy.lock().expect("busy set lock");
        if !busy.insert(id.to_string()) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "busy",
                "serve-api",
                format!("a fit or annotation update for {id:?} is already running"),
            ));
        }
        Ok(Self {
            state: state.clone(),
            id: id.to_string(),
        })
    }
}

impl Drop for Claim {
    fn drop(&mut self) {
        if let Ok(mut busy) = self.state.busy.lock() {
            busy.remove(&self.id);
        }
    }
}

/// One entry of `GET /images`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageSummary {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub spheres: usize,
    /// Hash of the current annotation and parameters, if annotated.
    pub annotation_hash: Option<String>,
    /// Whether stored results match the current annotation.
    pub fit_current: bool,
}

fn options(ws: &Workspace) -> ApiResult<PipelineOptions> {
    Ok(PipelineOptions {
        em: ws.params()?,
        ..PipelineOptions::default()
    })
}

fn image_path(ws: &Workspace, id: &str) -> ApiResult<std::path::PathBuf> {
    ws.image_path(id)?.ok_or_else(|| ApiError::not_found("image", id))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            "serve-api",
            e.to_string(),
        )
    })?
}

async fn list_images(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<ImageSummary>>> {
    blocking(move || {
        let ws = &state.ws;
        let opts = options(ws)?;
        let mut out = Vec::new();
        for (id, path) in ws.images()? {
            let (width, height) = io::dimensions(&path)?;
            let annotations = ws.read_annotations(&id)?;
            let hash = annotations.as_ref().map(|a| annotation_hash(a, &opts));
            let stored = ws.read_results(&id)?;
            out.push(ImageSummary {
                spheres: annotations.map_or(0, |a| a.len()),
                fit_current: matches!((&hash, &stored), (Some(h), Some(r)) if *h == r.annotation_hash),
                annotation_hash: hash,
                image_id: id,
                width,
                height,
            });
        }
        Ok(Json(out))
    })
    .await
}

async fn raw_image(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let path = image_path(&state.ws, &id)?;
    let bytes = tokio::fs::read(&path).await.map_err(|e| Error::io(&path, e))?;
    let png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let mime = if png { "image/png" } else { "image/jpeg" };
    Ok(([(header::CONTENT_TYPE, mime)], bytes).into_response())
}

async fn get_annotation(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<Vec<Annotation>>> {
    image_path(&state.ws, &id)?;
    state
        .ws
        .read_annotations(&id)?
        .map(Json)
        .ok_or_else(|| ApiError::not_found("annotation", &id))
}

async fn put_annotation(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Vec<Annotation>>> {
    let path = image_path(&state.ws, &id)?;
    let doc: AnnotationDoc = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid-annotation",
            "serve-api",
            e.to_string(),
        )
    })?;
    let annotations = doc.into_vec();
    if annotations.is_empty() {
        return Err(Error::InvalidAnnotation("no spheres given".into()).into());
    }
    let (w, h) = io::dimensions(&path)?;
    for a in &annotations {
        if a.image_id != id {
            return Err(Error::InvalidAnnotation(format!("annotation names image {:?}", a.image_id)).into());
        }
        if !(a.approx.r > 0.0 && a.approx.r.is_finite() && a.approx.cx.is_finite() && a.approx.cy.is_finite()) {
            return Err(Error::InvalidAnnotation("circle must have finite center and positive radius".into()).into());
        }
        if let Some(b) = a.crop_box {
            if u64::from(b.x) + u64::from(b.w) > u64::from(w) || u64::from(b.y) + u64::from(b.h) > u64::from(h) {
                return Err(Error::InvalidCrop(b.to_string()).into());
            }
        }
    }
    let _claim = Claim::take(&state, &id)?;
    state.ws.write_annotations(&id, &annotations)?;
    Ok(Json(annotations))
}

fn missing_annotation(id: &str) -> ApiError {
    ApiError::new(
        StatusCode::CONFLICT,
        "missing-annotation",
        "serve-api",
        format!("image {id:?} has no annotation; submit one first"),
    )
}

async fn fit(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ImageResults>> {
    let path = image_path(&state.ws, &id)?;
    let claim = Claim::take(&state, &id)?;
    blocking(move || {
        let ws = &claim.state.ws;
        let annotations = ws.read_annotations(&id)?.ok_or_else(|| missing_annotation(&id))?;
        let opts = options(ws)?;
        let hash = annotation_hash(&annotations, &opts);
        let results = match ws.read_results(&id)? {
            Some(r) if r.annotation_hash == hash => r,
            _ => {
                let r = process_image(&id, &path, &annotations, &opts)?;
                ws.write_results(&r)?;
                r
            }
        };
        match (results.records.is_empty(), results.failures.first()) {
            (true, Some(f)) => Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                &f.kind,
                &f.module,
                f.message.clone(),
            )),
            _ => Ok(Json(results)),
        }
    })
    .await
}

async fn lighting(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ImageResults>> {
    image_path(&state.ws, &id)?;
    state
        .ws
        .read_results(&id)?
        .map(Json)
        .ok_or_else(|| ApiError::not_found("fit results", &id))
}

#[derive(Debug, Deserialize)]
struct RenderQuery {
    #[serde(default = "default_channel")]
    channel: String,
    #[serde(default)]
    sphere: usize,
    #[serde(default = "default_render_size")]
    size: usize,
    shared: Option<String>,
}

fn default_channel() -> String {
    "gray".into()
}

fn default_render_size() -> usize {
    256
}

const MAX_RENDER_SIZE: usize = 2048;

fn stored_records(ws: &Workspace, id: &str) -> ApiResult<Vec<ImageRecord>> {
    Ok(ws
        .read_results(id)?
        .ok_or_else(|| ApiError::not_found("fit results", id))?
        .records)
}

fn channel_of(record: &ImageRecord, channel: &str) -> ApiResult<lumisphere_core::LightingEnv> {
    record.channels.by_name(channel).copied().ok_or_else(|| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid-channel",
            "serve-api",
            format!("channel must be one of {:?}", ChannelLighting::NAMES),
        )
    })
}

async fn render(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<RenderQuery>,
) -> ApiResult<Response> {
    if !(8..=MAX_RENDER_SIZE).contains(&q.size) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid-spec",
            "serve-api",
            format!("size must lie in [8, {MAX_RENDER_SIZE}]"),
        ));
    }
    let png = blocking(move || {
        let ws = &state.ws;
        let records = stored_records(ws, &id)?;
        let record = records
            .iter()
            .find(|r| r.sphere == q.sphere)
            .ok_or_else(|| ApiError::not_found(&format!("sphere {}", q.sphere), &id))?;
        let base = RenderSpec::centered(q.size);
        let own = render_sphere(&channel_of(record, &q.channel)?, &base)?;
        let spec = match &q.shared {
            None => base,
            Some(other) => {
                let mut all = vec![own.clone()];
                for r in stored_records(ws, other)? {
                    all.push(render_sphere(&channel_of(&r, &q.channel)?, &base)?);
                }
                RenderSpec {
                    shared_scale: shared_scale(&all),
                    ..base
                }
            }
        };
        let display = render_sphere(&channel_of(record, &q.channel)?, &spec)?.display();
        Ok(io::encode_gray_png(&display)?)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

fn all_records(ws: &Workspace) -> ApiResult<Vec<ImageRecord>> {
    let mut out = Vec::new();
    for (id, _) in ws.images()? {
        if let Some(r) = ws.read_results(&id)? {
            out.extend(r.records);
        }
    }
    Ok(out)
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct CrossQuery {
    #[serde(default)]
    pairing: CrossSetPairing,
}

async fn report_cross(State(state): State<Arc<AppState>>, Query(q): Query<CrossQuery>) -> ApiResult<Response> {
    blocking(move || {
        let sets = state.ws.sets()?.ok_or_else(|| {
            ApiError::new(
                StatusCode::CONFLICT,
                "missing-sets",
                "serve-api",
                "workspace has no sets.json",
            )
        })?;
        let records = all_records(&state.ws)?;
        let report = cross_from_records(&records, &sets, q.pairing)
            .map_err(|e| ApiError::from(e).in_module("consistency-analysis"))?;
        Ok(Json(report).into_response())
    })
    .await
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase")]
struct WithinQuery {
    #[serde(default)]
    orientation: PairOrientation,
}

async fn report_within(State(state): State<Arc<AppState>>, Query(q): Query<WithinQuery>) -> ApiResult<Response> {
    blocking(move || {
        let records = all_records(&state.ws)?;
        let report = within_from_records(&records, q.orientation)
            .map_err(|e| ApiError::from(e).in_module("consistency-analysis"))?
            .ok_or_else(|| {
                ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "empty-input",
                    "consistency-analysis",
                    "no image has two fitted spheres",
                )
            })?;
        Ok(Json(report).into_response())
    })
    .await
}

/// Routes of the service over `ws`.
pub fn router(ws: Workspace) -> Router {
    let state = Arc::new(AppState {
        ws,
        busy: Mutex::new(HashSet::new()),
    });
    Router::new()
        .route("/images", get(list_images))
        .route("/images/{id}/raw", get(raw_image))
        .route("/images/{id}/annotation", put(put_annotation).get(get_annotation))
        .route("/images/{id}/fit", post(fit))
        .route("/images/{id}/lighting", get(lighting))
        .route("/images/{id}/render", get(render))
        .route("/report/cross", get(report_cross))
        .route("/report/within", get(report_within))
        .with_state(state)
}

/// Serves `ws` on `addr` until interrupted.
pub async fn serve(ws: Workspace, addr: SocketAddr) -> crate::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| Error::Bind {
            addr: addr.to_string(),
            source,
        })?;
    let local = listener.local_addr().map_err(|e| Error::io("<socket>", e))?;
    eprintln!("serving {} on http://{local}", ws.root().display());
    axum::serve(listener, router(ws))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io("<socket>", e))
}
