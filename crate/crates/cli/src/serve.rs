//! Annotation API, mounted under `/v1`:
//!
//! | method | path                    | body                                        |
//! |--------|-------------------------|---------------------------------------------|
//! | GET    | `/v1/images`            | `[{id, width, height, has_mask}]`           |
//! | GET    | `/v1/images/{id}/image` | PNG                                         |
//! | GET    | `/v1/images/{id}/mask`  | mask PNG, `x-mask-version` header           |
//! | PUT    | `/v1/images/{id}/mask`  | mask PNG in, `{id, version}` out            |
//! | GET    | `/v1/palette`           | `[{index, name, color}]`                    |
//! | GET    | `/v1/progress`          | `{images: [{id, labeled_fraction}], ...}`   |
//!
//! A mask's version token is the digest of its PNG bytes, or `none` when the
//! image has no mask yet. A PUT carrying `x-mask-version` is rejected with
//! 409 unless the token is current; a PUT without it overwrites. Errors are
//! `{"error": message}`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use faceparse::checksum::digest64_hex;
use faceparse::dataio::{decode_image, decode_mask, encode_image_png, load_image, load_manifest, DatasetManifest, MANIFEST_FILE};
use faceparse::faceseg::{LabelMask, PALETTE};
use faceparse::netkit::write_atomic;
use faceparse::{Error, Result};
use serde::Serialize;
use serde_json::json;
use tower_http::services::ServeDir;

use crate::args::ServeArgs;

pub const VERSION_HEADER: &str = "x-mask-version";
pub const NO_MASK: &str = "none";
const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

#[derive(Clone, Debug, Serialize)]
pub struct ImageInfo {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub has_mask: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ImageProgress {
    pub id: String,
    /// Share of pixels holding a class other than `back`.
    pub labeled_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Progress {
    pub images: Vec<ImageProgress>,
    pub masked_images: usize,
    pub total_images: usize,
}

struct Dataset {
    manifest: DatasetManifest,
    dims: HashMap<String, (usize, usize)>,
}

#[derive(Clone)]
pub struct AppState {
    data: Arc<Mutex<Dataset>>,
    locks: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
}

impl AppState {
    pub fn new(manifest: DatasetManifest) -> Result<Self> {
        let mut dims = HashMap::new();
        for e in &manifest.entries {
            let (_, h, w) = load_image(&manifest.image_path(e))?.chw()?;
            dims.insert(e.id.clone(), (w, h));
        }
        let locks = manifest.entries.iter().map(|e| (e.id.clone(), Default::default())).collect();
        Ok(Self {
            data: Arc::new(Mutex::new(Dataset { manifest, dims })),
            locks: Arc::new(Mutex::new(locks)),
        })
    }

    fn lock_for(&self, id: &str) -> Option<Arc<tokio::sync::Mutex<()>>> {
        self.locks.lock().unwrap().get(id).cloned()
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Data(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("no image with id `{id}`"))
}

fn read(path: &Path) -> std::result::Result<Vec<u8>, ApiError> {
    std::fs::read(path).map_err(|e| Error::io(path, e).into())
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

fn version_header(token: &str) -> [(header::HeaderName, HeaderValue); 2] {
    let value = HeaderValue::from_str(token).expect("hex digest is a valid header value");
    [
        (header::HeaderName::from_static(VERSION_HEADER), value.clone()),
        (header::ETAG, HeaderValue::from_str(&format!("\"{token}\"")).expect("quoted hex")),
    ]
}

/// Routes of the annotation API, plus the UI bundle at `/` when given.
pub fn router(state: AppState, ui: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/images", get(list_images))
        .route("/images/{id}/image", get(get_image))
        .route("/images/{id}/mask", get(get_mask).put(put_mask))
        .route("/palette", get(palette))
        .route("/progress", get(progress))
        .with_state(state);
    let app = Router::new().nest("/v1", api);
    match ui {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

async fn list_images(State(state): State<AppState>) -> Json<Vec<ImageInfo>> {
    let data = state.data.lock().unwrap();
    Json(
        data.manifest
            .entries
            .iter()
            .map(|e| {
                let (width, height) = data.dims[&e.id];
                ImageInfo {
                    id: e.id.clone(),
                    width,
                    height,
                    has_mask: e.mask.is_some(),
                }
            })
            .collect(),
    )
}

async fn get_image(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> std::result::Result<Response, ApiError> {
    let path = {
        let data = state.data.lock().unwrap();
        let entry = data.manifest.entry(&id).ok_or_else(|| not_found(&id))?;
        data.manifest.image_path(entry)
    };
    let bytes = read(&path)?;
    if bytes.starts_with(PNG_MAGIC) {
        return Ok(png(bytes));
    }
    Ok(png(encode_image_png(&decode_image(&bytes, &path)?)?))
}

fn mask_location(data: &Dataset, id: &str) -> std::result::Result<(Option<PathBuf>, String), ApiError> {
    let entry = data.manifest.entry(id).ok_or_else(|| not_found(id))?;
    let token = entry.mask_digest.clone().unwrap_or_else(|| NO_MASK.to_string());
    Ok((data.manifest.mask_path(entry), token))
}

async fn get_mask(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> std::result::Result<Response, ApiError> {
    let (path, token) = mask_location(&state.data.lock().unwrap(), &id)?;
    match path {
        Some(path) => Ok((version_header(&token), png(read(&path)?)).into_response()),
        None => Ok((
            StatusCode::NOT_FOUND,
            version_header(NO_MASK),
            Json(json!({ "error": format!("image `{id}` has no mask yet") })),
        )
            .into_response()),
    }
}

async fn put_mask(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> std::result::Result<Response, ApiError> {
    let lock = state.lock_for(&id).ok_or_else(|| not_found(&id))?;
    let _guard = lock.lock().await;
    let (relative, target, current, dims) = {
        let data = state.data.lock().unwrap();
        let (path, current) = mask_location(&data, &id)?;
        let entry = data.manifest.entry(&id).expect("checked by mask_location");
        let relative = entry.mask.clone().unwrap_or_else(|| PathBuf::from("masks").join(format!("{id}.png")));
        let target = path.unwrap_or_else(|| data.manifest.root.join(&relative));
        (relative, target, current, data.dims[&id])
    };
    if let Some(sent) = headers.get(VERSION_HEADER) {
        if sent.as_bytes() != current.as_bytes() {
            return Ok((
                StatusCode::CONFLICT,
                version_header(&current),
                Json(json!({
                    "error": "mask changed since it was fetched",
                    "current_version": current,
                })),
            )
                .into_response());
        }
    }
    let mask: LabelMask = decode_mask(&body, &target)?;
    if (mask.width(), mask.height()) != dims {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("mask is {}x{}, image `{id}` is {}x{}", mask.width(), mask.height(), dims.0, dims.1),
        ));
    }
    if let Some(dir) = target.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    write_atomic(&target, &body)?;
    let token = digest64_hex(&body);
    {
        let mut data = state.data.lock().unwrap();
        data.manifest.set_mask(&id, &relative)?;
        let path = data.manifest.root.join(MANIFEST_FILE);
        data.manifest.save(&path)?;
    }
    log::info!("saved mask for `{id}` (version {token})");
    Ok((version_header(&token), Json(json!({ "id": id, "version": token }))).into_response())
}

async fn palette() -> Response {
    Json(PALETTE).into_response()
}

async fn progress(State(state): State<AppState>) -> std::result::Result<Json<Progress>, ApiError> {
    let masks: Vec<(String, Option<PathBuf>)> = {
        let data = state.data.lock().unwrap();
        data.manifest.entries.iter().map(|e| (e.id.clone(), data.manifest.mask_path(e))).collect()
    };
    let mut images = Vec::with_capacity(masks.len());
    for (id, path) in &masks {
        let labeled_fraction = match path {
            Some(p) => {
                let mask = decode_mask(&read(p)?, p)?;
                let labeled = mask.data().iter().filter(|&&c| c != 0).count();
                labeled as f64 / mask.data().len() as f64
            }
            None => 0.0,
        };
        images.push(ImageProgress {
            id: id.clone(),
            labeled_fraction,
        });
    }
    Ok(Json(Progress {
        masked_images: masks.iter().filter(|(_, p)| p.is_some()).count(),
        total_images: masks.len(),
        images,
    }))
}

/// Binds `args.bind` and serves until the process is stopped.
pub fn run(args: &ServeArgs) -> std::result::Result<(), crate::CliError> {
    let manifest = load_manifest(&args.data)?;
    let state = AppState::new(manifest)?;
    let addr: SocketAddr = args
        .bind
        .parse()
        .map_err(|e| crate::CliError::Usage(format!("bad bind address `{}`: {e}", args.bind)))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| crate::CliError::Usage(format!("cannot bind {addr}: {e}")))?;
        eprintln!("serving {} on http://{addr}/v1", args.data.display());
        axum::serve(listener, router(state, args.ui.as_deref()))
            .await
            .map_err(|e| Error::io("serve", e).into())
    })
}
