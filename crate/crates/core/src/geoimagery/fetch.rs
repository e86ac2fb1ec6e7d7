//! Batch imagery download with caching, retries and a global rate limit.

use std::fmt;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use image::{DynamicImage, ImageFormat};
use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GeoPoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageKind {
    Satellite,
    Streetview,
}

impl ImageKind {
    pub fn name(self) -> &'static str {
        match self {
            ImageKind::Satellite => "satellite",
            ImageKind::Streetview => "streetview",
        }
    }
}

impl fmt::Display for ImageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImageKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "satellite" | "sat" => Ok(ImageKind::Satellite),
            "streetview" | "gsv" => Ok(ImageKind::Streetview),
            _ => Err(Error::Data(format!("unknown image kind {s:?}"))),
        }
    }
}

/// One image to acquire at a household location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRequest {
    pub id: String,
    pub kind: ImageKind,
    pub point: GeoPoint,
    /// Satellite only.
    pub zoom: u8,
    pub width: u32,
    pub height: u32,
    /// Street view only, degrees.
    pub fov: f64,
    /// Street view only; `None` leaves the provider default.
    pub heading: Option<f64>,
}

impl ImageRequest {
    pub const DEFAULT_ZOOM: u8 = 19;

    /// 640x640 satellite tile.
    pub fn satellite(id: impl Into<String>, point: GeoPoint, zoom: u8) -> Result<Self> {
        if zoom > super::MAX_ZOOM {
            return Err(Error::Domain(format!("zoom {zoom} exceeds {}", super::MAX_ZOOM)));
        }
        Ok(Self {
            id: id.into(),
            kind: ImageKind::Satellite,
            point,
            zoom,
            width: 640,
            height: 640,
            fov: 0.0,
            heading: None,
        })
    }

    /// 600x400 street-view frame with a 90 degree field of view.
    pub fn streetview(id: impl Into<String>, point: GeoPoint, heading: Option<f64>) -> Self {
        Self {
            id: id.into(),
            kind: ImageKind::Streetview,
            point,
            zoom: 0,
            width: 600,
            height: 400,
            fov: 90.0,
            heading,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ImageKind::Streetview && !(self.fov > 0.0 && self.fov <= 120.0) {
            return Err(Error::Domain(format!("fov {} outside (0, 120]", self.fov)));
        }
        if self.kind == ImageKind::Satellite && self.zoom > super::MAX_ZOOM {
            return Err(Error::Domain(format!("zoom {} exceeds {}", self.zoom, super::MAX_ZOOM)));
        }
        Ok(())
    }

    /// Cache file name, `<kind>_<id>.png`.
    pub fn file_name(&self) -> String {
        format!("{}_{}.png", self.kind, self.id)
    }

    /// Expands an endpoint template. Placeholders: `{lat} {lng} {zoom}
    /// {width} {height} {fov} {heading_param} {key}`; `{heading_param}`
    /// becomes `&heading=<deg>` or nothing.
    pub fn url(&self, template: &str, api_key: Option<&str>) -> String {
        let heading = self.heading.map_or(String::new(), |h| format!("&heading={h}"));
        template
            .replace("{lat}", &self.point.lat.to_string())
            .replace("{lng}", &self.point.lng.to_string())
            .replace("{zoom}", &self.zoom.to_string())
            .replace("{width}", &self.width.to_string())
            .replace("{height}", &self.height.to_string())
            .replace("{fov}", &self.fov.to_string())
            .replace("{heading_param}", &heading)
            .replace("{id}", &self.id)
            .replace("{key}", api_key.unwrap_or(""))
    }
}

/// Reads a fetch manifest: `id,kind,lat,lng[,heading]`.
pub fn read_manifest(path: &Path, zoom: u8) -> Result<Vec<ImageRequest>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let src = path.display();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() < 4 {
            return Err(Error::Data(format!("{src}:{line}: expected id,kind,lat,lng[,heading]")));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Data(format!("{src}:{line}: {:?} is not a number", &rec[i])))
        };
        let point = GeoPoint::new(num(2)?, num(3)?).map_err(|e| Error::Data(format!("{src}:{line}: {e}")))?;
        let kind: ImageKind = rec[1].parse().map_err(|e| Error::Data(format!("{src}:{line}: {e}")))?;
        let heading = match rec.get(4) {
            Some(h) if !h.is_empty() => Some(num(4)?),
            _ => None,
        };
        out.push(match kind {
            ImageKind::Satellite => ImageRequest::satellite(&rec[0], point, zoom)?,
            ImageKind::Streetview => ImageRequest::streetview(&rec[0], point, heading),
        });
    }
    Ok(out)
}

fn default_satellite_endpoint() -> String {
    "https://maps.googleapis.com/maps/api/staticmap?center={lat},{lng}&zoom={zoom}&size={width}x{height}&maptype=satellite&key={key}".into()
}

fn default_streetview_endpoint() -> String {
    "https://maps.googleapis.com/maps/api/streetview?size={width}x{height}&location={lat},{lng}&fov={fov}{heading_param}&key={key}".into()
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from("cache")
}

fn default_max_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    250
}

fn default_crop() -> u32 {
    20
}

fn default_parallelism() -> usize {
    4
}

fn default_key_env() -> String {
    "MAPS_API_KEY".into()
}

fn default_zoom() -> u8 {
    ImageRequest::DEFAULT_ZOOM
}

fn default_timeout() -> u64 {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchConfig {
    #[serde(default = "default_satellite_endpoint")]
    pub satellite_endpoint: String,
    #[serde(default = "default_streetview_endpoint")]
    pub streetview_endpoint: String,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    /// Requests per second across all workers; 0 disables the limit.
    #[serde(default)]
    pub rate_limit: f64,
    /// Total attempts per image, including the first.
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// Rows removed from the bottom of each image (provider attribution).
    #[serde(default = "default_crop")]
    pub crop_pixels: u32,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_zoom")]
    pub satellite_zoom: u8,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl Default for FetchConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl FetchConfig {
    fn endpoint(&self, kind: ImageKind) -> &str {
        match kind {
            ImageKind::Satellite => &self.satellite_endpoint,
            ImageKind::Streetview => &self.streetview_endpoint,
        }
    }

    /// True when every endpoint points at the local machine.
    pub fn is_mock(&self) -> bool {
        [&self.satellite_endpoint, &self.streetview_endpoint]
            .iter()
            .all(|e| is_local(e))
    }

    /// API key from the configured environment variable. Missing keys are
    /// only accepted for local (mock) endpoints.
    pub fn api_key(&self) -> Result<Option<String>> {
        match std::env::var(&self.api_key_env) {
            Ok(k) if !k.is_empty() => Ok(Some(k)),
            _ if self.is_mock() => Ok(None),
            _ => Err(Error::Config(format!(
                "environment variable {} is not set and the endpoint is not local",
                self.api_key_env
            ))),
        }
    }
}

fn is_local(template: &str) -> bool {
    let rest = template.split_once("://").map_or(template, |(_, r)| r);
    let authority = rest.split('/').next().unwrap_or("");
    let host = if authority.starts_with('[') {
        authority.split(']').next().map(|h| format!("{h}]")).unwrap_or_default()
    } else {
        authority.split(':').next().unwrap_or("").to_string()
    };
    matches!(host.as_str(), "localhost" | "127.0.0.1" | "[::1]")
}

#[derive(Debug, Clone)]
pub struct SourceError {
    pub retryable: bool,
    pub message: String,
}

/// Anything that can turn a URL into image bytes.
pub trait ImageSource: Sync {
    fn get(&self, url: &str) -> std::result::Result<Vec<u8>, SourceError>;
}

/// Blocking HTTP source.
pub struct HttpSource {
    agent: ureq::Agent,
}

impl HttpSource {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

impl ImageSource for HttpSource {
    fn get(&self, url: &str) -> std::result::Result<Vec<u8>, SourceError> {
        let mut resp = self.agent.get(url).call().map_err(|e| SourceError {
            retryable: true,
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(SourceError {
                retryable: status >= 500 || status == 429 || status == 408,
                message: format!("HTTP {status}"),
            });
        }
        resp.body_mut()
            .with_config()
            .limit(64 * 1024 * 1024)
            .read_to_vec()
            .map_err(|e| SourceError {
                retryable: true,
                message: e.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchStatus {
    Ok,
    Cached,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchLogEntry {
    pub id: String,
    pub kind: ImageKind,
    pub status: FetchStatus,
    pub path: String,
    pub bytes: u64,
    pub attempts: u32,
    pub error: String,
}

struct RateLimiter {
    interval: Option<Duration>,
    next: Mutex<Instant>,
}

impl RateLimiter {
    fn new(per_second: f64) -> Self {
        Self {
            interval: (per_second > 0.0).then(|| Duration::from_secs_f64(1.0 / per_second)),
            next: Mutex::new(Instant::now()),
        }
    }

    fn acquire(&self) {
        let Some(interval) = self.interval else { return };
        let slot = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let slot = (*next).max(Instant::now());
            *next = slot + interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

/// Crops the bottom `crop` rows and converts to 8-bit RGB PNG bytes.
fn postprocess(bytes: &[u8], crop: u32) -> Result<Vec<u8>> {
    let img = image::load_from_memory(bytes)?;
    let (w, h) = (img.width(), img.height());
    let img = if h > crop { img.crop_imm(0, 0, w, h - crop) } else { img };
    let rgb = DynamicImage::ImageRgb8(img.to_rgb8());
    let mut out = Vec::new();
    rgb.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
    Ok(out)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("png.part");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Downloads every request not already cached. Individual failures are
/// logged and never abort the batch; the log is in manifest order.
pub fn fetch_images(
    manifest: &[ImageRequest],
    config: &FetchConfig,
    api_key: Option<&str>,
    source: &dyn ImageSource,
) -> Result<Vec<FetchLogEntry>> {
    if api_key.is_none() && !config.is_mock() {
        return Err(Error::Config("an API key is required for non-local endpoints".into()));
    }
    for r in manifest {
        r.validate()?;
    }
    std::fs::create_dir_all(&config.cache_dir).map_err(|e| Error::io(&config.cache_dir, e))?;
    let limiter = RateLimiter::new(config.rate_limit);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let log = pool.install(|| {
        manifest
            .par_iter()
            .map(|req| fetch_one(req, config, api_key, source, &limiter))
            .collect()
    });
    Ok(log)
}

fn fetch_one(
    req: &ImageRequest,
    config: &FetchConfig,
    api_key: Option<&str>,
    source: &dyn ImageSource,
    limiter: &RateLimiter,
) -> FetchLogEntry {
    let path = config.cache_dir.join(req.file_name());
    let mut entry = FetchLogEntry {
        id: req.id.clone(),
        kind: req.kind,
        status: FetchStatus::Failed,
        path: path.display().to_string(),
        bytes: 0,
        attempts: 0,
        error: String::new(),
    };
    if let Ok(meta) = std::fs::metadata(&path) {
        entry.status = FetchStatus::Cached;
        entry.bytes = meta.len();
        return entry;
    }
    let url = req.url(config.endpoint(req.kind), api_key);
    let attempts = config.max_attempts.max(1);
    for attempt in 1..=attempts {
        entry.attempts = attempt;
        limiter.acquire();
        match source.get(&url) {
            Ok(raw) => {
                match postprocess(&raw, config.crop_pixels).and_then(|png| {
                    write_atomic(&path, &png)?;
                    Ok(png.len() as u64)
                }) {
                    Ok(n) => {
                        entry.status = FetchStatus::Ok;
                        entry.bytes = n;
                        entry.error.clear();
                    }
                    Err(e) => entry.error = e.to_string(),
                }
                return entry;
            }
            Err(e) => {
                debug!("{} attempt {attempt}: {}", req.id, e.message);
                entry.error = e.message;
                if !e.retryable {
                    break;
                }
                if attempt < attempts {
                    std::thread::sleep(Duration::from_millis(
                        config.backoff_ms.saturating_mul(1 << (attempt - 1)),
                    ));
                }
            }
        }
    }
    warn!("fetch {} {} failed: {}", req.kind, req.id, entry.error);
    entry
}

pub fn write_fetch_log(path: &Path, log: &[FetchLogEntry], comment: Option<&str>) -> Result<()> {
    let mut buf = Vec::new();
    if let Some(c) = comment {
        for line in c.lines() {
            buf.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for e in log {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
