use std::collections::BTreeMap;
use std::time::Duration;

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use streetrisk_core::portfolio::LatLon;

use crate::error::{ImageryError, Result};
use crate::provider::{GeocodeOutcome, Geocoder, ImageProvider, ProviderImage};
use crate::request::{ImageRequest, View};

/// Environment variable read for the provider key.
pub const DEFAULT_KEY_ENV: &str = "STREETRISK_MAPS_KEY";

const MAX_BODY: u64 = 20 * 1024 * 1024;

/// Endpoint templates for an HTTP provider. Placeholders are `{address}`,
/// `{lat}`, `{lon}`, `{width}`, `{height}`, `{heading}`, `{pitch}`, `{zoom}`
/// and `{key}`. A query pair whose placeholder has no value for a request
/// is dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    pub geocode_url: String,
    pub street_url: String,
    /// Checked before each street image; a non-OK status means missing imagery.
    pub street_metadata_url: Option<String>,
    pub satellite_url: String,
    pub key_env: String,
    pub timeout_secs: u64,
    pub tag: String,
}

impl Default for LiveConfig {
    fn default() -> Self {
        let base = "https://maps.googleapis.com/maps/api";
        Self {
            geocode_url: format!("{base}/geocode/json?address={{address}}&key={{key}}"),
            street_url: format!(
                "{base}/streetview?size={{width}}x{{height}}&location={{lat}},{{lon}}&heading={{heading}}&pitch={{pitch}}&key={{key}}"
            ),
            street_metadata_url: Some(format!(
                "{base}/streetview/metadata?location={{lat}},{{lon}}&key={{key}}"
            )),
            satellite_url: format!(
                "{base}/staticmap?center={{lat}},{{lon}}&zoom={{zoom}}&size={{width}}x{{height}}&maptype=satellite&key={{key}}"
            ),
            key_env: DEFAULT_KEY_ENV.to_string(),
            timeout_secs: 30,
            tag: "google".to_string(),
        }
    }
}

type Vars<'a> = BTreeMap<&'static str, Option<String>>;

fn enc(s: &str) -> String {
    utf8_percent_encode(s, NON_ALPHANUMERIC).to_string()
}

fn substitute(part: &str, vars: &Vars<'_>) -> Result<Option<String>> {
    let mut out = String::with_capacity(part.len());
    let mut rest = part;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let end = rest[start..]
            .find('}')
            .ok_or_else(|| ImageryError::InvalidRequest(format!("unclosed placeholder in `{part}`")))?
            + start;
        let name = &rest[start + 1..end];
        match vars.get(name) {
            Some(Some(v)) => out.push_str(v),
            Some(None) => return Ok(None),
            None => {
                return Err(ImageryError::InvalidRequest(format!("unknown placeholder `{{{name}}}`")))
            }
        }
        rest = &rest[end + 1..];
    }
    out.push_str(rest);
    Ok(Some(out))
}

/// Fills `template`. Values must already be URL-safe.
fn expand(template: &str, vars: &Vars<'_>) -> Result<String> {
    let (path, query) = template.split_once('?').unwrap_or((template, ""));
    let mut url = substitute(path, vars)?.ok_or_else(|| {
        ImageryError::InvalidRequest(format!("template path needs a value missing here: `{path}`"))
    })?;
    let pairs: Vec<String> = query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|p| substitute(p, vars))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if !pairs.is_empty() {
        url.push('?');
        url.push_str(&pairs.join("&"));
    }
    Ok(url)
}

fn request_vars(request: &ImageRequest, location: LatLon, key: &str) -> Vars<'static> {
    let mut v = Vars::new();
    v.insert("address", None);
    v.insert("lat", Some(location.lat.to_string()));
    v.insert("lon", Some(location.lon.to_string()));
    v.insert("width", Some(request.width.to_string()));
    v.insert("height", Some(request.height.to_string()));
    v.insert("heading", request.heading.map(|h| h.to_string()));
    v.insert("pitch", request.pitch.map(|p| p.to_string()));
    v.insert("zoom", request.zoom.map(|z| z.to_string()));
    v.insert("key", Some(enc(key)));
    v
}

fn extension_for(content_type: &str) -> Option<&'static str> {
    let mime = content_type.split(';').next().unwrap_or("").trim();
    match mime.to_ascii_lowercase().as_str() {
        "image/jpeg" | "image/jpg" => Some("jpg"),
        "image/png" => Some("png"),
        "image/webp" => Some("webp"),
        "image/gif" => Some("gif"),
        "image/svg+xml" => Some("svg"),
        _ => None,
    }
}

/// Maps provider status strings shared by the geocoding and metadata APIs.
fn status_error(status: &str, body: &Value) -> ImageryError {
    let msg = body
        .get("error_message")
        .and_then(Value::as_str)
        .map_or_else(|| status.to_string(), |m| format!("{status}: {m}"));
    match status {
        "OVER_QUERY_LIMIT" | "UNKNOWN_ERROR" => ImageryError::Retriable(msg),
        _ => ImageryError::Provider(msg),
    }
}

/// HTTP backend. Responses are returned verbatim.
pub struct LiveProvider {
    config: LiveConfig,
    key: String,
    agent: ureq::Agent,
}

impl LiveProvider {
    pub fn new(config: LiveConfig, key: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            config,
            key: key.into(),
            agent,
        }
    }

    /// Reads the key from `config.key_env`.
    pub fn from_env(config: LiveConfig) -> Result<Self> {
        match std::env::var(&config.key_env) {
            Ok(k) if !k.trim().is_empty() => {
                let k = k.trim().to_string();
                Ok(Self::new(config, k))
            }
            _ => Err(ImageryError::MissingKey(config.key_env.clone())),
        }
    }

    /// Strips the key from messages.
    fn redact(&self, s: &str) -> String {
        if self.key.is_empty() {
            s.to_string()
        } else {
            s.replace(&enc(&self.key), "***").replace(&self.key, "***")
        }
    }

    fn get(&self, url: &str) -> Result<(u16, Option<String>, Vec<u8>)> {
        let transport = |e: ureq::Error| ImageryError::Retriable(self.redact(&e.to_string()));
        let mut resp = self.agent.get(url).call().map_err(transport)?;
        let status = resp.status().as_u16();
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY)
            .read_to_vec()
            .map_err(transport)?;
        match status {
            200..=299 => Ok((status, content_type, body)),
            429 | 500..=599 => Err(ImageryError::Retriable(format!("HTTP {status}"))),
            _ => Ok((status, content_type, body)),
        }
    }

    fn get_json(&self, url: &str) -> Result<Value> {
        let (status, _, body) = self.get(url)?;
        if !(200..300).contains(&status) {
            return Err(ImageryError::Provider(format!("HTTP {status}")));
        }
        Ok(serde_json::from_slice(&body)?)
    }

    fn street_available(&self, request: &ImageRequest, location: LatLon) -> Result<bool> {
        let Some(template) = &self.config.street_metadata_url else {
            return Ok(true);
        };
        let body = self.get_json(&expand(template, &request_vars(request, location, &self.key))?)?;
        match body.get("status").and_then(Value::as_str).unwrap_or("") {
            "OK" => Ok(true),
            "ZERO_RESULTS" | "NOT_FOUND" => Ok(false),
            other => Err(status_error(other, &body)),
        }
    }
}

impl Geocoder for LiveProvider {
    fn geocode(&self, raw_address: &str) -> Result<GeocodeOutcome> {
        let mut vars = request_vars(
            &ImageRequest::new("-", View::Satellite),
            LatLon { lat: 0.0, lon: 0.0 },
            &self.key,
        );
        vars.insert("address", Some(enc(raw_address)));
        let body = self.get_json(&expand(&self.config.geocode_url, &vars)?)?;
        match body.get("status").and_then(Value::as_str).unwrap_or("") {
            "OK" => {}
            "ZERO_RESULTS" => return Ok(GeocodeOutcome::NotFound),
            other => return Err(status_error(other, &body)),
        }
        let Some(first) = body.get("results").and_then(|r| r.get(0)) else {
            return Ok(GeocodeOutcome::NotFound);
        };
        let loc = &first["geometry"]["location"];
        let (Some(lat), Some(lon)) = (loc["lat"].as_f64(), loc["lng"].as_f64()) else {
            return Err(ImageryError::Provider("geocode result without coordinates".into()));
        };
        let country = first["address_components"]
            .as_array()
            .into_iter()
            .flatten()
            .find(|c| {
                c["types"]
                    .as_array()
                    .is_some_and(|t| t.iter().any(|t| t == "country"))
            })
            .and_then(|c| c["short_name"].as_str())
            .unwrap_or("")
            .to_ascii_uppercase();
        Ok(GeocodeOutcome::Found {
            location: LatLon { lat, lon },
            country,
        })
    }
}

impl ImageProvider for LiveProvider {
    fn tag(&self) -> &str {
        &self.config.tag
    }

    fn fetch(&self, request: &ImageRequest, location: LatLon) -> Result<ProviderImage> {
        request.validate()?;
        let template = match request.view {
            View::Street => {
                if !self.street_available(request, location)? {
                    return Ok(ProviderImage::Missing);
                }
                &self.config.street_url
            }
            View::Satellite => &self.config.satellite_url,
        };
        let (status, content_type, bytes) =
            self.get(&expand(template, &request_vars(request, location, &self.key))?)?;
        if status == 404 {
            return Ok(ProviderImage::Missing);
        }
        if !(200..300).contains(&status) {
            return Err(ImageryError::Provider(format!("HTTP {status}")));
        }
        let ext = content_type.as_deref().and_then(extension_for).ok_or_else(|| {
            ImageryError::Provider(format!(
                "expected an image, got content type {}",
                content_type.as_deref().unwrap_or("<none>")
            ))
        })?;
        Ok(ProviderImage::Image {
            bytes,
            extension: ext.to_string(),
        })
    }
}
