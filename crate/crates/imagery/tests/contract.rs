//! One operation contract, two backends: the fixture directory and the HTTP
//! provider pointed at a local mock serving the same fixture data.

use std::collections::HashMap;
use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde_json::json;
use streetrisk_core::portfolio::{AddressEntry, AddressStatus, LatLon};
use streetrisk_imagery::{
    geocode, write_placeholder_fixtures, FetchOutcome, FixtureProvider, GeocodeConfig, GeocodeOutcome,
    Geocoder, ImageCache, ImageProvider, ImageRequest, ImageryClient, ImageryError, LiveConfig,
    LiveProvider, ProviderImage, RateLimiter, SystemClock, View, IMAGES_DIR,
};

const KEY: &str = "test-key";

fn entries() -> Vec<AddressEntry> {
    let mk = |id: &str, raw: &str, status, loc: Option<(f64, f64)>| AddressEntry {
        address_id: id.into(),
        raw_address: raw.into(),
        status,
        location: loc.map(|(lat, lon)| LatLon { lat, lon }),
        excluded: None,
    };
    vec![
        mk("SYN-000017", "SYN-000017, Syntetyczna 17, PL", AddressStatus::Resolved, Some((52.2297, 21.0122))),
        mk("SYN-000018", "SYN-000018, Syntetyczna 18, PL", AddressStatus::Resolved, Some((50.0647, 19.945))),
        mk("SYN-000019", "SYN-000019, Synthetische Strasse 19, DE", AddressStatus::Foreign, Some((52.52, 13.405))),
        mk("SYN-000020", "SYN-000020, ???", AddressStatus::Unresolved, None),
    ]
}

/// Fixture dir where SYN-000018 has no street imagery.
fn fixture_dir(root: &Path) {
    write_placeholder_fixtures(root, &entries(), "PL", "DE", &["SYN-000017", "SYN-000018"], |id| {
        id == "SYN-000018"
    })
    .unwrap();
}

struct Counting {
    inner: Arc<dyn ImageProvider>,
    calls: AtomicUsize,
}

impl ImageProvider for Counting {
    fn tag(&self) -> &str {
        self.inner.tag()
    }

    fn fetch(&self, request: &ImageRequest, location: LatLon) -> streetrisk_imagery::Result<ProviderImage> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.fetch(request, location)
    }
}

// ---- mock HTTP provider -------------------------------------------------

#[derive(Clone)]
struct Mock {
    fixtures: Arc<FixtureProvider>,
    by_location: Arc<HashMap<String, String>>,
    hits: Arc<AtomicUsize>,
}

type Params = Query<HashMap<String, String>>;

fn check_key(q: &HashMap<String, String>) -> Result<(), Response> {
    if q.get("key").map(String::as_str) == Some(KEY) {
        Ok(())
    } else {
        Err((StatusCode::FORBIDDEN, "bad key").into_response())
    }
}

async fn mock_geocode(State(m): State<Mock>, Query(q): Params) -> Response {
    m.hits.fetch_add(1, Ordering::SeqCst);
    if let Err(r) = check_key(&q) {
        return r;
    }
    match m.fixtures.geocode(q.get("address").map_or("", String::as_str)).unwrap() {
        GeocodeOutcome::Found { location, country } => Json(json!({
            "status": "OK",
            "results": [{
                "address_components": [
                    {"short_name": "X", "types": ["locality", "political"]},
                    {"short_name": country, "types": ["country", "political"]}
                ],
                "geometry": {"location": {"lat": location.lat, "lng": location.lon}}
            }]
        }))
        .into_response(),
        GeocodeOutcome::NotFound => Json(json!({"status": "ZERO_RESULTS", "results": []})).into_response(),
    }
}

fn lookup(m: &Mock, q: &HashMap<String, String>, view: View) -> Option<ProviderImage> {
    let loc = q.get("location").or_else(|| q.get("center"))?;
    let id = m.by_location.get(loc)?;
    let (lat, lon) = loc.split_once(',')?;
    let at = LatLon {
        lat: lat.parse().ok()?,
        lon: lon.parse().ok()?,
    };
    m.fixtures.fetch(&ImageRequest::new(id.as_str(), view), at).ok()
}

async fn mock_metadata(State(m): State<Mock>, Query(q): Params) -> Response {
    m.hits.fetch_add(1, Ordering::SeqCst);
    if let Err(r) = check_key(&q) {
        return r;
    }
    let status = match lookup(&m, &q, View::Street) {
        Some(ProviderImage::Image { .. }) => "OK",
        _ => "ZERO_RESULTS",
    };
    Json(json!({ "status": status })).into_response()
}

fn image_response(img: Option<ProviderImage>) -> Response {
    match img {
        Some(ProviderImage::Image { bytes, .. }) => ([(header::CONTENT_TYPE, "image/svg+xml")], bytes).into_response(),
        _ => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn mock_street(State(m): State<Mock>, Query(q): Params) -> Response {
    m.hits.fetch_add(1, Ordering::SeqCst);
    if let Err(r) = check_key(&q) {
        return r;
    }
    image_response(lookup(&m, &q, View::Street))
}

async fn mock_satellite(State(m): State<Mock>, Query(q): Params) -> Response {
    m.hits.fetch_add(1, Ordering::SeqCst);
    if let Err(r) = check_key(&q) {
        return r;
    }
    assert_eq!(q.get("maptype").map(String::as_str), Some("satellite"));
    image_response(lookup(&m, &q, View::Satellite))
}

async fn unavailable() -> Response {
    StatusCode::SERVICE_UNAVAILABLE.into_response()
}

struct Server {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    _rt: tokio::runtime::Runtime,
}

fn spawn_mock(root: &Path) -> Server {
    let fixtures = Arc::new(FixtureProvider::open(root).unwrap());
    let by_location = entries()
        .into_iter()
        .filter_map(|e| e.location.map(|l| (format!("{},{}", l.lat, l.lon), e.address_id)))
        .collect();
    let hits = Arc::new(AtomicUsize::new(0));
    let state = Mock {
        fixtures,
        by_location: Arc::new(by_location),
        hits: hits.clone(),
    };
    let app = Router::new()
        .route("/geocode/json", get(mock_geocode))
        .route("/streetview", get(mock_street))
        .route("/streetview/metadata", get(mock_metadata))
        .route("/staticmap", get(mock_satellite))
        .route("/unavailable", get(unavailable))
        .with_state(state);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    rt.spawn(async move { axum::serve(listener, app).await.unwrap() });
    Server { addr, hits, _rt: rt }
}

fn live_config(addr: SocketAddr) -> LiveConfig {
    let defaults = LiveConfig::default();
    let local = |u: &str| u.replace("https://maps.googleapis.com/maps/api", &format!("http://{addr}"));
    LiveConfig {
        geocode_url: local(&defaults.geocode_url),
        street_url: local(&defaults.street_url),
        street_metadata_url: defaults.street_metadata_url.as_deref().map(local),
        satellite_url: local(&defaults.satellite_url),
        timeout_secs: 5,
        ..defaults
    }
}

// ---- the contract -------------------------------------------------------

fn check_geocode_contract(geocoder: &dyn Geocoder) {
    let cfg = GeocodeConfig::default();
    for expected in entries() {
        let got = geocode(geocoder, &expected.address_id, &expected.raw_address, &cfg).unwrap();
        assert_eq!(got, expected, "{}", expected.address_id);
    }
    assert!(matches!(geocode(geocoder, "x", "", &cfg), Err(ImageryError::EmptyAddress)));
}

fn check_fetch_contract(provider: Arc<dyn ImageProvider>, fixture_root: &Path, cache_root: &Path) {
    let counting = Arc::new(Counting {
        inner: provider,
        calls: AtomicUsize::new(0),
    });
    let client = ImageryClient::new(
        counting.clone(),
        ImageCache::open(cache_root).unwrap(),
        RateLimiter::new(None, Arc::new(SystemClock::default())),
    );
    let all = entries();
    let (full, no_street, unresolved) = (&all[0], &all[1], &all[3]);

    for view in View::ALL {
        let req = ImageRequest::new(full.address_id.as_str(), view);
        let FetchOutcome::Image(img) = client.fetch_image(&req, full).unwrap() else {
            panic!("{view} should exist");
        };
        let original = fs::read(
            fixture_root
                .join(IMAGES_DIR)
                .join(&full.address_id)
                .join(format!("{view}.svg")),
        )
        .unwrap();
        assert_eq!(client.cache().read(&img).unwrap(), original);
        assert_eq!(cache_root.join(&img.path), cache_root.join(&full.address_id).join(format!("{view}.svg")));

        let before = counting.calls.load(Ordering::SeqCst);
        assert_eq!(client.fetch_image(&req, full).unwrap(), FetchOutcome::Image(img));
        assert_eq!(counting.calls.load(Ordering::SeqCst), before, "cache hit must not call the provider");
    }

    let street = ImageRequest::new(no_street.address_id.as_str(), View::Street);
    assert_eq!(client.fetch_image(&street, no_street).unwrap(), FetchOutcome::Missing);
    let before = counting.calls.load(Ordering::SeqCst);
    assert_eq!(client.fetch_image(&street, no_street).unwrap(), FetchOutcome::Missing);
    assert_eq!(counting.calls.load(Ordering::SeqCst), before);

    let req = ImageRequest::new(unresolved.address_id.as_str(), View::Satellite);
    assert!(matches!(client.fetch_image(&req, unresolved), Err(ImageryError::NotResolved(_))));

    // concurrent duplicates of one uncached key hit the provider once
    let sat = ImageRequest::new(no_street.address_id.as_str(), View::Satellite);
    let jobs: Vec<_> = (0..16).map(|_| (sat.clone(), no_street.clone())).collect();
    let before = counting.calls.load(Ordering::SeqCst);
    let results = client.fetch_all(&jobs, 8);
    assert!(results.iter().all(|r| matches!(r, Ok(FetchOutcome::Image(_)))));
    assert_eq!(counting.calls.load(Ordering::SeqCst), before + 1);

    let reopened = ImageCache::open(cache_root).unwrap();
    assert_eq!(reopened.entries(), client.cache().entries());
    assert_eq!(reopened.entries().len(), 4);
}

#[test]
fn fixture_backend_meets_contract() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fixtures");
    fixture_dir(&fx);
    let provider = Arc::new(FixtureProvider::open(&fx).unwrap());
    check_geocode_contract(provider.as_ref());
    check_fetch_contract(provider, &fx, &dir.path().join("cache"));
}

#[test]
fn http_backend_meets_contract() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fixtures");
    fixture_dir(&fx);
    let server = spawn_mock(&fx);
    let provider = Arc::new(LiveProvider::new(live_config(server.addr), KEY));
    check_geocode_contract(provider.as_ref());
    check_fetch_contract(provider, &fx, &dir.path().join("cache"));
    assert!(server.hits.load(Ordering::SeqCst) > 0);
}

#[test]
fn http_backend_reports_outages_as_retriable() {
    let dir = tempfile::tempdir().unwrap();
    fixture_dir(dir.path());
    let server = spawn_mock(dir.path());
    let cfg = LiveConfig {
        satellite_url: format!("http://{}/unavailable?key={{key}}", server.addr),
        ..live_config(server.addr)
    };
    let provider = LiveProvider::new(cfg, KEY);
    let err = provider
        .fetch(&ImageRequest::new("SYN-000017", View::Satellite), LatLon { lat: 52.2297, lon: 21.0122 })
        .unwrap_err();
    assert!(err.is_retriable(), "{err}");

    // nothing listening: a transport failure, also retriable
    let closed = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let dead = LiveProvider::new(live_config(closed), KEY);
    let err = dead.geocode("anything").unwrap_err();
    assert!(err.is_retriable(), "{err}");
}

#[test]
fn http_backend_rejects_bad_key_without_leaking_it() {
    let dir = tempfile::tempdir().unwrap();
    fixture_dir(dir.path());
    let server = spawn_mock(dir.path());
    let provider = LiveProvider::new(live_config(server.addr), "wrong-secret");
    let err = provider.geocode("SYN-000017, Syntetyczna 17, PL").unwrap_err();
    assert!(matches!(err, ImageryError::Provider(_)), "{err}");
    assert!(!err.to_string().contains("wrong-secret"));
}
