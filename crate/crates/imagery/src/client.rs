use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use streetrisk_core::portfolio::{AddressEntry, AddressRegistry, AddressStatus, LatLon};

use crate::cache::{CacheEntry, CachedImage, ImageCache};
use crate::error::{ImageryError, Result};
use crate::limiter::RateLimiter;
use crate::provider::{GeocodeOutcome, Geocoder, ImageProvider, ProviderImage};
use crate::request::ImageRequest;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeocodeConfig {
    /// Addresses geocoded to any other country are marked foreign.
    pub domestic_country: String,
}

impl Default for GeocodeConfig {
    fn default() -> Self {
        Self {
            domestic_country: "PL".to_string(),
        }
    }
}

/// Geocodes one address. Provider failures surface as errors and never as
/// an unresolved status.
pub fn geocode(
    geocoder: &dyn Geocoder,
    address_id: &str,
    raw_address: &str,
    config: &GeocodeConfig,
) -> Result<AddressEntry> {
    let raw = raw_address.trim();
    if raw.is_empty() {
        return Err(ImageryError::EmptyAddress);
    }
    let (status, location) = match geocoder.geocode(raw)? {
        GeocodeOutcome::Found { location, country } => {
            if country.eq_ignore_ascii_case(&config.domestic_country) {
                (AddressStatus::Resolved, Some(location))
            } else {
                (AddressStatus::Foreign, Some(location))
            }
        }
        GeocodeOutcome::NotFound => (AddressStatus::Unresolved, None),
    };
    Ok(AddressEntry {
        address_id: address_id.to_string(),
        raw_address: raw_address.to_string(),
        status,
        location,
        excluded: None,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeocodeSummary {
    pub resolved: usize,
    pub foreign: usize,
    pub unresolved: usize,
    /// `(address_id, message)` for entries left untouched because the
    /// lookup failed.
    pub failed: Vec<(String, String)>,
}

/// Geocodes every entry in place. Only `status` and `location` change;
/// entries whose lookup fails keep their previous values.
pub fn geocode_registry(
    geocoder: &dyn Geocoder,
    registry: &mut AddressRegistry,
    config: &GeocodeConfig,
) -> GeocodeSummary {
    let ids: Vec<String> = registry.entries().iter().map(|e| e.address_id.clone()).collect();
    let mut summary = GeocodeSummary::default();
    for id in ids {
        let entry = registry.get_mut(&id).expect("id taken from the registry");
        match geocode(geocoder, &id, &entry.raw_address, config) {
            Ok(found) => {
                entry.status = found.status;
                entry.location = found.location;
                match found.status {
                    AddressStatus::Resolved => summary.resolved += 1,
                    AddressStatus::Foreign => summary.foreign += 1,
                    AddressStatus::Unresolved => summary.unresolved += 1,
                }
            }
            Err(e) => summary.failed.push((id, e.to_string())),
        }
    }
    summary
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    Image(CachedImage),
    /// The provider has no imagery for this address and view.
    Missing,
}

/// Cache-first image retrieval behind a global rate limit.
pub struct ImageryClient {
    provider: Arc<dyn ImageProvider>,
    cache: ImageCache,
    limiter: RateLimiter,
    retries: u32,
    backoff: Duration,
}

impl ImageryClient {
    pub fn new(provider: Arc<dyn ImageProvider>, cache: ImageCache, limiter: RateLimiter) -> Self {
        Self {
            provider,
            cache,
            limiter,
            retries: 0,
            backoff: Duration::from_millis(500),
        }
    }

    /// Retries retriable failures up to `retries` times, doubling `backoff`
    /// between attempts.
    pub fn with_retries(mut self, retries: u32, backoff: Duration) -> Self {
        self.retries = retries;
        self.backoff = backoff;
        self
    }

    pub fn cache(&self) -> &ImageCache {
        &self.cache
    }

    pub fn fetch_image(&self, request: &ImageRequest, entry: &AddressEntry) -> Result<FetchOutcome> {
        request.validate()?;
        if entry.address_id != request.address_id {
            return Err(ImageryError::InvalidRequest(format!(
                "request for `{}` paired with address `{}`",
                request.address_id, entry.address_id
            )));
        }
        let location = match (entry.status, entry.location) {
            (AddressStatus::Resolved, Some(loc)) => loc,
            _ => return Err(ImageryError::NotResolved(entry.address_id.clone())),
        };

        let lock = self.cache.key_lock(&request.address_id, request.view);
        let _guard = lock.lock();
        match self.cache.get(&request.address_id, request.view) {
            Some(CacheEntry::Image(img)) => match self.cache.read(&img) {
                Ok(_) => return Ok(FetchOutcome::Image(img)),
                // fall through and replace the damaged file
                Err(ImageryError::CorruptCache { .. } | ImageryError::Io { .. }) => {}
                Err(e) => return Err(e),
            },
            Some(CacheEntry::Missing { .. }) => return Ok(FetchOutcome::Missing),
            None => {}
        }

        let fetched = self.fetch_with_retries(request, location)?;
        let now = self.limiter.clock().unix_seconds();
        let tag = self.provider.tag();
        match fetched {
            ProviderImage::Image { bytes, extension } => {
                let img = self
                    .cache
                    .put_image(&request.address_id, request.view, &extension, &bytes, tag, now)?;
                Ok(FetchOutcome::Image(img))
            }
            ProviderImage::Missing => {
                self.cache.put_missing(&request.address_id, request.view, tag, now)?;
                Ok(FetchOutcome::Missing)
            }
        }
    }

    fn fetch_with_retries(&self, request: &ImageRequest, location: LatLon) -> Result<ProviderImage> {
        let mut delay = self.backoff;
        let mut attempt = 0;
        loop {
            self.limiter.acquire();
            match self.provider.fetch(request, location) {
                Err(e) if e.is_retriable() && attempt < self.retries => {
                    attempt += 1;
                    self.limiter.clock().sleep(delay);
                    delay *= 2;
                }
                other => return other,
            }
        }
    }

    /// Runs `fetch_image` over `jobs` on at most `parallelism` threads.
    /// Results come back in job order.
    pub fn fetch_all(
        &self,
        jobs: &[(ImageRequest, AddressEntry)],
        parallelism: usize,
    ) -> Vec<Result<FetchOutcome>> {
        let workers = parallelism.clamp(1, jobs.len().max(1));
        let next = AtomicUsize::new(0);
        let mut results: Vec<Option<Result<FetchOutcome>>> = (0..jobs.len()).map(|_| None).collect();
        let slots = parking_lot::Mutex::new(&mut results);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some((req, entry)) = jobs.get(i) else { break };
                    let r = self.fetch_image(req, entry);
                    slots.lock()[i] = Some(r);
                });
            }
        });
        results
            .into_iter()
            .map(|r| r.expect("every job index is visited"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limiter::{Clock, ManualClock};
    use crate::request::View;

    struct Table;

    impl Geocoder for Table {
        fn geocode(&self, raw: &str) -> Result<GeocodeOutcome> {
            match raw {
                "home" => Ok(GeocodeOutcome::Found {
                    location: LatLon { lat: 50.0, lon: 20.0 },
                    country: "PL".into(),
                }),
                "abroad" => Ok(GeocodeOutcome::Found {
                    location: LatLon { lat: 48.0, lon: 11.0 },
                    country: "DE".into(),
                }),
                "down" => Err(ImageryError::Retriable("503".into())),
                _ => Ok(GeocodeOutcome::NotFound),
            }
        }
    }

    fn entry(id: &str, raw: &str) -> AddressEntry {
        AddressEntry {
            address_id: id.into(),
            raw_address: raw.into(),
            status: AddressStatus::Unresolved,
            location: None,
            excluded: None,
        }
    }

    #[test]
    fn statuses_follow_country_and_lookup() {
        let cfg = GeocodeConfig::default();
        assert_eq!(geocode(&Table, "a", "home", &cfg).unwrap().status, AddressStatus::Resolved);
        assert_eq!(geocode(&Table, "a", "abroad", &cfg).unwrap().status, AddressStatus::Foreign);
        assert_eq!(geocode(&Table, "a", "nowhere", &cfg).unwrap().status, AddressStatus::Unresolved);
        assert!(matches!(geocode(&Table, "a", "  ", &cfg), Err(ImageryError::EmptyAddress)));
        assert!(geocode(&Table, "a", "down", &cfg).unwrap_err().is_retriable());
    }

    #[test]
    fn registry_update_touches_only_status_and_location() {
        let mut reg = AddressRegistry::new(vec![
            entry("a", "home"),
            entry("b", "abroad"),
            entry("c", "nowhere"),
            entry("d", "down"),
        ])
        .unwrap();
        let before = reg.clone();
        let summary = geocode_registry(&Table, &mut reg, &GeocodeConfig::default());
        assert_eq!((summary.resolved, summary.foreign, summary.unresolved), (1, 1, 1));
        assert_eq!(summary.failed.len(), 1);
        for (old, new) in before.entries().iter().zip(reg.entries()) {
            assert_eq!(old.address_id, new.address_id);
            assert_eq!(old.raw_address, new.raw_address);
            assert_eq!(old.excluded, new.excluded);
        }
        assert_eq!(reg.get("d"), before.get("d"));
    }

    struct Flaky {
        failures: AtomicUsize,
    }

    impl ImageProvider for Flaky {
        fn tag(&self) -> &str {
            "flaky"
        }

        fn fetch(&self, _: &ImageRequest, _: LatLon) -> Result<ProviderImage> {
            let left = self.failures.load(Ordering::SeqCst);
            if left > 0 {
                self.failures.store(left - 1, Ordering::SeqCst);
                Err(ImageryError::Retriable("timeout".into()))
            } else {
                Ok(ProviderImage::Image {
                    bytes: b"img".to_vec(),
                    extension: "jpg".into(),
                })
            }
        }
    }

    #[test]
    fn retriable_failures_are_retried_then_surface() {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(ManualClock::default());
        let mut e = entry("a", "home");
        e.status = AddressStatus::Resolved;
        e.location = Some(LatLon { lat: 1.0, lon: 2.0 });
        let req = ImageRequest::new("a", View::Street);

        let client = ImageryClient::new(
            Arc::new(Flaky { failures: AtomicUsize::new(5) }),
            ImageCache::open(dir.path().join("x")).unwrap(),
            RateLimiter::new(None, clock.clone()),
        )
        .with_retries(2, Duration::from_secs(1));
        assert!(client.fetch_image(&req, &e).unwrap_err().is_retriable());
        assert_eq!(clock.elapsed(), Duration::from_secs(3));
        assert!(client.cache().get("a", View::Street).is_none());

        let client = ImageryClient::new(
            Arc::new(Flaky { failures: AtomicUsize::new(1) }),
            ImageCache::open(dir.path().join("y")).unwrap(),
            RateLimiter::new(None, clock),
        )
        .with_retries(2, Duration::from_secs(1));
        assert!(matches!(client.fetch_image(&req, &e).unwrap(), FetchOutcome::Image(_)));
    }
}
