//! Address geocoding and static image retrieval.
//!
//! Two interchangeable backends implement [`Geocoder`] and [`ImageProvider`]:
//! [`FixtureProvider`] reads a local directory and never touches the
//! network, [`LiveProvider`] issues HTTP GETs built from endpoint templates.
//! [`ImageryClient`] puts a disk cache and a global rate limit in front of
//! either.

mod cache;
mod client;
mod error;
mod fixture;
mod limiter;
mod live;
mod provider;
mod request;

pub use cache::{CacheEntry, CachedImage, ImageCache, INDEX_FILE};
pub use client::{geocode, geocode_registry, FetchOutcome, GeocodeConfig, GeocodeSummary, ImageryClient};
pub use error::{ImageryError, Result};
pub use fixture::{write_placeholder_fixtures, FixtureProvider, GEOCODE_FILE, IMAGES_DIR};
pub use limiter::{Clock, ManualClock, RateLimiter, SystemClock};
pub use live::{LiveConfig, LiveProvider, DEFAULT_KEY_ENV};
pub use provider::{GeocodeOutcome, Geocoder, ImageProvider, ProviderImage};
pub use request::{ImageRequest, View, MAX_IMAGE_SIDE};
