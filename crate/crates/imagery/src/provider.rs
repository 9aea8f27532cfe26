use streetrisk_core::portfolio::LatLon;

use crate::error::Result;
use crate::request::ImageRequest;

#[derive(Debug, Clone, PartialEq)]
pub enum GeocodeOutcome {
    Found {
        location: LatLon,
        /// ISO 3166-1 alpha-2, upper case.
        country: String,
    },
    NotFound,
}

pub trait Geocoder: Send + Sync {
    /// `raw_address` is already trimmed and nonempty.
    fn geocode(&self, raw_address: &str) -> Result<GeocodeOutcome>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProviderImage {
    Image {
        bytes: Vec<u8>,
        /// File extension matching the content, without the dot.
        extension: String,
    },
    /// The provider has no imagery for this place.
    Missing,
}

pub trait ImageProvider: Send + Sync {
    /// Short tag stored with cached images.
    fn tag(&self) -> &str;
    fn fetch(&self, request: &ImageRequest, location: LatLon) -> Result<ProviderImage>;
}
