use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use streetrisk_core::portfolio::{AddressEntry, AddressStatus, LatLon};

use crate::error::{ImageryError, Result};
use crate::provider::{GeocodeOutcome, Geocoder, ImageProvider, ProviderImage};
use crate::request::{ImageRequest, View};

pub const GEOCODE_FILE: &str = "geocode.csv";
pub const IMAGES_DIR: &str = "images";
const EXTENSIONS: [&str; 4] = ["jpg", "jpeg", "png", "svg"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GeocodeRow {
    raw_address: String,
    lat: f64,
    lon: f64,
    country: String,
}

/// Offline backend over a directory holding `geocode.csv`
/// (`raw_address,lat,lon,country`) and `images/<address_id>/<view>.<ext>`.
/// Addresses absent from the table are not found; absent image files are
/// missing imagery.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    root: PathBuf,
    table: HashMap<String, GeocodeOutcome>,
}

impl FixtureProvider {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let path = root.join(GEOCODE_FILE);
        let mut table = HashMap::new();
        if path.exists() {
            let mut rdr = csv::Reader::from_path(&path)?;
            for row in rdr.deserialize::<GeocodeRow>() {
                let row = row?;
                table.insert(
                    row.raw_address.trim().to_string(),
                    GeocodeOutcome::Found {
                        location: LatLon { lat: row.lat, lon: row.lon },
                        country: row.country.trim().to_ascii_uppercase(),
                    },
                );
            }
        }
        Ok(Self { root, table })
    }
}

impl Geocoder for FixtureProvider {
    fn geocode(&self, raw_address: &str) -> Result<GeocodeOutcome> {
        Ok(self
            .table
            .get(raw_address)
            .cloned()
            .unwrap_or(GeocodeOutcome::NotFound))
    }
}

impl ImageProvider for FixtureProvider {
    fn tag(&self) -> &str {
        "fixture"
    }

    fn fetch(&self, request: &ImageRequest, _location: LatLon) -> Result<ProviderImage> {
        let dir = self.root.join(IMAGES_DIR).join(&request.address_id);
        for ext in EXTENSIONS {
            let path = dir.join(format!("{}.{ext}", request.view));
            match fs::read(&path) {
                Ok(bytes) => {
                    return Ok(ProviderImage::Image {
                        bytes,
                        extension: ext.to_string(),
                    })
                }
                Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
                Err(e) => return Err(ImageryError::io(path, e)),
            }
        }
        Ok(ProviderImage::Missing)
    }
}

fn placeholder_svg(address_id: &str, view: View) -> String {
    let hue = address_id.bytes().fold(7u32, |h, b| h.wrapping_mul(31).wrapping_add(u32::from(b))) % 360;
    let (sky, ground) = match view {
        View::Street => (format!("hsl({hue},45%,75%)"), format!("hsl({hue},25%,40%)")),
        View::Satellite => (format!("hsl({hue},30%,35%)"), format!("hsl({},35%,30%)", (hue + 90) % 360)),
    };
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"320\" height=\"240\" viewBox=\"0 0 320 240\">\
<rect width=\"320\" height=\"240\" fill=\"{sky}\"/>\
<rect y=\"150\" width=\"320\" height=\"90\" fill=\"{ground}\"/>\
<text x=\"16\" y=\"32\" font-family=\"monospace\" font-size=\"18\" fill=\"#111\">{address_id} · {view}</text>\
</svg>\n"
    )
}

/// Writes a fixture directory for `entries`: a geocode row for every address
/// with coordinates (`country` for resolved ones, `foreign_country` for
/// foreign ones) and placeholder SVGs for the addresses in `with_images`,
/// leaving out the street view where `street_missing` says so.
pub fn write_placeholder_fixtures(
    root: &Path,
    entries: &[AddressEntry],
    country: &str,
    foreign_country: &str,
    with_images: &[&str],
    street_missing: impl Fn(&str) -> bool,
) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| ImageryError::io(root, e))?;
    let path = root.join(GEOCODE_FILE);
    let mut wtr = csv::WriterBuilder::new().from_path(&path)?;
    for e in entries {
        let Some(loc) = e.location else { continue };
        let c = match e.status {
            AddressStatus::Resolved => country,
            AddressStatus::Foreign => foreign_country,
            AddressStatus::Unresolved => continue,
        };
        wtr.serialize(GeocodeRow {
            raw_address: e.raw_address.clone(),
            lat: loc.lat,
            lon: loc.lon,
            country: c.to_string(),
        })?;
    }
    wtr.flush().map_err(|e| ImageryError::io(&path, e))?;
    for id in with_images {
        let dir = root.join(IMAGES_DIR).join(id);
        fs::create_dir_all(&dir).map_err(|e| ImageryError::io(&dir, e))?;
        for view in View::ALL {
            if view == View::Street && street_missing(id) {
                continue;
            }
            let p = dir.join(format!("{view}.svg"));
            fs::write(&p, placeholder_svg(id, view)).map_err(|e| ImageryError::io(&p, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let entries = vec![
            AddressEntry {
                address_id: "SYN-000017".into(),
                raw_address: "SYN-000017, Syntetyczna 17, PL".into(),
                status: AddressStatus::Resolved,
                location: Some(LatLon { lat: 52.1, lon: 21.0 }),
                excluded: None,
            },
            AddressEntry {
                address_id: "SYN-000018".into(),
                raw_address: "SYN-000018, ???".into(),
                status: AddressStatus::Unresolved,
                location: None,
                excluded: None,
            },
        ];
        write_placeholder_fixtures(dir.path(), &entries, "PL", "DE", &["SYN-000017"], |_| true).unwrap();
        let p = FixtureProvider::open(dir.path()).unwrap();
        assert_eq!(
            p.geocode("SYN-000017, Syntetyczna 17, PL").unwrap(),
            GeocodeOutcome::Found {
                location: LatLon { lat: 52.1, lon: 21.0 },
                country: "PL".into()
            }
        );
        assert_eq!(p.geocode("SYN-000018, ???").unwrap(), GeocodeOutcome::NotFound);
        let loc = LatLon { lat: 52.1, lon: 21.0 };
        let sat = p.fetch(&ImageRequest::new("SYN-000017", View::Satellite), loc).unwrap();
        assert!(matches!(sat, ProviderImage::Image { ref extension, .. } if extension == "svg"));
        let street = p.fetch(&ImageRequest::new("SYN-000017", View::Street), loc).unwrap();
        assert_eq!(street, ProviderImage::Missing);
    }
}
