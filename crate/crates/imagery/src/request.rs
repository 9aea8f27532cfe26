use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ImageryError, Result};

/// Largest width or height accepted by common static-image APIs.
pub const MAX_IMAGE_SIDE: u32 = 640;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Street,
    Satellite,
}

impl View {
    pub const ALL: [View; 2] = [View::Street, View::Satellite];

    pub fn as_str(self) -> &'static str {
        match self {
            View::Street => "street",
            View::Satellite => "satellite",
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for View {
    type Err = ImageryError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "street" => Ok(View::Street),
            "satellite" => Ok(View::Satellite),
            other => Err(ImageryError::InvalidRequest(format!("unknown view `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRequest {
    pub address_id: String,
    pub view: View,
    pub width: u32,
    pub height: u32,
    /// Street view only, degrees clockwise from north.
    pub heading: Option<f64>,
    /// Street view only, degrees up from horizontal.
    pub pitch: Option<f64>,
    /// Satellite only.
    pub zoom: Option<u8>,
}

impl ImageRequest {
    /// 640×640 with provider defaults for the view.
    pub fn new(address_id: impl Into<String>, view: View) -> Self {
        let (heading, pitch, zoom) = match view {
            View::Street => (None, Some(0.0), None),
            View::Satellite => (None, None, Some(19)),
        };
        Self {
            address_id: address_id.into(),
            view,
            width: MAX_IMAGE_SIDE,
            height: MAX_IMAGE_SIDE,
            heading,
            pitch,
            zoom,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ImageryError::InvalidRequest(m));
        if self.address_id.trim().is_empty() {
            return bad("empty address id".into());
        }
        for side in [self.width, self.height] {
            if side == 0 || side > MAX_IMAGE_SIDE {
                return bad(format!("size {}x{} outside 1..={MAX_IMAGE_SIDE}", self.width, self.height));
            }
        }
        if let Some(h) = self.heading {
            if !(0.0..=360.0).contains(&h) {
                return bad(format!("heading {h} outside 0..=360"));
            }
        }
        if let Some(p) = self.pitch {
            if !(-90.0..=90.0).contains(&p) {
                return bad(format!("pitch {p} outside -90..=90"));
            }
        }
        if let Some(z) = self.zoom {
            if z > 21 {
                return bad(format!("zoom {z} above 21"));
            }
        }
        match self.view {
            View::Street if self.zoom.is_some() => bad("zoom applies to satellite views".into()),
            View::Satellite if self.heading.is_some() || self.pitch.is_some() => {
                bad("heading and pitch apply to street views".into())
            }
            _ => Ok(()),
        }
    }
}
