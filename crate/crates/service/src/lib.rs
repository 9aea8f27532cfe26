//! HTTP service for the annotation campaign.
//!
//! Every annotator first labels a shared common set, then retained
//! annotators work through disjoint random batches. Submissions are
//! validated against the annotation schema, appended to a per-annotator log
//! and synced before they are acknowledged.

mod api;
mod campaign;
mod error;
mod service;
mod store;

pub use api::{router, serve};
pub use campaign::{AnnotatorAccount, Campaign, CampaignConfig};
pub use error::{FieldError, Result, ServiceError};
pub use service::{Ack, Counts, ImageRef, ImageStatus, NextTask, Progress, Service, Submission, CAMPAIGN_FILE};
pub use store::{Store, Stored, LOG_DIR, SNAPSHOT_FILE};
