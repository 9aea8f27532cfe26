use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use streetrisk_core::annotation::{write_annotations, AnnotationRecord, AnnotationValue};
use streetrisk_core::campaign::Phase;
use streetrisk_core::kappa::{agreement_report, fully_rated_items, KappaReport};
use streetrisk_core::schema::AnnotationSchema;
use streetrisk_imagery::{CacheEntry, ImageCache, View};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::campaign::{Assignments, Campaign, CampaignConfig};
use crate::error::{FieldError, Result, ServiceError};
use crate::store::Store;

pub const CAMPAIGN_FILE: &str = "campaign.json";

/// Body of `POST /api/annotations`. A missing timestamp is filled with the
/// server's UTC time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submission {
    pub address_id: String,
    pub annotator_id: String,
    #[serde(default)]
    pub timestamp: Option<String>,
    pub values: BTreeMap<String, AnnotationValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub status: String,
    pub address_id: String,
    pub annotator_id: String,
    pub revision: u64,
    pub replaced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageStatus {
    Available,
    Missing,
    NotCached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRef {
    pub view: View,
    pub url: String,
    pub status: ImageStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextTask {
    Task {
        annotator_id: String,
        address_id: String,
        phase: Phase,
        /// 0-based position in the annotator's queue.
        position: usize,
        images: Vec<ImageRef>,
        schema: AnnotationSchema,
    },
    Complete {
        annotator_id: String,
        total: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub done: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub annotator_id: String,
    pub display_name: String,
    pub retained: bool,
    pub common: Counts,
    pub disjoint: Counts,
    pub complete: bool,
}

/// Campaign state shared by all request handlers.
pub struct Service {
    schema: AnnotationSchema,
    campaign: Campaign,
    assignments: Assignments,
    store: Store,
    images: Option<ImageCache>,
    agreement_min_common: usize,
    agreement_feedback: bool,
    compact_every: usize,
    since_compact: AtomicUsize,
}

impl Service {
    /// Opens the campaign stored in `state_dir`, creating it from
    /// `addresses` and `config` on first use. An existing campaign keeps
    /// its assignments; the agreement and compaction settings always come
    /// from `config`.
    pub fn open(
        state_dir: &Path,
        schema: AnnotationSchema,
        addresses: &[String],
        config: &CampaignConfig,
        images: Option<ImageCache>,
    ) -> Result<Self> {
        schema.validate()?;
        config.validate()?;
        fs::create_dir_all(state_dir).map_err(|e| ServiceError::io(state_dir, e))?;
        let path = state_dir.join(CAMPAIGN_FILE);
        let campaign = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                let c = Campaign::create(addresses, config)?;
                let tmp = path.with_extension("json.tmp");
                fs::write(&tmp, serde_json::to_vec_pretty(&c)?).map_err(|e| ServiceError::io(&tmp, e))?;
                fs::rename(&tmp, &path).map_err(|e| ServiceError::io(&path, e))?;
                c
            }
            Err(e) => return Err(ServiceError::io(&path, e)),
        };
        let ids: Vec<String> = campaign.annotators.iter().map(|a| a.annotator_id.clone()).collect();
        let store = Store::open(state_dir, &ids)?;
        Ok(Self {
            schema,
            assignments: Assignments::new(&campaign),
            campaign,
            store,
            images,
            agreement_min_common: config.agreement_min_common,
            agreement_feedback: config.agreement_feedback,
            compact_every: config.compact_every,
            since_compact: AtomicUsize::new(0),
        })
    }

    pub fn schema(&self) -> &AnnotationSchema {
        &self.schema
    }

    pub fn campaign(&self) -> &Campaign {
        &self.campaign
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn order(&self, annotator_id: &str) -> Result<&[(String, Phase)]> {
        self.assignments
            .order(annotator_id)
            .ok_or_else(|| ServiceError::UnknownAnnotator(annotator_id.to_string()))
    }

    fn image_status(&self, address_id: &str, view: View) -> ImageStatus {
        match self.images.as_ref().and_then(|c| c.get(address_id, view)) {
            Some(CacheEntry::Image(_)) => ImageStatus::Available,
            Some(CacheEntry::Missing { .. }) => ImageStatus::Missing,
            None => ImageStatus::NotCached,
        }
    }

    pub fn next_task(&self, annotator_id: &str) -> Result<NextTask> {
        let order = self.order(annotator_id)?;
        let next = order
            .iter()
            .enumerate()
            .find(|(_, (addr, _))| !self.store.contains(annotator_id, addr));
        Ok(match next {
            Some((position, (address_id, phase))) => NextTask::Task {
                annotator_id: annotator_id.to_string(),
                address_id: address_id.clone(),
                phase: *phase,
                position,
                images: View::ALL
                    .iter()
                    .map(|&view| ImageRef {
                        view,
                        url: format!("/api/images/{address_id}/{view}"),
                        status: self.image_status(address_id, view),
                    })
                    .collect(),
                schema: self.schema.clone(),
            },
            None => NextTask::Complete {
                annotator_id: annotator_id.to_string(),
                total: order.len(),
            },
        })
    }

    /// Validates, persists durably, then acknowledges.
    pub fn submit(&self, submission: Submission) -> Result<Ack> {
        let Submission {
            address_id,
            annotator_id,
            timestamp,
            values,
        } = submission;
        if self.campaign.account(&annotator_id).is_none() {
            return Err(ServiceError::UnknownAnnotator(annotator_id));
        }
        let timestamp = match timestamp {
            Some(t) if !t.trim().is_empty() => t.trim().to_string(),
            _ => now_utc(),
        };
        let record = AnnotationRecord {
            address_id,
            annotator_id,
            timestamp,
            values,
        };
        let mut errors: Vec<FieldError> = self
            .schema
            .field_errors(&record, true)
            .into_iter()
            .map(|(field, message)| FieldError { field, message })
            .collect();
        if record.timestamp.contains(['\n', '\r']) {
            errors.push(FieldError {
                field: "timestamp".into(),
                message: "must be a single line".into(),
            });
        }
        if !errors.is_empty() {
            return Err(ServiceError::Validation(errors));
        }
        if self.assignments.phase(&record.annotator_id, &record.address_id).is_none() {
            return Err(ServiceError::NotAssigned {
                annotator_id: record.annotator_id,
                address_id: record.address_id,
            });
        }
        let stored = self.store.append(record)?;
        if self.compact_every > 0 && self.since_compact.fetch_add(1, Ordering::SeqCst) + 1 >= self.compact_every {
            self.since_compact.store(0, Ordering::SeqCst);
            self.store.compact()?;
        }
        Ok(Ack {
            status: "accepted".into(),
            address_id: stored.record.address_id,
            annotator_id: stored.record.annotator_id,
            revision: stored.revision,
            replaced: stored.revision > 1,
        })
    }

    pub fn progress(&self, annotator_id: &str) -> Result<Progress> {
        let order = self.order(annotator_id)?;
        let account = self
            .campaign
            .account(annotator_id)
            .ok_or_else(|| ServiceError::UnknownAnnotator(annotator_id.to_string()))?;
        let (mut common, mut disjoint) = (Counts::default(), Counts::default());
        for (addr, phase) in order {
            let c = match phase {
                Phase::Common => &mut common,
                Phase::Disjoint => &mut disjoint,
            };
            c.total += 1;
            if self.store.contains(annotator_id, addr) {
                c.done += 1;
            }
        }
        Ok(Progress {
            annotator_id: annotator_id.to_string(),
            display_name: account.display_name.clone(),
            retained: account.retained,
            common,
            disjoint,
            complete: common.done == common.total && disjoint.done == disjoint.total,
        })
    }

    /// Kappa over the common-set items labelled by every annotator who has
    /// reached the configured minimum.
    pub fn agreement(&self) -> Result<KappaReport> {
        if !self.agreement_feedback {
            return Err(ServiceError::AgreementDisabled);
        }
        let common: std::collections::HashSet<&str> =
            self.campaign.common_set.iter().map(String::as_str).collect();
        let records: Vec<AnnotationRecord> = self
            .store
            .records()
            .into_iter()
            .filter(|r| common.contains(r.address_id.as_str()))
            .collect();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &records {
            *counts.entry(r.annotator_id.as_str()).or_default() += 1;
        }
        let min = self.agreement_min_common.max(1);
        let raters: Vec<String> = self
            .campaign
            .annotators
            .iter()
            .map(|a| a.annotator_id.clone())
            .filter(|a| counts.get(a.as_str()).copied().unwrap_or(0) >= min)
            .collect();
        if raters.len() < 2 {
            return Err(ServiceError::NotYetComputable(format!(
                "{} annotator(s) have at least {min} common-set labels; 2 are needed",
                raters.len()
            )));
        }
        let items = fully_rated_items(&records, &self.campaign.common_set, &raters);
        if items.len() < min {
            return Err(ServiceError::NotYetComputable(format!(
                "only {} common-set addresses are labelled by all of {}; {min} are needed",
                items.len(),
                raters.join(", ")
            )));
        }
        Ok(agreement_report(&records, &self.schema, &items, Some(&raters))?)
    }

    /// Image bytes and their file extension.
    pub fn image(&self, address_id: &str, view: View) -> Result<(Vec<u8>, String)> {
        let key = format!("{address_id}/{view}");
        let cache = self.images.as_ref().ok_or_else(|| ServiceError::ImageNotCached(key.clone()))?;
        match cache.get(address_id, view) {
            Some(CacheEntry::Image(img)) => {
                let bytes = cache.read(&img)?;
                let ext = img
                    .path
                    .extension()
                    .and_then(|e| e.to_str())
                    .unwrap_or("")
                    .to_string();
                Ok((bytes, ext))
            }
            Some(CacheEntry::Missing { .. }) => Err(ServiceError::MissingImagery(key)),
            None => Err(ServiceError::ImageNotCached(key)),
        }
    }

    /// Current records in the interchange CSV format, ordered by annotator
    /// then address.
    pub fn export_csv(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        write_annotations(&mut out, &self.store.records(), &self.schema)?;
        Ok(out)
    }

    pub fn compact(&self) -> Result<()> {
        self.store.compact()
    }
}

fn now_utc() -> String {
    let now = OffsetDateTime::now_utc();
    now.replace_nanosecond(0)
        .unwrap_or(now)
        .format(&Rfc3339)
        .unwrap_or_default()
}
