use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use streetrisk_core::campaign::{assign_campaign, BatchAssignment, Phase};

use crate::error::{Result, ServiceError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorAccount {
    pub annotator_id: String,
    #[serde(default)]
    pub display_name: String,
    /// Retained annotators receive disjoint batches and enter calibration.
    #[serde(default = "yes")]
    pub retained: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub annotators: Vec<AnnotatorAccount>,
    pub common_size: usize,
    pub seed: u64,
    /// Annotators need this many common-set labels before they count
    /// towards live agreement.
    pub agreement_min_common: usize,
    pub agreement_feedback: bool,
    /// Snapshot the current state after this many accepted submissions.
    pub compact_every: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            annotators: (1..=6)
                .map(|k| AnnotatorAccount {
                    annotator_id: format!("ann{k}"),
                    display_name: format!("Annotator {k}"),
                    retained: k <= 4,
                })
                .collect(),
            common_size: 500,
            seed: 0,
            agreement_min_common: 25,
            agreement_feedback: true,
            compact_every: 200,
        }
    }
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.annotators.is_empty() {
            return Err(ServiceError::Config("no annotators".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &self.annotators {
            let ok = !a.annotator_id.is_empty()
                && a.annotator_id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_'));
            if !ok {
                return Err(ServiceError::Config(format!(
                    "annotator id `{}` must be nonempty ASCII letters, digits, `-` or `_`",
                    a.annotator_id
                )));
            }
            if !seen.insert(a.annotator_id.as_str()) {
                return Err(ServiceError::Config(format!("duplicate annotator `{}`", a.annotator_id)));
            }
        }
        if !self.annotators.iter().any(|a| a.retained) {
            return Err(ServiceError::Config("no retained annotator to take disjoint batches".into()));
        }
        Ok(())
    }
}

/// Fixed assignment of addresses to annotators, persisted at creation so a
/// restart serves the same order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub annotators: Vec<AnnotatorAccount>,
    pub seed: u64,
    pub common_set: Vec<String>,
    pub batches: Vec<BatchAssignment>,
}

impl Campaign {
    /// Everyone rates the common set; retained annotators split the rest.
    pub fn create(addresses: &[String], config: &CampaignConfig) -> Result<Self> {
        config.validate()?;
        let all: Vec<String> = config.annotators.iter().map(|a| a.annotator_id.clone()).collect();
        let retained: Vec<String> = config
            .annotators
            .iter()
            .filter(|a| a.retained)
            .map(|a| a.annotator_id.clone())
            .collect();
        let batches = assign_campaign(addresses, &all, &retained, config.common_size, config.seed)?;
        let common_set = batches
            .iter()
            .find(|b| b.phase == Phase::Common)
            .map(|b| b.addresses.clone())
            .unwrap_or_default();
        Ok(Self {
            annotators: config.annotators.clone(),
            seed: config.seed,
            common_set,
            batches,
        })
    }

    pub fn account(&self, annotator_id: &str) -> Option<&AnnotatorAccount> {
        self.annotators.iter().find(|a| a.annotator_id == annotator_id)
    }
}

/// Per-annotator serving order, common phase first.
#[derive(Debug, Default)]
pub(crate) struct Assignments {
    order: HashMap<String, Vec<(String, Phase)>>,
    lookup: HashMap<String, HashMap<String, Phase>>,
}

impl Assignments {
    pub(crate) fn new(campaign: &Campaign) -> Self {
        let mut out = Self::default();
        for a in &campaign.annotators {
            out.order.entry(a.annotator_id.clone()).or_default();
            out.lookup.entry(a.annotator_id.clone()).or_default();
        }
        let mut batches: Vec<&BatchAssignment> = campaign.batches.iter().collect();
        batches.sort_by_key(|b| b.phase);
        for b in batches {
            let order = out.order.entry(b.annotator_id.clone()).or_default();
            let lookup = out.lookup.entry(b.annotator_id.clone()).or_default();
            for addr in &b.addresses {
                if lookup.insert(addr.clone(), b.phase).is_none() {
                    order.push((addr.clone(), b.phase));
                }
            }
        }
        out
    }

    pub(crate) fn order(&self, annotator_id: &str) -> Option<&[(String, Phase)]> {
        self.order.get(annotator_id).map(Vec::as_slice)
    }

    pub(crate) fn phase(&self, annotator_id: &str, address_id: &str) -> Option<Phase> {
        self.lookup.get(annotator_id)?.get(address_id).copied()
    }
}
