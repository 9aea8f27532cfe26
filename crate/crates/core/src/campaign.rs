//! Two-phase annotation campaign: a common set rated by every annotator,
//! then disjoint random batches covering the remaining addresses.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Common,
    Disjoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchAssignment {
    pub annotator_id: String,
    pub phase: Phase,
    /// Addresses in the order they are served.
    pub addresses: Vec<String>,
}

/// Every annotator gets the same common set plus a near-equal share of the
/// remaining addresses.
pub fn assign_batches(
    addresses: &[String],
    annotator_ids: &[String],
    common_size: usize,
    seed: u64,
) -> Result<Vec<BatchAssignment>> {
    assign_campaign(addresses, annotator_ids, annotator_ids, common_size, seed)
}

/// Like [`assign_batches`], but only `disjoint_annotators` share the
/// remainder. Output is ordered by annotator (as listed in
/// `common_annotators`, then any disjoint-only annotators), common phase first.
pub fn assign_campaign(
    addresses: &[String],
    common_annotators: &[String],
    disjoint_annotators: &[String],
    common_size: usize,
    seed: u64,
) -> Result<Vec<BatchAssignment>> {
    if common_annotators.is_empty() && disjoint_annotators.is_empty() {
        return Err(Error::Config("at least one annotator required".into()));
    }
    if common_size > addresses.len() {
        return Err(Error::Config(format!(
            "common set of {common_size} exceeds {} addresses",
            addresses.len()
        )));
    }
    let unique: BTreeSet<&String> = addresses.iter().collect();
    if unique.len() != addresses.len() {
        return Err(Error::Config("duplicate address ids".into()));
    }
    for list in [common_annotators, disjoint_annotators] {
        let set: BTreeSet<&String> = list.iter().collect();
        if set.len() != list.len() {
            return Err(Error::Config("duplicate annotator ids".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = addresses.to_vec();
    shuffled.shuffle(&mut rng);
    let (common, rest) = shuffled.split_at(common_size);

    let mut annotators: Vec<&String> = common_annotators.iter().collect();
    annotators.extend(disjoint_annotators.iter().filter(|a| !common_annotators.contains(a)));

    let k = disjoint_annotators.len();
    let mut out = Vec::new();
    for a in annotators {
        if common_annotators.contains(a) {
            out.push(BatchAssignment {
                annotator_id: a.clone(),
                phase: Phase::Common,
                addresses: common.to_vec(),
            });
        }
        if let Some(slot) = disjoint_annotators.iter().position(|d| d == a) {
            // contiguous chunks whose sizes differ by at most one
            let (base, extra) = (rest.len() / k, rest.len() % k);
            let start = slot * base + slot.min(extra);
            let len = base + usize::from(slot < extra);
            out.push(BatchAssignment {
                annotator_id: a.clone(),
                phase: Phase::Disjoint,
                addresses: rest[start..start + len].to_vec(),
            });
        }
    }
    if k == 0 && !rest.is_empty() {
        return Err(Error::Config("no annotator for the disjoint phase".into()));
    }
    Ok(out)
}
