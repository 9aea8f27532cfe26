//! Policies, addresses and the joined modeling dataset.
//!
//! `policies.csv` columns: `policy_id,address_id,exposure,claim_count,model_b_frequency`.
//! `addresses.csv` columns: `address_id,raw_address,status,lat,lon` (lat/lon blank
//! when unresolved).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const POLICY_COLUMNS: [&str; 5] = [
    "policy_id",
    "address_id",
    "exposure",
    "claim_count",
    "model_b_frequency",
];

pub const ADDRESS_COLUMNS: [&str; 5] = ["address_id", "raw_address", "status", "lat", "lon"];

/// One insured policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub policy_id: String,
    pub address_id: String,
    /// Fraction of the year the policy was active, in (0, 1].
    pub exposure: f64,
    pub claim_count: u32,
    /// Expected claims per unit exposure under the incumbent model.
    pub model_b_frequency: f64,
}

impl PolicyRecord {
    /// Offset used by the incumbent-plus-features model: `model_b_frequency * exposure`.
    pub fn model_b_expected(&self) -> f64 {
        self.model_b_frequency * self.exposure
    }
}

/// A row rejected during ingestion. `line` is the 1-based line number in the
/// file, counting the header as line 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolicyBatch {
    pub records: Vec<PolicyRecord>,
    pub rejections: Vec<Rejection>,
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(Error::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        })
    }
}

fn parse_policy(row: &csv::StringRecord) -> std::result::Result<PolicyRecord, String> {
    if row.len() != POLICY_COLUMNS.len() {
        return Err(format!(
            "expected {} fields, found {}",
            POLICY_COLUMNS.len(),
            row.len()
        ));
    }
    let policy_id = row[0].trim();
    let address_id = row[1].trim();
    if policy_id.is_empty() {
        return Err("missing policy_id".into());
    }
    if address_id.is_empty() {
        return Err("missing address_id".into());
    }
    let exposure: f64 = row[2]
        .trim()
        .parse()
        .map_err(|_| format!("unparseable exposure `{}`", &row[2]))?;
    if !exposure.is_finite() {
        return Err("non-finite exposure".into());
    }
    if exposure <= 0.0 {
        return Err("nonpositive exposure".into());
    }
    if exposure > 1.0 {
        return Err("exposure above 1".into());
    }
    let claim_count: u32 = row[3]
        .trim()
        .parse()
        .map_err(|_| format!("invalid claim_count `{}`", &row[3]))?;
    let raw_b = row[4].trim();
    if raw_b.is_empty() {
        return Err("missing model_b_frequency".into());
    }
    let model_b_frequency: f64 = raw_b
        .parse()
        .map_err(|_| format!("unparseable model_b_frequency `{raw_b}`"))?;
    if !model_b_frequency.is_finite() || model_b_frequency <= 0.0 {
        return Err("nonpositive model_b_frequency".into());
    }
    Ok(PolicyRecord {
        policy_id: policy_id.to_string(),
        address_id: address_id.to_string(),
        exposure,
        claim_count,
        model_b_frequency,
    })
}

/// Reads `policies.csv`. Bad rows are rejected individually; only a wrong
/// header or an unreadable stream aborts.
pub fn ingest_policies<R: Read>(reader: R) -> Result<PolicyBatch> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    check_header(rdr.headers()?, &POLICY_COLUMNS)?;

    let mut batch = PolicyBatch::default();
    let mut seen = BTreeSet::new();
    let mut row = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(err) => {
                if matches!(err.kind(), csv::ErrorKind::Io(_)) {
                    return Err(err.into());
                }
                batch.rejections.push(Rejection {
                    line,
                    reason: format!("malformed row: {err}"),
                });
                continue;
            }
        }
        let line = row.position().map_or(line, |p| p.line());
        match parse_policy(&row) {
            Ok(rec) => {
                if seen.insert(rec.policy_id.clone()) {
                    batch.records.push(rec);
                } else {
                    batch.rejections.push(Rejection {
                        line,
                        reason: format!("duplicate policy_id `{}`", rec.policy_id),
                    });
                }
            }
            Err(reason) => batch.rejections.push(Rejection { line, reason }),
        }
    }
    Ok(batch)
}

pub fn write_policies<W: Write>(writer: W, records: &[PolicyRecord]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(POLICY_COLUMNS)?;
    for r in records {
        wtr.write_record([
            r.policy_id.as_str(),
            r.address_id.as_str(),
            &r.exposure.to_string(),
            &r.claim_count.to_string(),
            &r.model_b_frequency.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<policies writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AddressStatus {
    Unresolved,
    Foreign,
    Resolved,
}

impl fmt::Display for AddressStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AddressStatus::Unresolved => "unresolved",
            AddressStatus::Foreign => "foreign",
            AddressStatus::Resolved => "resolved",
        })
    }
}

impl FromStr for AddressStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unresolved" => Ok(AddressStatus::Unresolved),
            "foreign" => Ok(AddressStatus::Foreign),
            "resolved" => Ok(AddressStatus::Resolved),
            other => Err(Error::field("status", format!("unknown status `{other}`"))),
        }
    }
}

/// Why an address was removed from the modeling scope. Ordered so that
/// repeated flags resolve to the same reason regardless of order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExclusionReason {
    Unresolved,
    Foreign,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddressEntry {
    pub address_id: String,
    pub raw_address: String,
    pub status: AddressStatus,
    pub location: Option<LatLon>,
    #[serde(default)]
    pub excluded: Option<ExclusionReason>,
}

impl AddressEntry {
    pub fn is_included(&self) -> bool {
        self.excluded.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExclusionSummary {
    pub newly_excluded: usize,
    pub total_excluded: usize,
    pub remaining: usize,
}

/// Address table keyed by `address_id`, in insertion order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AddressRegistry {
    entries: Vec<AddressEntry>,
    index: BTreeMap<String, usize>,
}

impl AddressRegistry {
    pub fn new(entries: Vec<AddressEntry>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.status == AddressStatus::Resolved && e.location.is_none() {
                return Err(Error::field(
                    "status",
                    format!("address `{}` is resolved but has no location", e.address_id),
                ));
            }
            if index.insert(e.address_id.clone(), i).is_some() {
                return Err(Error::field(
                    "address_id",
                    format!("duplicate address `{}`", e.address_id),
                ));
            }
        }
        Ok(Self { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AddressEntry] {
        &self.entries
    }

    pub fn get(&self, address_id: &str) -> Option<&AddressEntry> {
        self.index.get(address_id).map(|&i| &self.entries[i])
    }

    pub fn get_mut(&mut self, address_id: &str) -> Option<&mut AddressEntry> {
        self.index.get(address_id).map(|&i| &mut self.entries[i])
    }

    pub fn included(&self) -> impl Iterator<Item = &AddressEntry> {
        self.entries.iter().filter(|e| e.is_included())
    }

    pub fn excluded_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_included()).count()
    }

    /// Flags addresses as out of scope. Validation happens before any
    /// mutation, so an unknown id leaves the registry untouched.
    pub fn exclude_addresses(
        &mut self,
        flags: &[(String, ExclusionReason)],
    ) -> Result<ExclusionSummary> {
        if let Some((id, _)) = flags.iter().find(|(id, _)| !self.index.contains_key(id)) {
            return Err(Error::UnknownAddress(id.clone()));
        }
        let mut newly = 0;
        for (id, reason) in flags {
            let entry = &mut self.entries[self.index[id]];
            entry.excluded = match entry.excluded {
                None => {
                    newly += 1;
                    Some(*reason)
                }
                Some(prev) => Some(prev.max(*reason)),
            };
        }
        let total_excluded = self.excluded_count();
        Ok(ExclusionSummary {
            newly_excluded: newly,
            total_excluded,
            remaining: self.entries.len() - total_excluded,
        })
    }

    /// Excludes every address whose status is not `resolved`.
    pub fn exclude_non_resolved(&mut self) -> Result<ExclusionSummary> {
        let flags: Vec<_> = self
            .entries
            .iter()
            .filter_map(|e| match e.status {
                AddressStatus::Resolved => None,
                AddressStatus::Foreign => Some((e.address_id.clone(), ExclusionReason::Foreign)),
                AddressStatus::Unresolved => {
                    Some((e.address_id.clone(), ExclusionReason::Unresolved))
                }
            })
            .collect();
        self.exclude_addresses(&flags)
    }
}

fn parse_coord(field: &str, raw: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| Error::field(field, format!("unparseable coordinate `{raw}`")))
}

pub fn ingest_addresses<R: Read>(reader: R) -> Result<AddressRegistry> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    check_header(rdr.headers()?, &ADDRESS_COLUMNS)?;
    let mut entries = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let status: AddressStatus = row[2].trim().parse()?;
        let lat = parse_coord("lat", &row[3])?;
        let lon = parse_coord("lon", &row[4])?;
        let location = match (lat, lon) {
            (Some(lat), Some(lon)) => Some(LatLon { lat, lon }),
            (None, None) => None,
            _ => {
                return Err(Error::field(
                    "lat",
                    format!("address `{}` has only one coordinate", &row[0]),
                ))
            }
        };
        entries.push(AddressEntry {
            address_id: row[0].trim().to_string(),
            raw_address: row[1].to_string(),
            status,
            location,
            excluded: None,
        });
    }
    AddressRegistry::new(entries)
}

pub fn write_addresses<W: Write>(writer: W, entries: &[AddressEntry]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(ADDRESS_COLUMNS)?;
    for e in entries {
        let (lat, lon) = match e.location {
            Some(l) => (l.lat.to_string(), l.lon.to_string()),
            None => (String::new(), String::new()),
        };
        wtr.write_record([
            e.address_id.as_str(),
            e.raw_address.as_str(),
            &e.status.to_string(),
            &lat,
            &lon,
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<addresses writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    RealIngest,
    Synthetic,
}

/// Policies joined to their address features. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub policies: Vec<PolicyRecord>,
    /// Parallel to `policies`.
    pub features: Vec<FeatureVector>,
    pub provenance: Provenance,
    /// Policies dropped because their address was excluded.
    pub dropped_policies: usize,
}

impl Dataset {
    /// Joins policies to features by address. Policies at excluded addresses
    /// are dropped; every remaining policy must find a known address and a
    /// feature vector.
    pub fn join(
        policies: &[PolicyRecord],
        registry: &AddressRegistry,
        features: &[FeatureVector],
        provenance: Provenance,
    ) -> Result<Self> {
        let by_address: BTreeMap<&str, &FeatureVector> =
            features.iter().map(|f| (f.address_id.as_str(), f)).collect();
        let mut out_policies = Vec::with_capacity(policies.len());
        let mut out_features = Vec::with_capacity(policies.len());
        let mut dropped = 0;
        for p in policies {
            let entry = registry
                .get(&p.address_id)
                .ok_or_else(|| Error::UnknownAddress(p.address_id.clone()))?;
            if !entry.is_included() {
                dropped += 1;
                continue;
            }
            let fv = by_address.get(p.address_id.as_str()).ok_or_else(|| {
                Error::field(
                    "address_id",
                    format!(
                        "policy `{}` references address `{}` with no features",
                        p.policy_id, p.address_id
                    ),
                )
            })?;
            out_policies.push(p.clone());
            out_features.push((*fv).clone());
        }
        Ok(Self {
            policies: out_policies,
            features: out_features,
            provenance,
            dropped_policies: dropped,
        })
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn claim_counts(&self) -> Vec<u32> {
        self.policies.iter().map(|p| p.claim_count).collect()
    }

    pub fn exposures(&self) -> Vec<f64> {
        self.policies.iter().map(|p| p.exposure).collect()
    }

    /// `model_b_frequency * exposure` per policy.
    pub fn model_b_offsets(&self) -> Vec<f64> {
        self.policies.iter().map(|p| p.model_b_expected()).collect()
    }
}
