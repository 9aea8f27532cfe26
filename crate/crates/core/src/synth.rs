//! Seeded synthetic portfolios with planted house-feature effects.
//!
//! Each policy's latent claim frequency is
//! `base · exp(u) · Π RR_v^{x_v}`, where `u` is a rating-factor effect the
//! incumbent model can see and `x_v` are the true binary house features.
//! The incumbent's frequency mixes the log latent signal it can see with
//! independent noise (`model_b_quality` = 1 is an oracle for that signal,
//! 0 is pure noise) and is renormalised to the target mean. Claims are
//! Poisson with mean `latent · exposure`. Annotators observe the true house
//! attributes through per-annotator bias, scale, dispersion and flip noise.
//!
//! Ordinal bias and dispersion are expressed in half-ranges of each scale,
//! so the same annotator profile is proportionally noisier on a 1–3 scale
//! than on a 1–10 scale in absolute points, but equally noisy relative to
//! the scale.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::annotation::{write_annotations, AnnotationRecord, AnnotationValue};
use crate::campaign::{assign_campaign, Phase};
use crate::error::{Error, Result};
use crate::portfolio::{
    write_addresses, write_policies, AddressEntry, AddressStatus, LatLon, PolicyRecord,
};
use crate::schema::{self, AnnotationSchema, VariableKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExposureConfig {
    /// Probability that a policy was active the whole year.
    pub full_year_share: f64,
    /// Partial-year exposures are uniform on `[min_partial, 1)`.
    pub min_partial: f64,
}

impl Default for ExposureConfig {
    fn default() -> Self {
        Self {
            full_year_share: 0.6,
            min_partial: 1.0 / 12.0,
        }
    }
}

/// Prevalence and true relative risk of one house feature's binary truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEffect {
    pub variable: String,
    pub prevalence: f64,
    pub relative_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorProfile {
    pub id: String,
    /// Continues past the common set and feeds calibration and features.
    pub retained: bool,
    /// Additive shift on ordinal scales, in half-ranges.
    pub bias: f64,
    /// Multiplicative stretch around the scale midpoint.
    pub scale: f64,
    /// Gaussian noise sd on ordinal scales, in half-ranges.
    pub dispersion: f64,
    /// Probability of reporting a wrong category on choice variables.
    pub error_rate: f64,
}

impl AnnotatorProfile {
    pub fn exact(id: &str) -> Self {
        Self {
            id: id.into(),
            retained: true,
            bias: 0.0,
            scale: 1.0,
            dispersion: 0.0,
            error_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_policies: usize,
    /// Mean latent claim frequency per unit exposure.
    pub target_frequency: f64,
    pub exposure: ExposureConfig,
    /// Log-scale sd of the rating-factor effect known to the incumbent.
    pub incumbent_risk_sd: f64,
    /// In [0, 1]; weight of the true signal in the incumbent's log frequency.
    pub model_b_quality: f64,
    /// In [0, 1]; share of the house-feature effect the incumbent already sees.
    pub model_b_house_visibility: f64,
    pub features: Vec<FeatureEffect>,
    /// Share of policies placed at an already used address.
    pub shared_address_share: f64,
    /// Share of addresses without street-level imagery.
    pub missing_imagery_share: f64,
    pub n_foreign: usize,
    pub n_unresolved: usize,
    pub common_set_size: usize,
    pub annotators: Vec<AnnotatorProfile>,
}

fn effect(variable: &str, prevalence: f64, relative_risk: f64) -> FeatureEffect {
    FeatureEffect {
        variable: variable.into(),
        prevalence,
        relative_risk,
    }
}

fn profile(id: &str, retained: bool, bias: f64, scale: f64, dispersion: f64, error_rate: f64) -> AnnotatorProfile {
    AnnotatorProfile {
        id: id.into(),
        retained,
        bias,
        scale,
        dispersion,
        error_rate,
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 20_190_301,
            n_policies: 20_000,
            target_frequency: 0.05,
            exposure: ExposureConfig::default(),
            incumbent_risk_sd: 0.6,
            model_b_quality: 0.75,
            model_b_house_visibility: 0.0,
            features: vec![
                effect(schema::NEIGHBOURHOOD, 0.55, 0.7),
                effect(schema::DENSITY, 0.35, 1.0),
                effect(schema::SV_QUALITY, 0.8, 0.75),
                effect(schema::HOUSE_TYPE, 0.45, 0.7),
                effect(schema::HOUSE_AGE, 0.35, 1.4),
                effect(schema::HOUSE_CONDITION, 0.3, 1.45),
                effect(schema::WEALTH, 0.3, 1.0),
            ],
            shared_address_share: 0.0,
            missing_imagery_share: 0.05,
            n_foreign: 37,
            n_unresolved: 92,
            common_set_size: 500,
            annotators: vec![
                profile("ann1", true, 0.0, 1.0, 0.20, 0.06),
                profile("ann2", true, 0.30, 0.9, 0.20, 0.07),
                profile("ann3", true, -0.90, 1.0, 0.20, 0.08),
                profile("ann4", true, 0.25, 0.9, 0.20, 0.06),
                profile("ann5", false, 0.60, 1.4, 0.80, 0.35),
                profile("ann6", false, -0.60, 0.6, 0.90, 0.40),
            ],
        }
    }
}

impl SynthConfig {
    /// Default portfolio with every relative risk set to 1.
    pub fn null_effects() -> Self {
        let mut c = Self::default();
        for f in &mut c.features {
            f.relative_risk = 1.0;
        }
        c
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn feature(&self, variable: &str) -> Option<&FeatureEffect> {
        self.features.iter().find(|f| f.variable == variable)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_policies == 0 {
            return bad("n_policies must be positive".into());
        }
        if !(self.target_frequency > 0.0 && self.target_frequency < 1.0) {
            return bad(format!(
                "target frequency {} outside (0, 1)",
                self.target_frequency
            ));
        }
        let e = &self.exposure;
        if !(0.0..=1.0).contains(&e.full_year_share) || !(e.min_partial > 0.0 && e.min_partial <= 1.0) {
            return bad("exposure parameters out of range".into());
        }
        if !(self.incumbent_risk_sd >= 0.0 && self.incumbent_risk_sd.is_finite()) {
            return bad("incumbent_risk_sd must be nonnegative".into());
        }
        for (name, v) in [
            ("model_b_quality", self.model_b_quality),
            ("model_b_house_visibility", self.model_b_house_visibility),
            ("shared_address_share", self.shared_address_share),
            ("missing_imagery_share", self.missing_imagery_share),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        if self.shared_address_share >= 1.0 {
            return bad("shared_address_share must be below 1".into());
        }
        for name in schema::VARIABLE_NAMES {
            let Some(f) = self.feature(name) else {
                return bad(format!("missing effect for `{name}`"));
            };
            if !(f.prevalence > 0.0 && f.prevalence < 1.0) {
                return bad(format!("prevalence of `{name}` outside (0, 1)"));
            }
            if !(f.relative_risk > 0.0 && f.relative_risk.is_finite()) {
                return bad(format!("relative risk of `{name}` must be positive"));
            }
        }
        if self.features.len() != schema::VARIABLE_NAMES.len() {
            return bad("unknown or duplicate feature effects".into());
        }
        if self.annotators.is_empty() {
            return bad("at least one annotator required".into());
        }
        let ids: BTreeSet<&str> = self.annotators.iter().map(|a| a.id.as_str()).collect();
        if ids.len() != self.annotators.len() {
            return bad("duplicate annotator ids".into());
        }
        if !self.annotators.iter().any(|a| a.retained) {
            return bad("at least one retained annotator required".into());
        }
        for a in &self.annotators {
            if !(a.scale > 0.0)
                || !(a.dispersion >= 0.0)
                || !(0.0..=1.0).contains(&a.error_rate)
                || !a.bias.is_finite()
            {
                return bad(format!("noise parameters of `{}` out of range", a.id));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddressTruth {
    pub address_id: String,
    pub indicators: BTreeMap<String, u8>,
    /// No street-level imagery exists for this address.
    pub street_view_missing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTruth {
    pub policy_id: String,
    pub latent_frequency: f64,
    pub expected_claims: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub base_frequency: f64,
    pub relative_risks: BTreeMap<String, f64>,
    pub addresses: Vec<AddressTruth>,
    pub policies: Vec<PolicyTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPortfolio {
    pub config: SynthConfig,
    pub policies: Vec<PolicyRecord>,
    pub addresses: Vec<AddressEntry>,
    pub annotations: Vec<AnnotationRecord>,
    /// Addresses every annotator rated.
    pub common_set: Vec<String>,
    pub truth: SynthTruth,
}

impl SyntheticPortfolio {
    pub fn retained_annotators(&self) -> Vec<String> {
        self.config
            .annotators
            .iter()
            .filter(|a| a.retained)
            .map(|a| a.id.clone())
            .collect()
    }
}

/// True attribute values of one address.
struct HouseTruth {
    values: BTreeMap<String, AnnotationValue>,
    indicators: BTreeMap<String, u8>,
}

impl HouseTruth {
    fn street_view_missing(&self) -> bool {
        self.values
            .get(schema::SV_QUALITY)
            .and_then(AnnotationValue::as_choice)
            == Some("missing")
    }
}

/// First category counted as the "high" level of each ordinal variable.
fn upper_start(variable: &str) -> i32 {
    match variable {
        schema::DENSITY => 4,
        schema::WEALTH => 6,
        _ => 3,
    }
}

const RESIDENTIAL: [&str; 3] = ["detached_houses", "terraced_houses", "apartment_blocks"];

fn draw_house(cfg: &SynthConfig, schema: &AnnotationSchema, rng: &mut ChaCha8Rng) -> HouseTruth {
    let mut values = BTreeMap::new();
    let mut indicators = BTreeMap::new();
    for var in &schema.variables {
        let p = cfg.feature(&var.name).map_or(0.5, |f| f.prevalence);
        let name = var.name.as_str();
        let (value, bit) = match (&var.kind, name) {
            (VariableKind::Ordinal { min, max }, _) => {
                let bit = rng.random_bool(p);
                let cut = upper_start(name);
                let x = if bit {
                    rng.random_range(cut..=*max)
                } else {
                    rng.random_range(*min..cut)
                };
                (AnnotationValue::Ordinal(f64::from(x)), bit)
            }
            (VariableKind::MultiChoice { codes }, _) => {
                let bit = rng.random_bool(p);
                let residential: Vec<&String> = codes.iter().filter(|c| RESIDENTIAL.contains(&c.as_str())).collect();
                let other: Vec<&String> = codes.iter().filter(|c| !RESIDENTIAL.contains(&c.as_str())).collect();
                let mut set = BTreeSet::new();
                if bit {
                    set.insert((*residential.choose(rng).unwrap()).clone());
                    if rng.random_bool(0.3) {
                        set.insert((*residential.choose(rng).unwrap()).clone());
                    }
                } else {
                    set.insert((*other.choose(rng).unwrap()).clone());
                    if rng.random_bool(0.6) {
                        set.insert((*residential.choose(rng).unwrap()).clone());
                    }
                }
                (AnnotationValue::Multi(set), bit)
            }
            (VariableKind::SingleChoice { .. }, schema::SV_QUALITY) => {
                if rng.random_bool(cfg.missing_imagery_share) {
                    (AnnotationValue::Choice("missing".into()), false)
                } else {
                    let bit = rng.random_bool(p);
                    let code = if bit { "good" } else { "bad" };
                    (AnnotationValue::Choice(code.into()), bit)
                }
            }
            (VariableKind::SingleChoice { codes }, _) => {
                let bit = rng.random_bool(p);
                let code = if bit {
                    codes[0].clone()
                } else {
                    codes[1..].choose(rng).unwrap().clone()
                };
                (AnnotationValue::Choice(code), bit)
            }
        };
        values.insert(var.name.clone(), value);
        indicators.insert(var.name.clone(), u8::from(bit));
    }
    HouseTruth { values, indicators }
}

fn observe(
    truth: &BTreeMap<String, AnnotationValue>,
    who: &AnnotatorProfile,
    schema: &AnnotationSchema,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<String, AnnotationValue> {
    let mut out = BTreeMap::new();
    for var in &schema.variables {
        let t = &truth[&var.name];
        let v = match (&var.kind, t) {
            (VariableKind::Ordinal { min, max }, AnnotationValue::Ordinal(x)) => {
                let (lo, hi) = (f64::from(*min), f64::from(*max));
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                let noise = if who.dispersion > 0.0 {
                    Normal::new(0.0, who.dispersion * half).unwrap().sample(rng)
                } else {
                    0.0
                };
                let seen = mid + who.scale * (x - mid) + who.bias * half + noise;
                AnnotationValue::Ordinal(seen.round().clamp(lo, hi))
            }
            (VariableKind::SingleChoice { codes }, AnnotationValue::Choice(c)) => {
                let objective_missing = var.name == schema::SV_QUALITY && c == "missing";
                if !objective_missing && who.error_rate > 0.0 && rng.random_bool(who.error_rate) {
                    let pool: Vec<&String> = codes
                        .iter()
                        .filter(|x| *x != c && !(var.name == schema::SV_QUALITY && *x == "missing"))
                        .collect();
                    AnnotationValue::Choice((*pool.choose(rng).unwrap()).clone())
                } else {
                    t.clone()
                }
            }
            (VariableKind::MultiChoice { codes }, AnnotationValue::Multi(set)) => {
                let mut set = set.clone();
                if who.error_rate > 0.0 && rng.random_bool(who.error_rate) {
                    let code = codes.choose(rng).unwrap();
                    if !set.remove(code) {
                        set.insert(code.clone());
                    }
                    if set.is_empty() {
                        set.insert(code.clone());
                    }
                }
                AnnotationValue::Multi(set)
            }
            _ => t.clone(),
        };
        out.insert(var.name.clone(), v);
    }
    out
}

fn timestamp(step: u64) -> String {
    // 30 s per task from 2019-03-01T08:00:00Z; March has 31 days, wrap months
    // are not needed at campaign scale but the day counter keeps going.
    let secs = 8 * 3600 + step * 30;
    let (day, rem) = (secs / 86_400, secs % 86_400);
    format!(
        "2019-03-{:02}T{:02}:{:02}:{:02}Z",
        1 + day,
        rem / 3600,
        (rem % 3600) / 60,
        rem % 60
    )
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn generate_portfolio(config: &SynthConfig) -> Result<SyntheticPortfolio> {
    config.validate()?;
    let schema = AnnotationSchema::standard();
    let mut rng_house = stream(config.seed, 1);
    let mut rng_policy = stream(config.seed, 2);
    let mut rng_claims = stream(config.seed, 3);
    let mut rng_b = stream(config.seed, 4);
    let mut rng_annot = stream(config.seed, 5);
    let mut rng_addr = stream(config.seed, 6);

    // addresses and their houses
    let n = config.n_policies;
    let mut address_of_policy = Vec::with_capacity(n);
    let mut n_addresses = 0usize;
    for i in 0..n {
        if i > 0 && rng_addr.random_bool(config.shared_address_share) {
            address_of_policy.push(rng_addr.random_range(0..n_addresses));
        } else {
            address_of_policy.push(n_addresses);
            n_addresses += 1;
        }
    }
    let address_ids: Vec<String> = (0..n_addresses).map(|k| format!("SYN-{:06}", k + 1)).collect();
    let houses: Vec<HouseTruth> = (0..n_addresses)
        .map(|_| draw_house(config, &schema, &mut rng_house))
        .collect();

    let n_out = config.n_foreign + config.n_unresolved;
    if n_out > n_addresses {
        return Err(Error::Config(format!(
            "{n_out} excluded addresses exceed {n_addresses} addresses"
        )));
    }
    let mut order: Vec<usize> = (0..n_addresses).collect();
    order.shuffle(&mut rng_addr);
    let mut status = vec![AddressStatus::Resolved; n_addresses];
    for &k in &order[..config.n_foreign] {
        status[k] = AddressStatus::Foreign;
    }
    for &k in &order[config.n_foreign..n_out] {
        status[k] = AddressStatus::Unresolved;
    }
    let addresses: Vec<AddressEntry> = (0..n_addresses)
        .map(|k| {
            let id = &address_ids[k];
            let (raw, location) = match status[k] {
                AddressStatus::Resolved => (
                    format!("{id}, Syntetyczna {}, PL", k + 1),
                    Some(LatLon {
                        lat: rng_addr.random_range(49.0..54.8),
                        lon: rng_addr.random_range(14.1..24.1),
                    }),
                ),
                AddressStatus::Foreign => (
                    format!("{id}, Synthetische Strasse {}, DE", k + 1),
                    Some(LatLon {
                        lat: rng_addr.random_range(50.0..54.0),
                        lon: rng_addr.random_range(7.0..13.0),
                    }),
                ),
                AddressStatus::Unresolved => (format!("{id}, ???"), None),
            };
            AddressEntry {
                address_id: id.clone(),
                raw_address: raw,
                status: status[k],
                location,
                excluded: None,
            }
        })
        .collect();

    // latent frequencies
    let log_rr: BTreeMap<&str, f64> = config
        .features
        .iter()
        .map(|f| (f.variable.as_str(), f.relative_risk.ln()))
        .collect();
    let house_log_effect: Vec<f64> = houses
        .iter()
        .map(|h| {
            h.indicators
                .iter()
                .map(|(v, &b)| f64::from(b) * log_rr[v.as_str()])
                .sum()
        })
        .collect();
    let sd = config.incumbent_risk_sd;
    let rating = Normal::new(-0.5 * sd * sd, sd.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let mut exposures = Vec::with_capacity(n);
    let mut rating_effect = Vec::with_capacity(n);
    for _ in 0..n {
        let e = if rng_policy.random_bool(config.exposure.full_year_share) {
            1.0
        } else {
            rng_policy.random_range(config.exposure.min_partial..1.0)
        };
        exposures.push(e);
        rating_effect.push(if sd > 0.0 { rating.sample(&mut rng_policy) } else { 0.0 });
    }
    let unscaled: Vec<f64> = (0..n)
        .map(|i| (rating_effect[i] + house_log_effect[address_of_policy[i]]).exp())
        .collect();
    let base = config.target_frequency / (unscaled.iter().sum::<f64>() / n as f64);
    let latent: Vec<f64> = unscaled.iter().map(|u| base * u).collect();

    let mut claims = Vec::with_capacity(n);
    for i in 0..n {
        let mean = latent[i] * exposures[i];
        let y = Poisson::new(mean)
            .map_err(|e| Error::Config(e.to_string()))?
            .sample(&mut rng_claims);
        claims.push(y as u32);
    }

    // incumbent model: geometric mixing of the visible signal with noise
    let visible: Vec<f64> = (0..n)
        .map(|i| rating_effect[i] + config.model_b_house_visibility * house_log_effect[address_of_policy[i]])
        .collect();
    let (vm, vsd) = mean_sd(&visible);
    let q = config.model_b_quality;
    let raw_b: Vec<f64> = visible
        .iter()
        .map(|&v| {
            let noise = if vsd > 0.0 {
                Normal::new(vm, vsd).unwrap().sample(&mut rng_b)
            } else {
                vm
            };
            (q * v + (1.0 - q) * noise).exp()
        })
        .collect();
    let b_scale = config.target_frequency / (raw_b.iter().sum::<f64>() / n as f64);

    let policies: Vec<PolicyRecord> = (0..n)
        .map(|i| PolicyRecord {
            policy_id: format!("POL-{:06}", i + 1),
            address_id: address_ids[address_of_policy[i]].clone(),
            exposure: exposures[i],
            claim_count: claims[i],
            model_b_frequency: raw_b[i] * b_scale,
        })
        .collect();

    // annotation campaign over in-scope addresses
    let included: Vec<String> = (0..n_addresses)
        .filter(|&k| status[k] == AddressStatus::Resolved)
        .map(|k| address_ids[k].clone())
        .collect();
    let all_ids: Vec<String> = config.annotators.iter().map(|a| a.id.clone()).collect();
    let retained: Vec<String> = config
        .annotators
        .iter()
        .filter(|a| a.retained)
        .map(|a| a.id.clone())
        .collect();
    let common_size = config.common_set_size.min(included.len());
    let batches = assign_campaign(
        &included,
        &all_ids,
        &retained,
        common_size,
        rng_annot.random(),
    )?;
    let index_of: BTreeMap<&str, usize> = address_ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect();
    let mut common_set: Vec<String> = Vec::new();
    let mut annotations = Vec::new();
    for who in &config.annotators {
        let mut step = 0u64;
        for batch in batches.iter().filter(|b| b.annotator_id == who.id) {
            if batch.phase == Phase::Common && common_set.is_empty() {
                common_set = batch.addresses.clone();
            }
            for addr in &batch.addresses {
                let values = observe(&houses[index_of[addr.as_str()]].values, who, &schema, &mut rng_annot);
                annotations.push(AnnotationRecord {
                    address_id: addr.clone(),
                    annotator_id: who.id.clone(),
                    timestamp: timestamp(step),
                    values,
                });
                step += 1;
            }
        }
    }

    let truth = SynthTruth {
        seed: config.seed,
        base_frequency: base,
        relative_risks: config
            .features
            .iter()
            .map(|f| (f.variable.clone(), f.relative_risk))
            .collect(),
        addresses: address_ids
            .iter()
            .zip(&houses)
            .map(|(id, h)| AddressTruth {
                address_id: id.clone(),
                indicators: h.indicators.clone(),
                street_view_missing: h.street_view_missing(),
            })
            .collect(),
        policies: (0..n)
            .map(|i| PolicyTruth {
                policy_id: policies[i].policy_id.clone(),
                latent_frequency: latent[i],
                expected_claims: latent[i] * exposures[i],
            })
            .collect(),
    };

    Ok(SyntheticPortfolio {
        config: config.clone(),
        policies,
        addresses,
        annotations,
        common_set,
        truth,
    })
}

pub const POLICIES_FILE: &str = "policies.csv";
pub const ADDRESSES_FILE: &str = "addresses.csv";
pub const ANNOTATIONS_FILE: &str = "annotations.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const COMMON_FILE: &str = "common.txt";
pub const SCHEMA_FILE: &str = "schema.json";
pub const CONFIG_FILE: &str = "synth_config.json";

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the fixture directory: policies, addresses, raw annotations,
/// ground truth, the common-set list, the schema and the generating config.
pub fn export_fixtures(generated: &SyntheticPortfolio, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let schema = AnnotationSchema::standard();

    let mut buf = Vec::new();
    write_policies(&mut buf, &generated.policies)?;
    write_file(dir, POLICIES_FILE, &buf)?;

    buf.clear();
    write_addresses(&mut buf, &generated.addresses)?;
    write_file(dir, ADDRESSES_FILE, &buf)?;

    buf.clear();
    write_annotations(&mut buf, &generated.annotations, &schema)?;
    write_file(dir, ANNOTATIONS_FILE, &buf)?;

    let mut common = generated.common_set.join("\n");
    if !common.is_empty() {
        common.push('\n');
    }
    write_file(dir, COMMON_FILE, common.as_bytes())?;
    write_file(dir, TRUTH_FILE, serde_json::to_string_pretty(&generated.truth)?.as_bytes())?;
    write_file(dir, SCHEMA_FILE, serde_json::to_string_pretty(&schema)?.as_bytes())?;
    write_file(dir, CONFIG_FILE, serde_json::to_string_pretty(&generated.config)?.as_bytes())?;
    Ok(())
}
