//! Turning (calibrated) annotations into binary model features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationRecord, AnnotationValue};
use crate::error::{Error, Result};
use crate::schema::{AnnotationSchema, Simplification, VariableKind};

pub const CONSENSUS_ANNOTATOR: &str = "consensus";

/// Model covariates for one address.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub address_id: String,
    /// One 0/1 indicator per retained variable.
    pub indicators: BTreeMap<String, u8>,
    /// Calibrated values of ordinal variables excluded from simplification,
    /// kept for exploratory fits.
    pub ordinals: BTreeMap<String, f64>,
}

impl FeatureVector {
    /// Indicator value, falling back to excluded ordinals.
    pub fn get(&self, name: &str) -> Option<f64> {
        self.indicators
            .get(name)
            .map(|&b| f64::from(b))
            .or_else(|| self.ordinals.get(name).copied())
    }
}

/// Collapses multiple annotations of one address into a single record:
/// ordinal mean, single-choice majority (ties go to the earlier schema code),
/// and multi-choice codes chosen by more than half of the annotators (or the
/// most-voted codes when none reaches a majority). Addresses keep their order
/// of first appearance; singly-annotated addresses are returned unchanged.
pub fn consolidate(
    records: &[AnnotationRecord],
    schema: &AnnotationSchema,
) -> Result<Vec<AnnotationRecord>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for rec in records {
        let g = groups.entry(rec.address_id.as_str()).or_default();
        if g.is_empty() {
            order.push(rec.address_id.as_str());
        }
        g.push(rec);
    }
    order
        .into_iter()
        .map(|addr| {
            let group = &groups[addr];
            if let [single] = group.as_slice() {
                return Ok((*single).clone());
            }
            let mut values = BTreeMap::new();
            for var in &schema.variables {
                let vals: Vec<&AnnotationValue> =
                    group.iter().filter_map(|r| r.value(&var.name)).collect();
                if vals.len() != group.len() {
                    return Err(Error::field(
                        var.name.clone(),
                        format!("missing value for address `{addr}`"),
                    ));
                }
                let merged = match &var.kind {
                    VariableKind::Ordinal { .. } => {
                        let xs: Option<Vec<f64>> = vals.iter().map(|v| v.as_ordinal()).collect();
                        let xs = xs.ok_or_else(|| Error::field(var.name.clone(), "expected ordinal"))?;
                        AnnotationValue::Ordinal(xs.iter().sum::<f64>() / xs.len() as f64)
                    }
                    VariableKind::SingleChoice { codes } => {
                        let mut best: Option<(&String, usize)> = None;
                        for code in codes {
                            let votes = vals.iter().filter(|v| v.as_choice() == Some(code)).count();
                            if votes > best.map_or(0, |b| b.1) {
                                best = Some((code, votes));
                            }
                        }
                        let (code, _) = best.ok_or_else(|| {
                            Error::field(var.name.clone(), "no recognised code among annotations")
                        })?;
                        AnnotationValue::Choice(code.clone())
                    }
                    VariableKind::MultiChoice { codes } => {
                        let votes: Vec<(&String, usize)> = codes
                            .iter()
                            .map(|c| {
                                let n = vals
                                    .iter()
                                    .filter(|v| v.as_multi().is_some_and(|s| s.contains(c)))
                                    .count();
                                (c, n)
                            })
                            .collect();
                        let mut chosen: Vec<&String> = votes
                            .iter()
                            .filter(|(_, n)| 2 * n > group.len())
                            .map(|(c, _)| *c)
                            .collect();
                        if chosen.is_empty() {
                            let top = votes.iter().map(|v| v.1).max().unwrap_or(0);
                            chosen = votes.iter().filter(|v| v.1 == top && top > 0).map(|v| v.0).collect();
                        }
                        AnnotationValue::Multi(chosen.into_iter().cloned().collect())
                    }
                };
                values.insert(var.name.clone(), merged);
            }
            Ok(AnnotationRecord {
                address_id: addr.to_string(),
                annotator_id: CONSENSUS_ANNOTATOR.to_string(),
                timestamp: group.iter().map(|r| r.timestamp.as_str()).max().unwrap_or("").to_string(),
                values,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simplified {
    pub features: Vec<FeatureVector>,
    /// Thresholds actually applied to ordinal variables.
    pub thresholds: BTreeMap<String, f64>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) {
        0.5 * (values[mid - 1] + values[mid])
    } else {
        values[mid]
    })
}

/// Binary features per address. Records are consolidated per address first.
pub fn simplify_features(
    records: &[AnnotationRecord],
    schema: &AnnotationSchema,
) -> Result<Simplified> {
    let merged = consolidate(records, schema)?;
    let mut thresholds = BTreeMap::new();
    for var in &schema.variables {
        if let Simplification::Threshold { threshold } = &var.simplification {
            let t = match threshold {
                Some(t) => Some(*t),
                None => {
                    let xs: Vec<f64> = merged
                        .iter()
                        .filter_map(|r| r.value(&var.name).and_then(AnnotationValue::as_ordinal))
                        .collect();
                    // Median of the values rounded to categories, then cut at
                    // the category boundary above it. On integer ratings this
                    // is the same as `x > median`; on calibrated values it
                    // keeps an annotator's middle category from straddling
                    // the cut.
                    let mut rounded: Vec<f64> = xs.iter().map(|x| x.round()).collect();
                    median(&mut rounded).map(|m| m.floor() + 0.5)
                }
            };
            if let Some(t) = t {
                thresholds.insert(var.name.clone(), t);
            }
        }
    }

    let mut features = Vec::with_capacity(merged.len());
    for rec in &merged {
        let mut indicators = BTreeMap::new();
        let mut ordinals = BTreeMap::new();
        for var in &schema.variables {
            let value = rec
                .value(&var.name)
                .ok_or_else(|| Error::field(var.name.clone(), "missing value"))?;
            let bit = match (&var.simplification, value) {
                (Simplification::Excluded, AnnotationValue::Ordinal(x)) => {
                    ordinals.insert(var.name.clone(), *x);
                    continue;
                }
                (Simplification::Excluded, _) => continue,
                (Simplification::Threshold { .. }, AnnotationValue::Ordinal(x)) => {
                    if let VariableKind::Ordinal { min, max } = var.kind {
                        debug_assert!(
                            (f64::from(min)..=f64::from(max)).contains(x),
                            "calibrated value {x} escaped its range"
                        );
                    }
                    u8::from(*x > thresholds[&var.name])
                }
                (Simplification::CodeTable { table }, AnnotationValue::Choice(code)) => {
                    *table.get(code).ok_or_else(|| Error::UnmappedCode {
                        variable: var.name.clone(),
                        code: code.clone(),
                    })?
                }
                (Simplification::CodeTable { table }, AnnotationValue::Multi(set)) => {
                    let mut all = 1u8;
                    for code in set {
                        let b = table.get(code).ok_or_else(|| Error::UnmappedCode {
                            variable: var.name.clone(),
                            code: code.clone(),
                        })?;
                        all &= b;
                    }
                    all
                }
                _ => {
                    return Err(Error::field(
                        var.name.clone(),
                        "value kind does not match the simplification rule",
                    ))
                }
            };
            indicators.insert(var.name.clone(), bit);
        }
        features.push(FeatureVector {
            address_id: rec.address_id.clone(),
            indicators,
            ordinals,
        });
    }
    Ok(Simplified {
        features,
        thresholds,
    })
}
