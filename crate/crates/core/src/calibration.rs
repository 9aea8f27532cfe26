//! Per-annotator moment matching of ordinal ratings.
//!
//! Each annotator's ratings on an ordinal variable are mapped affinely so
//! that their mean and (population) standard deviation equal the pooled
//! moments across all annotators. Choice variables pass through unchanged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationRecord, AnnotationValue};
use crate::error::Result;
use crate::schema::{AnnotationSchema, VariableKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        // A constant sample must have sd exactly 0; its float mean need not
        // equal the value, which would leave a spurious tiny spread.
        if values.iter().all(|&x| x == values[0]) {
            return Some(Self {
                count: values.len(),
                mean: values[0],
                sd: 0.0,
            });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            count: values.len(),
            mean,
            sd: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableCalibration {
    pub variable: String,
    pub min: f64,
    pub max: f64,
    pub pooled: Moments,
    pub annotators: BTreeMap<String, Moments>,
}

impl VariableCalibration {
    /// Maps one rating of `annotator`. Unknown annotators and annotators
    /// with a single rating pass through.
    pub fn transform(&self, annotator: &str, x: f64) -> f64 {
        let Some(own) = self.annotators.get(annotator) else {
            return x;
        };
        if own.count < 2 {
            return x;
        }
        let y = if own.sd > 0.0 {
            (x - own.mean) / own.sd * self.pooled.sd + self.pooled.mean
        } else {
            x - own.mean + self.pooled.mean
        };
        y.clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CalibrationMap {
    pub variables: Vec<VariableCalibration>,
}

impl CalibrationMap {
    /// Estimates per-annotator and pooled moments from `records`.
    pub fn fit(records: &[AnnotationRecord], schema: &AnnotationSchema) -> (Self, Vec<String>) {
        let mut warnings = Vec::new();
        let mut variables = Vec::new();
        for var in &schema.variables {
            let VariableKind::Ordinal { min, max } = var.kind else {
                continue;
            };
            let mut pooled = Vec::new();
            let mut by_annotator: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for rec in records {
                if let Some(x) = rec.value(&var.name).and_then(AnnotationValue::as_ordinal) {
                    pooled.push(x);
                    by_annotator.entry(rec.annotator_id.as_str()).or_default().push(x);
                }
            }
            let Some(pooled) = Moments::of(&pooled) else {
                continue;
            };
            let annotators = by_annotator
                .into_iter()
                .filter_map(|(a, xs)| {
                    let m = Moments::of(&xs)?;
                    if m.count < 2 {
                        warnings.push(format!(
                            "annotator `{a}` has a single `{}` rating; passed through uncalibrated",
                            var.name
                        ));
                    }
                    Some((a.to_string(), m))
                })
                .collect();
            variables.push(VariableCalibration {
                variable: var.name.clone(),
                min: f64::from(min),
                max: f64::from(max),
                pooled,
                annotators,
            });
        }
        (Self { variables }, warnings)
    }

    pub fn variable(&self, name: &str) -> Option<&VariableCalibration> {
        self.variables.iter().find(|v| v.variable == name)
    }

    /// Applies the fitted maps. Calibrated ordinals are real-valued.
    pub fn apply(&self, records: &[AnnotationRecord]) -> Vec<AnnotationRecord> {
        records
            .iter()
            .map(|rec| {
                let mut out = rec.clone();
                for cal in &self.variables {
                    if let Some(AnnotationValue::Ordinal(x)) = out.values.get_mut(&cal.variable) {
                        *x = cal.transform(&rec.annotator_id, *x);
                    }
                }
                out
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibrated {
    pub records: Vec<AnnotationRecord>,
    pub map: CalibrationMap,
    pub warnings: Vec<String>,
}

/// Fits moment-matching maps on `records` and applies them to the same records.
pub fn calibrate_annotators(
    records: &[AnnotationRecord],
    schema: &AnnotationSchema,
) -> Result<Calibrated> {
    let (map, warnings) = CalibrationMap::fit(records, schema);
    Ok(Calibrated {
        records: map.apply(records),
        map,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::fixtures::record;

    #[test]
    fn constant_sample_has_zero_spread() {
        let x = 1.7698307337630612;
        let m = Moments::of(&[x; 6]).unwrap();
        assert_eq!((m.mean, m.sd), (x, 0.0));
    }
    use crate::schema::{HOUSE_AGE, HOUSE_CONDITION, WEALTH};

    fn age_of(r: &AnnotationRecord) -> f64 {
        r.value(HOUSE_AGE).unwrap().as_ordinal().unwrap()
    }

    #[test]
    fn affine_map_hand_example() {
        let cal = VariableCalibration {
            variable: HOUSE_AGE.into(),
            min: 1.0,
            max: 10.0,
            pooled: Moments { count: 10, mean: 2.5, sd: 0.5 },
            annotators: [("a".to_string(), Moments { count: 5, mean: 2.0, sd: 1.0 })]
                .into_iter()
                .collect(),
        };
        assert_eq!(cal.transform("a", 4.0), 3.5);
        assert_eq!(cal.transform("unknown", 4.0), 4.0);
    }

    #[test]
    fn single_annotator_is_identity() {
        let schema = AnnotationSchema::standard();
        let recs: Vec<_> = (0..6)
            .map(|i| record(&format!("x{i}"), "solo", 1.0 + (i % 3) as f64, 1.0 + (i % 2) as f64))
            .collect();
        let out = calibrate_annotators(&recs, &schema).unwrap();
        for (a, b) in recs.iter().zip(&out.records) {
            assert!((age_of(a) - age_of(b)).abs() < 1e-12);
        }
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn identical_moments_unchanged() {
        let schema = AnnotationSchema::standard();
        let mut recs = Vec::new();
        for (i, age) in [1.0, 2.0, 3.0, 2.0].iter().enumerate() {
            recs.push(record(&format!("p{i}"), "a", *age, 1.0));
            recs.push(record(&format!("q{i}"), "b", 4.0 - age, 1.0));
        }
        let out = calibrate_annotators(&recs, &schema).unwrap();
        for (a, b) in recs.iter().zip(&out.records) {
            assert!((age_of(a) - age_of(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_matched_after_calibration() {
        let schema = AnnotationSchema::standard();
        let mut recs = Vec::new();
        let a_vals = [2.0, 2.0, 3.0, 2.0, 3.0];
        let b_vals = [1.0, 2.0, 1.0, 1.0, 2.0, 1.0];
        for (i, v) in a_vals.iter().enumerate() {
            recs.push(record(&format!("a{i}"), "a", *v, 2.0));
        }
        for (i, v) in b_vals.iter().enumerate() {
            recs.push(record(&format!("b{i}"), "b", *v, 2.0));
        }
        let out = calibrate_annotators(&recs, &schema).unwrap();
        let pooled = out.map.variable(HOUSE_AGE).unwrap().pooled;
        for who in ["a", "b"] {
            let xs: Vec<f64> = out
                .records
                .iter()
                .filter(|r| r.annotator_id == who)
                .map(age_of)
                .collect();
            let m = Moments::of(&xs).unwrap();
            assert!((m.mean - pooled.mean).abs() < 1e-9);
            assert!((m.sd - pooled.sd).abs() < 1e-9);
        }
        // constant ratings shift to the pooled mean
        let cond = out.map.variable(HOUSE_CONDITION).unwrap();
        assert_eq!(cond.transform("a", 2.0), 2.0);
    }

    #[test]
    fn single_rating_passes_through_with_warning() {
        let schema = AnnotationSchema::standard();
        let recs = vec![
            record("x", "lonely", 3.0, 1.0),
            record("y", "busy", 1.0, 1.0),
            record("z", "busy", 2.0, 1.0),
        ];
        let out = calibrate_annotators(&recs, &schema).unwrap();
        assert_eq!(age_of(&out.records[0]), 3.0);
        assert!(out.warnings.iter().any(|w| w.contains("lonely") && w.contains(HOUSE_AGE)));
        assert!(out.warnings.iter().any(|w| w.contains(WEALTH)));
    }

    #[test]
    fn clamped_to_range() {
        let schema = AnnotationSchema::standard();
        let mut recs = Vec::new();
        for i in 0..10 {
            recs.push(record(&format!("a{i}"), "a", 1.0 + (i % 2) as f64, 1.0));
            recs.push(record(&format!("b{i}"), "b", if i == 0 { 3.0 } else { 1.0 }, 1.0));
        }
        let out = calibrate_annotators(&recs, &schema).unwrap();
        for r in &out.records {
            let x = age_of(r);
            assert!((1.0..=3.0).contains(&x));
        }
    }
}
