//! The seven house and neighbourhood variables annotated from street-level
//! and overhead imagery, with their simplification to binary model features.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationRecord, AnnotationValue};
use crate::error::{Error, Result};

pub const NEIGHBOURHOOD: &str = "neighbourhood";
pub const DENSITY: &str = "density";
pub const SV_QUALITY: &str = "sv_quality";
pub const HOUSE_TYPE: &str = "house_type";
pub const HOUSE_AGE: &str = "house_age";
pub const HOUSE_CONDITION: &str = "house_condition";
pub const WEALTH: &str = "wealth";

/// Variable names in canonical (CSV column) order.
pub const VARIABLE_NAMES: [&str; 7] = [
    NEIGHBOURHOOD,
    DENSITY,
    SV_QUALITY,
    HOUSE_TYPE,
    HOUSE_AGE,
    HOUSE_CONDITION,
    WEALTH,
];

pub const NEIGHBOURHOOD_CODES: [&str; 7] = [
    "detached_houses",
    "terraced_houses",
    "apartment_blocks",
    "commercial",
    "industrial",
    "agricultural",
    "green_space",
];

pub const SV_QUALITY_CODES: [&str; 3] = ["good", "bad", "missing"];

pub const HOUSE_TYPE_CODES: [&str; 5] = [
    "detached_single_family",
    "semi_detached",
    "terraced",
    "multi_family",
    "apartment_block",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableKind {
    SingleChoice { codes: Vec<String> },
    MultiChoice { codes: Vec<String> },
    Ordinal { min: i32, max: i32 },
}

impl VariableKind {
    pub fn is_ordinal(&self) -> bool {
        matches!(self, VariableKind::Ordinal { .. })
    }

    pub fn codes(&self) -> &[String] {
        match self {
            VariableKind::SingleChoice { codes } | VariableKind::MultiChoice { codes } => codes,
            VariableKind::Ordinal { .. } => &[],
        }
    }

    /// Number of distinct raw answers for single-choice and ordinal kinds;
    /// number of selectable codes for multi-choice.
    pub fn granularity(&self) -> usize {
        match self {
            VariableKind::SingleChoice { codes } | VariableKind::MultiChoice { codes } => {
                codes.len()
            }
            VariableKind::Ordinal { min, max } => (max - min + 1) as usize,
        }
    }
}

/// How a variable becomes a single 0/1 model feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Simplification {
    /// Not used as a model feature.
    Excluded,
    /// Explicit code → {0, 1} table. For multi-choice variables the
    /// indicator is 1 only when every selected code maps to 1.
    CodeTable { table: BTreeMap<String, u8> },
    /// Indicator is 1 when the calibrated value is strictly greater than the
    /// threshold. `None` means the pooled median of calibrated values.
    Threshold { threshold: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDef {
    pub name: String,
    pub label: String,
    #[serde(flatten)]
    pub kind: VariableKind,
    pub simplification: Simplification,
}

impl VariableDef {
    pub fn is_retained(&self) -> bool {
        !matches!(self.simplification, Simplification::Excluded)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSchema {
    pub variables: Vec<VariableDef>,
}

fn codes(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn table(list: &[&str], positive: &[&str]) -> Simplification {
    Simplification::CodeTable {
        table: list
            .iter()
            .map(|c| (c.to_string(), u8::from(positive.contains(c))))
            .collect(),
    }
}

impl Default for AnnotationSchema {
    fn default() -> Self {
        Self::standard()
    }
}

impl AnnotationSchema {
    /// The seven-variable schema with default simplifications: five binary
    /// features retained, building density and resident wealth excluded.
    pub fn standard() -> Self {
        let v = |name: &str, label: &str, kind, simplification| VariableDef {
            name: name.into(),
            label: label.into(),
            kind,
            simplification,
        };
        Self {
            variables: vec![
                v(
                    NEIGHBOURHOOD,
                    "Neighbourhood type",
                    VariableKind::MultiChoice {
                        codes: codes(&NEIGHBOURHOOD_CODES),
                    },
                    table(
                        &NEIGHBOURHOOD_CODES,
                        &["detached_houses", "terraced_houses", "apartment_blocks"],
                    ),
                ),
                v(
                    DENSITY,
                    "Building density",
                    VariableKind::Ordinal { min: 1, max: 5 },
                    Simplification::Excluded,
                ),
                v(
                    SV_QUALITY,
                    "Street View quality",
                    VariableKind::SingleChoice {
                        codes: codes(&SV_QUALITY_CODES),
                    },
                    table(&SV_QUALITY_CODES, &["good"]),
                ),
                v(
                    HOUSE_TYPE,
                    "House type",
                    VariableKind::SingleChoice {
                        codes: codes(&HOUSE_TYPE_CODES),
                    },
                    table(&HOUSE_TYPE_CODES, &["detached_single_family"]),
                ),
                v(
                    HOUSE_AGE,
                    "House age",
                    VariableKind::Ordinal { min: 1, max: 3 },
                    Simplification::Threshold { threshold: None },
                ),
                v(
                    HOUSE_CONDITION,
                    "House condition",
                    VariableKind::Ordinal { min: 1, max: 3 },
                    Simplification::Threshold { threshold: None },
                ),
                v(
                    WEALTH,
                    "Wealth of residents",
                    VariableKind::Ordinal { min: 1, max: 10 },
                    Simplification::Excluded,
                ),
            ],
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn variable(&self, name: &str) -> Option<&VariableDef> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn retained_names(&self) -> Vec<String> {
        self.variables
            .iter()
            .filter(|v| v.is_retained())
            .map(|v| v.name.clone())
            .collect()
    }

    /// Structural checks: the seven variables in canonical order with their
    /// fixed granularities, unique codes, and simplification rules that fit
    /// each variable's kind. Mappings and thresholds are free to vary.
    pub fn validate(&self) -> Result<()> {
        let reference = Self::standard();
        if self.variables.len() != reference.variables.len() {
            return Err(Error::Schema(format!(
                "expected {} variables, found {}",
                reference.variables.len(),
                self.variables.len()
            )));
        }
        for (var, expected) in self.variables.iter().zip(&reference.variables) {
            if var.name != expected.name {
                return Err(Error::Schema(format!(
                    "expected variable `{}`, found `{}`",
                    expected.name, var.name
                )));
            }
            let same_shape = match (&var.kind, &expected.kind) {
                (VariableKind::SingleChoice { codes: a }, VariableKind::SingleChoice { codes: b })
                | (VariableKind::MultiChoice { codes: a }, VariableKind::MultiChoice { codes: b }) => {
                    a.len() == b.len()
                }
                (VariableKind::Ordinal { min: a0, max: a1 }, VariableKind::Ordinal { min: b0, max: b1 }) => {
                    a0 == b0 && a1 == b1
                }
                _ => false,
            };
            if !same_shape {
                return Err(Error::Schema(format!(
                    "variable `{}` must keep its original granularity",
                    var.name
                )));
            }
            let unique: BTreeSet<_> = var.kind.codes().iter().collect();
            if unique.len() != var.kind.codes().len() {
                return Err(Error::Schema(format!("duplicate codes in `{}`", var.name)));
            }
            match (&var.simplification, &var.kind) {
                (Simplification::Excluded, _) => {}
                (Simplification::CodeTable { table }, VariableKind::SingleChoice { codes })
                | (Simplification::CodeTable { table }, VariableKind::MultiChoice { codes }) => {
                    if let Some((code, _)) = table.iter().find(|(c, _)| !codes.contains(c)) {
                        return Err(Error::Schema(format!(
                            "mapping for `{}` names unknown code `{code}`",
                            var.name
                        )));
                    }
                    if let Some((_, bit)) = table.iter().find(|(_, b)| **b > 1) {
                        return Err(Error::Schema(format!(
                            "mapping for `{}` has non-binary value {bit}",
                            var.name
                        )));
                    }
                }
                (Simplification::Threshold { threshold }, VariableKind::Ordinal { .. }) => {
                    if threshold.is_some_and(|t| !t.is_finite()) {
                        return Err(Error::Schema(format!(
                            "threshold for `{}` must be finite",
                            var.name
                        )));
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "simplification rule does not fit the kind of `{}`",
                        var.name
                    )))
                }
            }
        }
        Ok(())
    }

    /// Checks that a record carries exactly the schema's variables with values
    /// inside each domain. `raw` additionally requires integral ordinals.
    pub fn validate_record(&self, record: &AnnotationRecord, raw: bool) -> Result<()> {
        match self.field_errors(record, raw).into_iter().next() {
            Some((field, message)) => Err(Error::Field { field, message }),
            None => Ok(()),
        }
    }

    /// Every `(field, message)` problem with `record`, in schema order after
    /// the identifying fields and any unknown variables.
    pub fn field_errors(&self, record: &AnnotationRecord, raw: bool) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if record.address_id.trim().is_empty() {
            out.push(("address_id".to_string(), "must not be empty".to_string()));
        }
        if record.annotator_id.trim().is_empty() {
            out.push(("annotator_id".to_string(), "must not be empty".to_string()));
        }
        for extra in record.values.keys().filter(|k| self.variable(k).is_none()) {
            out.push((extra.clone(), "not a schema variable".to_string()));
        }
        for var in &self.variables {
            let checked = match record.values.get(&var.name) {
                None => Err(Error::field(var.name.clone(), "missing value")),
                Some(value) => validate_value(var, value, raw),
            };
            if let Err(Error::Field { field, message }) = checked {
                out.push((field, message));
            }
        }
        out
    }
}

fn validate_value(var: &VariableDef, value: &AnnotationValue, raw: bool) -> Result<()> {
    let name = var.name.as_str();
    match (&var.kind, value) {
        (VariableKind::SingleChoice { codes }, AnnotationValue::Choice(code)) => {
            if !codes.contains(code) {
                return Err(Error::field(name, format!("unknown code `{code}`")));
            }
        }
        (VariableKind::MultiChoice { codes }, AnnotationValue::Multi(set)) => {
            if set.is_empty() {
                return Err(Error::field(name, "at least one code must be selected"));
            }
            if let Some(code) = set.iter().find(|c| !codes.contains(c)) {
                return Err(Error::field(name, format!("unknown code `{code}`")));
            }
        }
        (VariableKind::Ordinal { min, max }, AnnotationValue::Ordinal(x)) => {
            if !x.is_finite() || *x < f64::from(*min) || *x > f64::from(*max) {
                return Err(Error::field(
                    name,
                    format!("value {x} outside {min}..={max}"),
                ));
            }
            if raw && x.fract() != 0.0 {
                return Err(Error::field(name, format!("value {x} is not an integer")));
            }
        }
        _ => {
            return Err(Error::field(
                name,
                "value kind does not match the variable kind",
            ))
        }
    }
    Ok(())
}
