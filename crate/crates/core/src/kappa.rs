//! Fleiss' kappa and per-variable agreement reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationRecord, AnnotationValue};
use crate::error::{Error, Result};
use crate::schema::{AnnotationSchema, VariableDef, VariableKind};

/// Fleiss' kappa for an items × categories table of rating counts where every
/// item received exactly `raters_per_item` ratings.
///
/// The statistic is assembled from integer sums and divided once, so equal
/// count tables give bit-identical results on every platform.
pub fn fleiss_kappa(counts: &[Vec<u64>], raters_per_item: u64) -> Result<f64> {
    let n = raters_per_item;
    if n < 2 {
        return Err(Error::TooFewRaters);
    }
    let Some(first) = counts.first() else {
        return Err(Error::RatingTable("no items".into()));
    };
    let k = first.len();
    if k < 2 {
        return Err(Error::RatingTable("at least 2 categories required".into()));
    }
    let mut column_totals = vec![0u128; k];
    let mut agreeing_pairs: u128 = 0;
    for (i, row) in counts.iter().enumerate() {
        if row.len() != k {
            return Err(Error::RatingTable(format!(
                "item {i} has {} categories, expected {k}",
                row.len()
            )));
        }
        let total: u64 = row.iter().sum();
        if total != n {
            return Err(Error::RatingTable(format!(
                "item {i} has {total} ratings, expected {n}"
            )));
        }
        for (j, &c) in row.iter().enumerate() {
            let c = u128::from(c);
            column_totals[j] += c;
            agreeing_pairs += c * c.saturating_sub(1);
        }
    }
    let items = counts.len() as u128;
    let n = u128::from(n);
    // P̄  = A / D1 with A = Σ n_ij (n_ij - 1), D1 = N n (n - 1)
    // P̄e = B / D2 with B = Σ_j c_j²,         D2 = (N n)²
    // κ  = (A·D2 − B·D1) / (D1·(D2 − B))
    let d1 = items * n * (n - 1);
    let d2 = (items * n) * (items * n);
    let b: u128 = column_totals.iter().map(|c| c * c).sum();
    if b == d2 {
        return Err(Error::DegenerateAgreement);
    }
    let exact = (|| {
        let a = i128::try_from(agreeing_pairs).ok()?;
        let b = i128::try_from(b).ok()?;
        let d1 = i128::try_from(d1).ok()?;
        let d2 = i128::try_from(d2).ok()?;
        let num = a.checked_mul(d2)?.checked_sub(b.checked_mul(d1)?)?;
        let den = d1.checked_mul(d2 - b)?;
        Some(num as f64 / den as f64)
    })();
    Ok(exact.unwrap_or_else(|| {
        let p_bar = agreeing_pairs as f64 / d1 as f64;
        let p_e = b as f64 / d2 as f64;
        (p_bar - p_e) / (1.0 - p_e)
    }))
}

/// Conventional verbal bands for kappa values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgreementBand {
    Poor,
    Slight,
    Fair,
    Moderate,
    Substantial,
    AlmostPerfect,
}

impl AgreementBand {
    pub fn label(self) -> &'static str {
        match self {
            AgreementBand::Poor => "poor agreement",
            AgreementBand::Slight => "slight agreement",
            AgreementBand::Fair => "fair agreement",
            AgreementBand::Moderate => "moderate agreement",
            AgreementBand::Substantial => "substantial agreement",
            AgreementBand::AlmostPerfect => "almost perfect agreement",
        }
    }
}

impl fmt::Display for AgreementBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Bands are closed on the right: 0.40 is fair, 0.41 moderate.
pub fn interpret_kappa(kappa: f64) -> Result<AgreementBand> {
    if !(-1.0..=1.0).contains(&kappa) {
        return Err(Error::KappaOutOfRange(kappa));
    }
    Ok(if kappa <= 0.0 {
        AgreementBand::Poor
    } else if kappa <= 0.20 {
        AgreementBand::Slight
    } else if kappa <= 0.40 {
        AgreementBand::Fair
    } else if kappa <= 0.60 {
        AgreementBand::Moderate
    } else if kappa <= 0.80 {
        AgreementBand::Substantial
    } else {
        AgreementBand::AlmostPerfect
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceKappa {
    pub code: String,
    /// `None` when nobody (or everybody) selected the code.
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub variable: String,
    pub label: String,
    pub kappa: Option<f64>,
    pub band: Option<AgreementBand>,
    pub degenerate: bool,
    /// Per-code binary kappas for multi-choice variables; empty otherwise.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_choice: Vec<ChoiceKappa>,
    pub item_count: usize,
    pub rater_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub raters: Vec<String>,
    pub item_count: usize,
    pub rows: Vec<KappaRow>,
}

impl KappaReport {
    pub fn row(&self, variable: &str) -> Option<&KappaRow> {
        self.rows.iter().find(|r| r.variable == variable)
    }

    /// `variable,kappa,band` CSV, one line per schema variable.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variable,kappa,band\n");
        for r in &self.rows {
            let (k, band) = match (r.kappa, r.band) {
                (Some(k), Some(b)) => (k.to_string(), b.label().to_string()),
                _ => (String::new(), "degenerate".to_string()),
            };
            out.push_str(&format!("{},{},{}\n", r.variable, k, band));
        }
        out
    }
}

type RatingsByItem<'a> = BTreeMap<&'a str, BTreeMap<&'a str, &'a AnnotationRecord>>;

fn index_ratings<'a>(
    annotations: &'a [AnnotationRecord],
    items: &BTreeSet<&str>,
) -> Result<RatingsByItem<'a>> {
    let mut map: RatingsByItem<'a> = BTreeMap::new();
    for rec in annotations {
        if !items.contains(rec.address_id.as_str()) {
            continue;
        }
        let slot = map.entry(rec.address_id.as_str()).or_default();
        if slot.insert(rec.annotator_id.as_str(), rec).is_some() {
            return Err(Error::field(
                "annotator_id",
                format!(
                    "duplicate annotation of `{}` by `{}`",
                    rec.address_id, rec.annotator_id
                ),
            ));
        }
    }
    Ok(map)
}

/// Addresses from `common_set` annotated by every one of `raters`, in
/// `common_set` order.
pub fn fully_rated_items(
    annotations: &[AnnotationRecord],
    common_set: &[String],
    raters: &[String],
) -> Vec<String> {
    let mut seen: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for rec in annotations {
        seen.entry(rec.address_id.as_str())
            .or_default()
            .insert(rec.annotator_id.as_str());
    }
    common_set
        .iter()
        .filter(|a| {
            seen.get(a.as_str())
                .is_some_and(|s| raters.iter().all(|r| s.contains(r.as_str())))
        })
        .cloned()
        .collect()
}

fn category_of(var: &VariableDef, value: &AnnotationValue) -> Result<usize> {
    match (&var.kind, value) {
        (VariableKind::SingleChoice { codes }, AnnotationValue::Choice(c)) => codes
            .iter()
            .position(|x| x == c)
            .ok_or_else(|| Error::field(var.name.clone(), format!("unknown code `{c}`"))),
        (VariableKind::Ordinal { min, max }, AnnotationValue::Ordinal(x)) => {
            let r = x.round();
            if r < f64::from(*min) || r > f64::from(*max) {
                return Err(Error::field(var.name.clone(), format!("value {x} out of range")));
            }
            Ok((r as i64 - i64::from(*min)) as usize)
        }
        _ => Err(Error::field(var.name.clone(), "value kind does not match schema")),
    }
}

/// Kappa for every schema variable over `common_set`, which every rater
/// must have annotated. Ordinal scales are treated as nominal categories.
/// Multi-choice variables get one binary kappa per code; the variable's kappa
/// is the unweighted mean of the defined per-code values.
pub fn agreement_report(
    annotations: &[AnnotationRecord],
    schema: &AnnotationSchema,
    common_set: &[String],
    raters: Option<&[String]>,
) -> Result<KappaReport> {
    let items: BTreeSet<&str> = common_set.iter().map(String::as_str).collect();
    let by_item = index_ratings(annotations, &items)?;
    let raters: Vec<String> = match raters {
        Some(r) => r.to_vec(),
        None => by_item
            .values()
            .flat_map(|m| m.keys().map(|s| s.to_string()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    };
    if raters.len() < 2 {
        return Err(Error::TooFewRaters);
    }
    if common_set.is_empty() {
        return Err(Error::Empty("common set".into()));
    }
    // item → ratings in rater order
    let mut table: Vec<Vec<&AnnotationRecord>> = Vec::with_capacity(common_set.len());
    for item in common_set {
        let per_rater = by_item.get(item.as_str());
        let mut row = Vec::with_capacity(raters.len());
        for r in &raters {
            let rec = per_rater.and_then(|m| m.get(r.as_str())).ok_or_else(|| {
                Error::field("common_set", format!("`{item}` not annotated by `{r}`"))
            })?;
            row.push(*rec);
        }
        table.push(row);
    }
    let n = raters.len() as u64;
    let mut rows = Vec::with_capacity(schema.variables.len());
    for var in &schema.variables {
        fn value<'a>(rec: &'a AnnotationRecord, name: &str) -> Result<&'a AnnotationValue> {
            rec.value(name)
                .ok_or_else(|| Error::field(name.to_string(), "missing value"))
        }
        let (kappa, per_choice) = match &var.kind {
            VariableKind::MultiChoice { codes } => {
                let mut per_choice = Vec::with_capacity(codes.len());
                for code in codes {
                    let mut counts = Vec::with_capacity(table.len());
                    for row in &table {
                        let mut c = vec![0u64; 2];
                        for rec in row {
                            let set = value(rec, &var.name)?.as_multi().ok_or_else(|| {
                                Error::field(var.name.clone(), "expected a set of codes")
                            })?;
                            c[usize::from(set.contains(code))] += 1;
                        }
                        counts.push(c);
                    }
                    let kappa = match fleiss_kappa(&counts, n) {
                        Ok(k) => Some(k),
                        Err(Error::DegenerateAgreement) => None,
                        Err(e) => return Err(e),
                    };
                    per_choice.push(ChoiceKappa {
                        code: code.clone(),
                        kappa,
                    });
                }
                let defined: Vec<f64> = per_choice.iter().filter_map(|c| c.kappa).collect();
                let mean = (!defined.is_empty())
                    .then(|| defined.iter().sum::<f64>() / defined.len() as f64);
                (mean, per_choice)
            }
            kind => {
                let k = kind.granularity();
                let mut counts = Vec::with_capacity(table.len());
                for row in &table {
                    let mut c = vec![0u64; k];
                    for rec in row {
                        c[category_of(var, value(rec, &var.name)?)?] += 1;
                    }
                    counts.push(c);
                }
                let kappa = match fleiss_kappa(&counts, n) {
                    Ok(k) => Some(k),
                    Err(Error::DegenerateAgreement) => None,
                    Err(e) => return Err(e),
                };
                (kappa, Vec::new())
            }
        };
        rows.push(KappaRow {
            variable: var.name.clone(),
            label: var.label.clone(),
            band: kappa.map(interpret_kappa).transpose()?,
            degenerate: kappa.is_none(),
            kappa,
            per_choice,
            item_count: table.len(),
            rater_count: raters.len(),
        });
    }
    Ok(KappaReport {
        raters,
        item_count: table.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::fixtures::record;
    use crate::schema::{HOUSE_AGE, HOUSE_CONDITION, NEIGHBOURHOOD};

    #[test]
    fn hand_example_is_exactly_minus_one_third() {
        let counts = vec![vec![2, 0], vec![1, 1]];
        assert_eq!(fleiss_kappa(&counts, 2).unwrap(), -1.0 / 3.0);
    }

    #[test]
    fn perfect_agreement_two_categories() {
        let counts = vec![vec![3, 0], vec![0, 3]];
        assert_eq!(fleiss_kappa(&counts, 3).unwrap(), 1.0);
    }

    #[test]
    fn single_category_is_degenerate() {
        let counts = vec![vec![4, 0, 0], vec![4, 0, 0]];
        assert!(matches!(
            fleiss_kappa(&counts, 4),
            Err(Error::DegenerateAgreement)
        ));
    }

    #[test]
    fn malformed_tables() {
        assert!(matches!(fleiss_kappa(&[vec![2, 0], vec![1, 0]], 2), Err(Error::RatingTable(_))));
        assert!(matches!(fleiss_kappa(&[vec![1, 0]], 1), Err(Error::TooFewRaters)));
        assert!(matches!(fleiss_kappa(&[vec![2]], 2), Err(Error::RatingTable(_))));
        assert!(matches!(fleiss_kappa(&[], 2), Err(Error::RatingTable(_))));
    }

    #[test]
    fn table_bands() {
        let cases = [
            (0.52, AgreementBand::Moderate),
            (0.50, AgreementBand::Moderate),
            (0.79, AgreementBand::Substantial),
            (0.69, AgreementBand::Substantial),
            (0.51, AgreementBand::Moderate),
            (0.54, AgreementBand::Moderate),
            (0.32, AgreementBand::Fair),
        ];
        for (k, band) in cases {
            assert_eq!(interpret_kappa(k).unwrap(), band, "{k}");
        }
        assert_eq!(interpret_kappa(0.52).unwrap().label(), "moderate agreement");
    }

    #[test]
    fn band_edges() {
        assert_eq!(interpret_kappa(0.0).unwrap(), AgreementBand::Poor);
        assert_eq!(interpret_kappa(-1.0).unwrap(), AgreementBand::Poor);
        assert_eq!(interpret_kappa(0.2).unwrap(), AgreementBand::Slight);
        assert_eq!(interpret_kappa(0.6).unwrap(), AgreementBand::Moderate);
        assert_eq!(interpret_kappa(0.8).unwrap(), AgreementBand::Substantial);
        assert_eq!(interpret_kappa(1.0).unwrap(), AgreementBand::AlmostPerfect);
        assert!(interpret_kappa(1.01).is_err());
        assert!(interpret_kappa(f64::NAN).is_err());
    }

    #[test]
    fn report_has_seven_rows_and_needs_two_raters() {
        let schema = AnnotationSchema::standard();
        let common: Vec<String> = (0..4).map(|i| format!("a{i}")).collect();
        let mut anns = Vec::new();
        for (i, a) in common.iter().enumerate() {
            for r in ["r1", "r2", "r3"] {
                let age = 1.0 + (i % 3) as f64;
                let cond = if r == "r3" { 1.0 } else { 1.0 + (i % 2) as f64 };
                anns.push(record(a, r, age, cond));
            }
        }
        let report = agreement_report(&anns, &schema, &common, None).unwrap();
        assert_eq!(report.rows.len(), 7);
        assert_eq!(report.row(HOUSE_AGE).unwrap().kappa, Some(1.0));
        assert!(report.row(HOUSE_CONDITION).unwrap().kappa.unwrap() < 1.0);
        // every rater picked only "detached_houses": all per-code tables degenerate
        let nb = report.row(NEIGHBOURHOOD).unwrap();
        assert!(nb.degenerate);
        assert_eq!(nb.per_choice.len(), 7);

        let one: Vec<_> = anns.iter().filter(|r| r.annotator_id == "r1").cloned().collect();
        let err = agreement_report(&one, &schema, &common, None).unwrap_err();
        assert_eq!(err.to_string(), "at least 2 raters required");
    }

    #[test]
    fn report_requires_complete_coverage() {
        let schema = AnnotationSchema::standard();
        let common = vec!["a".to_string(), "b".to_string()];
        let anns = vec![record("a", "r1", 1.0, 1.0), record("a", "r2", 1.0, 1.0), record("b", "r1", 1.0, 1.0)];
        assert!(agreement_report(&anns, &schema, &common, None).is_err());
        let raters = vec!["r1".to_string(), "r2".to_string()];
        assert_eq!(fully_rated_items(&anns, &common, &raters), vec!["a".to_string()]);
    }
}
