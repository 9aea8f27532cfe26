use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum DropReason {
    /// Every row has the same value; indistinguishable from the intercept.
    Constant,
    /// Identical to an earlier column.
    Duplicate(String),
    /// Numerically collinear with earlier columns in the weighted fit.
    Aliased,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    #[serde(flatten)]
    pub reason: DropReason,
}

/// Row-major design matrix whose first column is the all-ones intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    column_names: Vec<String>,
    data: Vec<f64>,
    dropped: Vec<DroppedColumn>,
}

impl DesignMatrix {
    /// Builds from named columns. Columns must share one length and hold
    /// finite values.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::DuplicateColumn(dup.clone()));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::Dimension("columns differ in length".into()));
        }
        if columns.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Dimension("non-finite design entry".into()));
        }
        let p = columns.len();
        let mut data = vec![0.0; n_rows * p];
        for (j, col) in columns.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                data[i * p + j] = x;
            }
        }
        Ok(Self {
            n_rows,
            column_names: names,
            data,
            dropped: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn dropped_columns(&self) -> &[DroppedColumn] {
        &self.dropped
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|n| n == name)
    }

    /// Rows `indices`, in that order. Column drops carry over.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let p = self.n_cols();
        let mut data = Vec::with_capacity(indices.len() * p);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n_rows: indices.len(),
            column_names: self.column_names.clone(),
            data,
            dropped: self.dropped.clone(),
        }
    }

    /// Copy without the named columns.
    pub fn without_columns(&self, names: &[String]) -> Self {
        let keep: Vec<usize> = (0..self.n_cols())
            .filter(|&j| !names.contains(&self.column_names[j]))
            .collect();
        let mut data = Vec::with_capacity(self.n_rows * keep.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            data.extend(keep.iter().map(|&j| row[j]));
        }
        Self {
            n_rows: self.n_rows,
            column_names: keep.iter().map(|&j| self.column_names[j].clone()).collect(),
            data,
            dropped: self.dropped.clone(),
        }
    }
}

/// Intercept plus one column per retained feature name, in the given order.
/// Constant columns and exact duplicates of earlier columns are dropped and
/// recorded rather than rejected.
pub fn build_design(rows: &[FeatureVector], retained: &[String]) -> Result<DesignMatrix> {
    let mut seen = BTreeSet::new();
    if let Some(dup) = retained.iter().find(|n| !seen.insert(n.as_str())) {
        return Err(Error::DuplicateColumn(dup.clone()));
    }
    if retained.iter().any(|n| n == INTERCEPT) {
        return Err(Error::DuplicateColumn(INTERCEPT.into()));
    }
    let mut names = vec![INTERCEPT.to_string()];
    let mut columns = vec![vec![1.0; rows.len()]];
    let mut dropped = Vec::new();
    for name in retained {
        let col = rows
            .iter()
            .map(|fv| fv.get(name).ok_or_else(|| Error::UnknownFeature(name.clone())))
            .collect::<Result<Vec<f64>>>()?;
        if !col.is_empty() && col.windows(2).all(|w| w[0] == w[1]) {
            dropped.push(DroppedColumn {
                name: name.clone(),
                reason: DropReason::Constant,
            });
            continue;
        }
        if let Some(j) = columns.iter().position(|c| *c == col) {
            dropped.push(DroppedColumn {
                name: name.clone(),
                reason: DropReason::Duplicate(names[j].clone()),
            });
            continue;
        }
        names.push(name.clone());
        columns.push(col);
    }
    let mut design = DesignMatrix::from_columns(names, columns)?;
    design.dropped = dropped;
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn fv(bits: &[(&str, u8)]) -> FeatureVector {
        FeatureVector {
            address_id: "a".into(),
            indicators: bits.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            ordinals: BTreeMap::new(),
        }
    }

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn five_features_give_six_columns() {
        let vars = ["v1", "v2", "v3", "v4", "v5"];
        let rows: Vec<_> = (0..32u8)
            .map(|i| {
                let bits: Vec<(&str, u8)> =
                    vars.iter().enumerate().map(|(k, v)| (*v, (i >> k) & 1)).collect();
                fv(&bits)
            })
            .collect();
        let d = build_design(&rows, &names(&vars)).unwrap();
        assert_eq!((d.n_rows(), d.n_cols()), (32, 6));
        assert_eq!(d.column_names()[0], INTERCEPT);
        assert!(d.column(0).iter().all(|&x| x == 1.0));
    }

    #[test]
    fn intercept_only() {
        let rows = vec![fv(&[]), fv(&[])];
        let d = build_design(&rows, &[]).unwrap();
        assert_eq!((d.n_rows(), d.n_cols()), (2, 1));
    }

    #[test]
    fn drops_constant_and_duplicate() {
        let rows = vec![
            fv(&[("a", 0), ("b", 0), ("c", 1)]),
            fv(&[("a", 1), ("b", 1), ("c", 1)]),
        ];
        let d = build_design(&rows, &names(&["a", "b", "c"])).unwrap();
        assert_eq!(d.column_names(), &names(&[INTERCEPT, "a"]));
        assert_eq!(
            d.dropped_columns(),
            &[
                DroppedColumn { name: "b".into(), reason: DropReason::Duplicate("a".into()) },
                DroppedColumn { name: "c".into(), reason: DropReason::Constant },
            ]
        );
    }

    #[test]
    fn duplicate_and_unknown_names_rejected() {
        let rows = vec![fv(&[("a", 0)])];
        assert!(matches!(
            build_design(&rows, &names(&["a", "a"])),
            Err(Error::DuplicateColumn(_))
        ));
        assert!(matches!(
            build_design(&rows, &names(&["zz"])),
            Err(Error::UnknownFeature(_))
        ));
    }
}
