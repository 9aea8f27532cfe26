//! Annotation records and the `annotations.csv` interchange format.
//!
//! Columns: `address_id,annotator_id,timestamp` followed by one column per
//! schema variable in schema order. Multi-choice values are semicolon-joined
//! codes in schema code order; ordinals are written in shortest round-trip
//! decimal form, so raw integer ratings print without a fractional part.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{AnnotationSchema, VariableKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnnotationValue {
    Ordinal(f64),
    Choice(String),
    Multi(BTreeSet<String>),
}

impl AnnotationValue {
    pub fn as_ordinal(&self) -> Option<f64> {
        match self {
            AnnotationValue::Ordinal(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_choice(&self) -> Option<&str> {
        match self {
            AnnotationValue::Choice(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_multi(&self) -> Option<&BTreeSet<String>> {
        match self {
            AnnotationValue::Multi(s) => Some(s),
            _ => None,
        }
    }
}

/// One annotator's labels for one address.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub address_id: String,
    pub annotator_id: String,
    pub timestamp: String,
    pub values: BTreeMap<String, AnnotationValue>,
}

impl AnnotationRecord {
    pub fn value(&self, variable: &str) -> Option<&AnnotationValue> {
        self.values.get(variable)
    }
}

pub fn csv_header(schema: &AnnotationSchema) -> Vec<String> {
    ["address_id", "annotator_id", "timestamp"]
        .iter()
        .map(|s| s.to_string())
        .chain(schema.variables.iter().map(|v| v.name.clone()))
        .collect()
}

fn parse_cell(kind: &VariableKind, name: &str, cell: &str) -> Result<AnnotationValue> {
    let cell = cell.trim();
    Ok(match kind {
        VariableKind::SingleChoice { .. } => AnnotationValue::Choice(cell.to_string()),
        VariableKind::MultiChoice { .. } => AnnotationValue::Multi(
            cell.split(';')
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(str::to_string)
                .collect(),
        ),
        VariableKind::Ordinal { .. } => AnnotationValue::Ordinal(
            cell.parse()
                .map_err(|_| Error::field(name, format!("unparseable ordinal `{cell}`")))?,
        ),
    })
}

/// Parses `annotations.csv`. `raw` requires integral ordinal ratings (the
/// form annotators submit); calibrated files carry real-valued ordinals.
pub fn read_annotations<R: Read>(
    reader: R,
    schema: &AnnotationSchema,
    raw: bool,
) -> Result<Vec<AnnotationRecord>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let expected = csv_header(schema);
    let found = rdr.headers()?;
    if !found.iter().eq(expected.iter().map(String::as_str)) {
        return Err(Error::Header {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let mut values = BTreeMap::new();
        for (i, var) in schema.variables.iter().enumerate() {
            let v = parse_cell(&var.kind, &var.name, &row[3 + i]).map_err(|e| at_line(e, line))?;
            values.insert(var.name.clone(), v);
        }
        let rec = AnnotationRecord {
            address_id: row[0].trim().to_string(),
            annotator_id: row[1].trim().to_string(),
            timestamp: row[2].trim().to_string(),
            values,
        };
        schema
            .validate_record(&rec, raw)
            .map_err(|e| at_line(e, line))?;
        out.push(rec);
    }
    Ok(out)
}

fn at_line(err: Error, line: u64) -> Error {
    match err {
        Error::Field { field, message } => Error::Field {
            field,
            message: format!("{message} (line {line})"),
        },
        other => other,
    }
}

/// Renders one record as CSV cells in column order.
pub fn record_cells(record: &AnnotationRecord, schema: &AnnotationSchema) -> Vec<String> {
    let mut cells = vec![
        record.address_id.clone(),
        record.annotator_id.clone(),
        record.timestamp.clone(),
    ];
    for var in &schema.variables {
        let cell = match record.values.get(&var.name) {
            None => String::new(),
            Some(AnnotationValue::Ordinal(x)) => x.to_string(),
            Some(AnnotationValue::Choice(c)) => c.clone(),
            Some(AnnotationValue::Multi(set)) => {
                let mut ordered: Vec<&str> = var
                    .kind
                    .codes()
                    .iter()
                    .filter(|c| set.contains(*c))
                    .map(String::as_str)
                    .collect();
                ordered.extend(
                    set.iter()
                        .filter(|c| !var.kind.codes().contains(c))
                        .map(String::as_str),
                );
                ordered.join(";")
            }
        };
        cells.push(cell);
    }
    cells
}

pub fn write_annotations<W: Write>(
    writer: W,
    records: &[AnnotationRecord],
    schema: &AnnotationSchema,
) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(csv_header(schema))?;
    for r in records {
        wtr.write_record(record_cells(r, schema))?;
    }
    wtr.flush().map_err(|e| Error::io("<annotations writer>", e))?;
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::fixtures::record;
    use super::*;
    use crate::schema::NEIGHBOURHOOD;

    #[test]
    fn csv_round_trip_keeps_schema_code_order() {
        let schema = AnnotationSchema::standard();
        let mut r = record("SYN-000001", "ann1", 2.0, 3.0);
        r.values.insert(
            NEIGHBOURHOOD.into(),
            AnnotationValue::Multi(
                ["commercial", "detached_houses"].iter().map(|s| s.to_string()).collect(),
            ),
        );
        let mut buf = Vec::new();
        write_annotations(&mut buf, &[r.clone()], &schema).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "address_id,annotator_id,timestamp,neighbourhood,density,sv_quality,house_type,house_age,house_condition,wealth\n\
             SYN-000001,ann1,2019-03-01T08:00:00Z,detached_houses;commercial,2,good,detached_single_family,2,3,5\n"
        );
        let back = read_annotations(buf.as_slice(), &schema, true).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn raw_read_rejects_fractional_ordinal() {
        let schema = AnnotationSchema::standard();
        let r = record("a", "x", 2.5, 1.0);
        let mut buf = Vec::new();
        write_annotations(&mut buf, &[r], &schema).unwrap();
        let err = read_annotations(buf.as_slice(), &schema, true).unwrap_err();
        assert!(err.to_string().contains("house_age"), "{err}");
        assert!(read_annotations(buf.as_slice(), &schema, false).is_ok());
    }

    #[test]
    fn empty_multi_choice_rejected() {
        let schema = AnnotationSchema::standard();
        let mut r = record("a", "x", 2.0, 1.0);
        r.values
            .insert(NEIGHBOURHOOD.into(), AnnotationValue::Multi(BTreeSet::new()));
        let err = schema.validate_record(&r, true).unwrap_err();
        assert!(matches!(err, Error::Field { ref field, .. } if field == NEIGHBOURHOOD));
    }

    #[test]
    fn json_shape() {
        let r = record("a", "x", 2.0, 1.0);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["values"]["house_age"], 2.0);
        assert_eq!(json["values"]["neighbourhood"][0], "detached_houses");
        let back: AnnotationRecord = serde_json::from_value(json).unwrap();
        assert_eq!(back, r);
    }
}
