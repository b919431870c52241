use std::path::Path;

use super::{ColumnData, ColumnKind, ColumnSchema, Dataset, GroupSpec};
use crate::error::{Error, Result};

pub const DEFAULT_MISSING_TOKENS: &[&str] = &["", "NA", "?"];

/// Reads a headered CSV into a validated [`Dataset`].
///
/// The header must name exactly the schema's columns (any order). Cells equal
/// to one of `missing_tokens` after trimming become explicit missing markers.
pub fn load_csv(
    path: &Path,
    schema: &[ColumnSchema],
    label_column: &str,
    group: &GroupSpec,
    missing_tokens: &[String],
) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
            ),
            _ => Error::Csv(e.to_string()),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    for h in &header {
        if !schema.iter().any(|c| &c.name == h) {
            return Err(Error::UnknownColumn(h.clone()));
        }
    }
    let positions: Vec<usize> = schema
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == &c.name)
                .ok_or_else(|| Error::UnknownColumn(c.name.clone()))
        })
        .collect::<Result<_>>()?;

    let mut columns: Vec<ColumnData> = schema
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Numeric => ColumnData::Numeric(Vec::new()),
            ColumnKind::Categorical => ColumnData::Categorical(Vec::new()),
        })
        .collect();

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != header.len() {
            return Err(Error::Csv(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        for ((col, s), &pos) in columns.iter_mut().zip(schema).zip(&positions) {
            let raw = record[pos].trim();
            let missing = missing_tokens.iter().any(|t| t == raw);
            match col {
                ColumnData::Numeric(v) => {
                    if missing {
                        v.push(None);
                    } else {
                        let x: f64 = raw.parse().map_err(|_| Error::NotNumeric {
                            column: s.name.clone(),
                            row,
                            value: raw.to_string(),
                        })?;
                        v.push(Some(x));
                    }
                }
                ColumnData::Categorical(v) => {
                    v.push(if missing { None } else { Some(raw.to_string()) });
                }
            }
        }
    }

    Dataset::new(schema.to_vec(), columns, label_column, group.clone())
}

/// Writes every column (schema order) back out. Missing cells are written as
/// the first missing token, or as an empty cell when none is given.
pub fn write_csv(dataset: &Dataset, path: &Path, missing_tokens: &[String]) -> Result<()> {
    let missing = missing_tokens.first().map_or("", String::as_str);
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Csv(e.to_string()))?;
    w.write_record(dataset.schema().iter().map(|c| c.name.as_str()))
        .map_err(|e| Error::Csv(e.to_string()))?;
    let mut buf: Vec<String> = Vec::with_capacity(dataset.schema().len());
    for row in 0..dataset.len() {
        buf.clear();
        for col in dataset.columns() {
            buf.push(match col {
                ColumnData::Numeric(v) => v[row].map_or_else(|| missing.to_string(), |x| x.to_string()),
                ColumnData::Categorical(v) => v[row].clone().unwrap_or_else(|| missing.to_string()),
            });
        }
        w.write_record(&buf).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tokens() -> Vec<String> {
        DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()
    }

    fn schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::numeric("age").allow_missing(),
            ColumnSchema::numeric("income"),
            ColumnSchema::categorical("sex"),
            ColumnSchema::categorical("label"),
        ]
    }

    fn group() -> GroupSpec {
        GroupSpec::new("sex", ["male"], ["yes"])
    }

    fn write(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_row_needs_both_groups() {
        // one row can only ever populate one group
        let f = write("age,income,sex,label\n30,10,male,yes\n");
        let err = load_csv(f.path(), &schema(), "label", &group(), &tokens()).unwrap_err();
        assert!(matches!(err, Error::EmptyGroup(_)));
    }

    #[test]
    fn missing_markers_survive_loading() {
        let f = write("sex,label,age,income\nmale,yes,NA,10\nfemale,no,?,20\nfemale,no,,5\n");
        let d = load_csv(f.path(), &schema(), "label", &group(), &tokens()).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.column("age"), Some(&ColumnData::Numeric(vec![None; 3])));
    }

    #[test]
    fn missing_in_strict_numeric_column() {
        let f = write("age,income,sex,label\n30,,male,yes\n31,4,female,no\n");
        let err = load_csv(f.path(), &schema(), "label", &group(), &tokens()).unwrap_err();
        assert!(matches!(err, Error::MissingNotAllowed { ref column, row: 0 } if column == "income"));
    }

    #[test]
    fn unknown_header_column() {
        let f = write("age,income,sex,label,extra\n30,1,male,yes,1\n");
        assert!(matches!(
            load_csv(f.path(), &schema(), "label", &group(), &tokens()),
            Err(Error::UnknownColumn(c)) if c == "extra"
        ));
    }

    #[test]
    fn ragged_row_is_malformed() {
        let f = write("age,income,sex,label\n30,1,male\n");
        assert!(matches!(
            load_csv(f.path(), &schema(), "label", &group(), &tokens()),
            Err(Error::Csv(_))
        ));
    }

    #[test]
    fn round_trip_preserves_dataset() {
        let f = write("age,income,sex,label\n30.5,1e3,male,yes\n,0.1,female,no\n41,7,\"fe,male\",no\n");
        let d = load_csv(f.path(), &schema(), "label", &group(), &tokens()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&d, out.path(), &tokens()).unwrap();
        let back = load_csv(out.path(), &schema(), "label", &group(), &tokens()).unwrap();
        assert_eq!(d, back);
    }
}
