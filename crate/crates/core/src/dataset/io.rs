use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{ColumnKind, ColumnMeta, Dataset, RawColumn, RawDataset, RawValues};
use crate::error::{Error, Result};

fn parse_number(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a comma-separated file with a header row. A column is numeric
/// when every cell parses as a finite number, categorical otherwise, unless
/// `column_kinds` says otherwise.
pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    column_kinds: Option<&HashMap<String, ColumnKind>>,
) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, target_column, column_kinds)
}

pub fn read_csv<R: Read>(
    reader: R,
    target_column: &str,
    column_kinds: Option<&HashMap<String, ColumnKind>>,
) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_idx = header
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingTarget(target_column.to_string()))?;

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row: row + 1,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            cells[j].push(cell.to_string());
        }
    }
    if cells[target_idx].is_empty() {
        return Err(Error::EmptyDataset);
    }

    let target = cells[target_idx]
        .iter()
        .enumerate()
        .map(|(row, v)| {
            parse_number(v).ok_or_else(|| Error::NonNumericTarget {
                row: row + 1,
                value: v.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut columns = Vec::with_capacity(header.len() - 1);
    for (j, name) in header.iter().enumerate() {
        if j == target_idx {
            continue;
        }
        let parsed: Vec<Option<f64>> = cells[j].iter().map(|c| parse_number(c)).collect();
        let kind = column_kinds
            .and_then(|k| k.get(name).copied())
            .unwrap_or(if parsed.iter().all(Option::is_some) {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            });
        let column = match kind {
            ColumnKind::Numeric => {
                let values = parsed
                    .into_iter()
                    .enumerate()
                    .map(|(row, v)| {
                        v.ok_or_else(|| {
                            Error::InvalidParameter(format!(
                                "column `{name}` forced numeric but row {} is `{}`",
                                row + 1,
                                cells[j][row]
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                RawColumn {
                    meta: ColumnMeta::numeric(name.clone()),
                    values: RawValues::Numeric(values),
                }
            }
            ColumnKind::Categorical => {
                let mut categories: Vec<String> = Vec::new();
                let mut lookup: HashMap<&str, usize> = HashMap::new();
                let mut codes = Vec::with_capacity(cells[j].len());
                for cell in &cells[j] {
                    let label = cell.trim();
                    let code = *lookup.entry(label).or_insert_with(|| {
                        categories.push(label.to_string());
                        categories.len() - 1
                    });
                    codes.push(code);
                }
                RawColumn {
                    meta: ColumnMeta {
                        name: name.clone(),
                        kind: ColumnKind::Categorical,
                        categories,
                    },
                    values: RawValues::Categorical(codes),
                }
            }
        };
        columns.push(column);
    }

    Ok(RawDataset {
        columns,
        target,
        target_name: target_column.to_string(),
    })
}

/// Writes features followed by the target column, with a header row.
pub fn write_dataset_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = data.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(&data.target_name);
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (row, y) in data.features.rows().into_iter().zip(&data.target) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(y.to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_numeric_columns() {
        let raw = read_csv("x,y\n1,2\n3,4\n5,6".as_bytes(), "y", None).unwrap();
        assert_eq!(raw.n(), 3);
        assert_eq!(raw.d(), 1);
        assert_eq!(raw.columns[0].meta.kind, ColumnKind::Numeric);
        assert_eq!(raw.target, vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn infers_categorical_in_first_appearance_order() {
        let raw = read_csv("c,y\nb,1\na,2\nb,3".as_bytes(), "y", None).unwrap();
        let col = &raw.columns[0];
        assert_eq!(col.meta.kind, ColumnKind::Categorical);
        assert_eq!(col.meta.categories, vec!["b", "a"]);
        assert_eq!(col.values, RawValues::Categorical(vec![0, 1, 0]));

        let raw = read_csv("c,y\na,1\nb,2\na,3".as_bytes(), "y", None).unwrap();
        assert_eq!(raw.columns[0].meta.categories, vec!["a", "b"]);
    }

    #[test]
    fn kind_override_forces_categorical() {
        let mut kinds = HashMap::new();
        kinds.insert("zip".to_string(), ColumnKind::Categorical);
        let raw = read_csv("zip,y\n100,1\n200,2\n100,3".as_bytes(), "y", Some(&kinds)).unwrap();
        assert_eq!(raw.columns[0].meta.categories, vec!["100", "200"]);
    }

    #[test]
    fn header_only_is_empty() {
        let err = read_csv("x,y\n".as_bytes(), "y", None).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }

    #[test]
    fn missing_target_and_ragged_rows() {
        assert!(matches!(
            read_csv("x,y\n1,2".as_bytes(), "z", None).unwrap_err(),
            Error::MissingTarget(_)
        ));
        assert!(matches!(
            read_csv("x,y\n1,2\n3".as_bytes(), "y", None).unwrap_err(),
            Error::RaggedRow { row: 2, .. }
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "y", None).unwrap_err(),
            Error::Io { .. }
        ));
    }
}
