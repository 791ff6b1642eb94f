//! Typed tables and their CSV form.
//!
//! Dialect: comma separated, UTF-8, first line is the header and must list
//! the schema's column names in order.

use std::io::{Read, Write};
use std::path::Path;

use super::{ColumnKind, DataError, Schema};

/// One typed cell. Categories are stored as indices into the column's
/// category list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Category(u32),
    Number(f64),
}

impl Value {
    pub fn as_number(self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(x),
            Value::Category(_) => None,
        }
    }

    pub fn as_category(self) -> Option<u32> {
        match self {
            Value::Category(c) => Some(c),
            Value::Number(_) => None,
        }
    }
}

/// Rows of typed cells, each row as long as the schema.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Cells of column `col`, top to bottom.
    pub fn column(&self, col: usize) -> impl Iterator<Item = Value> + '_ {
        self.rows.iter().map(move |r| r[col])
    }
}

/// Parses one cell against its column spec.
pub fn parse_cell(schema: &Schema, col: usize, text: &str) -> Result<Value, String> {
    let spec = &schema.columns()[col];
    match &spec.kind {
        ColumnKind::Categorical { categories } => categories
            .iter()
            .position(|c| c == text)
            .map(|i| Value::Category(i as u32))
            .ok_or_else(|| format!("unknown category '{text}'")),
        ColumnKind::Numeric { min, max, .. } => {
            let x: f64 = text
                .trim()
                .parse()
                .map_err(|_| format!("'{text}' is not a number"))?;
            if !(*min <= x && x <= *max) {
                return Err(format!("{x} outside [{min}, {max}]"));
            }
            Ok(Value::Number(x))
        }
    }
}

/// Formats a cell for CSV output.
pub fn format_cell(schema: &Schema, col: usize, value: Value) -> String {
    match (&schema.columns()[col].kind, value) {
        (ColumnKind::Categorical { categories }, Value::Category(c)) => categories[c as usize].clone(),
        (ColumnKind::Numeric { integer_valued: true, .. }, Value::Number(x)) => {
            format!("{}", x.round() as i64)
        }
        (_, Value::Number(x)) => format!("{x}"),
        (_, Value::Category(c)) => c.to_string(),
    }
}

/// Reads a CSV whose header matches `schema`.
pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Table, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| DataError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    let names: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
    if header.iter().collect::<Vec<_>>() != names {
        return Err(DataError::HeaderMismatch {
            expected: names.iter().map(|s| s.to_string()).collect(),
            got: header.iter().map(|s| s.to_string()).collect(),
        });
    }
    let mut table = Table::default();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| DataError::Malformed {
            line,
            message: e.to_string(),
        })?;
        if record.len() != schema.len() {
            return Err(DataError::Malformed {
                line,
                message: format!("expected {} fields, found {}", schema.len(), record.len()),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(col, text)| {
                parse_cell(schema, col, text).map_err(|message| DataError::InvalidCell {
                    line,
                    column: schema.columns()[col].name.clone(),
                    message,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        table.rows.push(row);
    }
    Ok(table)
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Table, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(std::io::BufReader::new(file), schema)
}

pub fn write_csv<W: Write>(writer: W, schema: &Schema, table: &Table) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| DataError::Malformed {
        line: 0,
        message: e.to_string(),
    };
    wtr.write_record(schema.columns().iter().map(|c| c.name.as_str()))
        .map_err(csv_err)?;
    for row in &table.rows {
        wtr.write_record(
            row.iter()
                .enumerate()
                .map(|(col, &v)| format_cell(schema, col, v)),
        )
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: "<output>".into(),
        source,
    })
}

pub fn save_csv(path: &Path, schema: &Schema, table: &Table) -> Result<(), DataError> {
    let file = std::fs::File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv(std::io::BufWriter::new(file), schema, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ColumnSpec;

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSpec::numeric("age", 0.0, 100.0, true).unwrap(),
            ColumnSpec::categorical("fruit", &["a", "b"]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn header_only_file_is_empty() {
        let t = read_csv("age,fruit\n".as_bytes(), &schema()).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn unknown_category_names_row_and_column() {
        let err = read_csv("age,fruit\n3,a\n4,banana\n".as_bytes(), &schema()).unwrap_err();
        match err {
            DataError::InvalidCell { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, "fruit");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_and_malformed_rows() {
        assert!(matches!(
            read_csv("age,fruit\n101,a\n".as_bytes(), &schema()),
            Err(DataError::InvalidCell { line: 2, .. })
        ));
        assert!(matches!(
            read_csv("age,fruit\n1,a,extra\n".as_bytes(), &schema()),
            Err(DataError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            read_csv("fruit,age\n".as_bytes(), &schema()),
            Err(DataError::HeaderMismatch { .. })
        ));
    }

    #[test]
    fn write_then_read() {
        let table = Table {
            rows: vec![
                vec![Value::Number(37.0), Value::Category(1)],
                vec![Value::Number(0.0), Value::Category(0)],
            ],
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &schema(), &table).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "age,fruit\n37,b\n0,a\n");
        assert_eq!(read_csv(buf.as_slice(), &schema()).unwrap(), table);
    }
}
