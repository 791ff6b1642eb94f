//! Balanced-parenthesis strings of fixed length as a tabular benchmark.

use log::warn;
use thiserror::Error;

use crate::data::{ColumnSpec, DataError, Schema, Table, Value};

/// Largest length [`generate_dyck`] will enumerate.
pub const MAX_ENUM_LEN: usize = 24;

#[derive(Debug, Error, PartialEq)]
pub enum DyckError {
    #[error("length {0} outside the enumerable range 2..={MAX_ENUM_LEN}")]
    Length(usize),
    #[error("character {0:?} is not a parenthesis")]
    ForeignChar(char),
    #[error("cannot score an empty sample")]
    EmptySample,
}

/// Every balanced string of length `k`, in lexicographic order with
/// `'(' < ')'`. Odd lengths have none.
pub fn generate_dyck(k: usize) -> Result<Vec<String>, DyckError> {
    if !(2..=MAX_ENUM_LEN).contains(&k) {
        return Err(DyckError::Length(k));
    }
    if k % 2 == 1 {
        warn!("no balanced strings of odd length {k}");
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(k);
    extend(&mut buf, 0, k, &mut out);
    Ok(out)
}

fn extend(buf: &mut Vec<u8>, open: usize, k: usize, out: &mut Vec<String>) {
    let remaining = k - buf.len();
    if remaining == 0 {
        out.push(String::from_utf8(buf.clone()).expect("ascii"));
        return;
    }
    // An opening bracket must still leave room to close everything.
    if open + 1 <= remaining - 1 {
        buf.push(b'(');
        extend(buf, open + 1, k, out);
        buf.pop();
    }
    if open > 0 {
        buf.push(b')');
        extend(buf, open - 1, k, out);
        buf.pop();
    }
}

/// Counter scan: never below zero, ending at zero.
pub fn is_valid_dyck(s: &str) -> Result<bool, DyckError> {
    let mut depth: i64 = 0;
    let mut ok = true;
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            other => return Err(DyckError::ForeignChar(other)),
        }
        if depth < 0 {
            ok = false;
        }
    }
    Ok(ok && depth == 0)
}

/// Fraction of rows that are balanced.
pub fn validity_rate<S: AsRef<str>>(rows: &[S]) -> Result<f64, DyckError> {
    if rows.is_empty() {
        return Err(DyckError::EmptySample);
    }
    let mut valid = 0usize;
    for r in rows {
        if is_valid_dyck(r.as_ref())? {
            valid += 1;
        }
    }
    Ok(valid as f64 / rows.len() as f64)
}

/// `k` categorical columns `c1..ck` over the alphabet `(`, `)`.
pub fn dyck_schema(k: usize) -> Result<Schema, DataError> {
    let cols = (1..=k)
        .map(|i| ColumnSpec::categorical(format!("c{i}"), &["(", ")"]))
        .collect::<Result<Vec<_>, _>>()?;
    Schema::new(cols)
}

/// One row per string, one cell per character.
pub fn strings_to_table<S: AsRef<str>>(rows: &[S]) -> Result<Table, DyckError> {
    let mut table = Table::default();
    for r in rows {
        let cells = r
            .as_ref()
            .chars()
            .map(|c| match c {
                '(' => Ok(Value::Category(0)),
                ')' => Ok(Value::Category(1)),
                other => Err(DyckError::ForeignChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        table.rows.push(cells);
    }
    Ok(table)
}

/// Concatenates each row's cells back into a string, using `dyck_schema`
/// category order.
pub fn table_to_strings(table: &Table) -> Vec<String> {
    table
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| match v.as_category() {
                    Some(0) => '(',
                    Some(1) => ')',
                    _ => '?',
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests;
