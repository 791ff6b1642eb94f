pub mod accountant;
pub mod dyck;
pub mod evaluate;
pub mod maxent;
pub mod sample;
pub mod sweep;
pub mod train;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use dptab::data::{load_csv, write_csv, Schema, Table};
use serde::Serialize;

use crate::error::CliError;

pub fn load_schema(path: &Path) -> Result<Schema, CliError> {
    Schema::load(path).map_err(|e| CliError::input("schema", path, e))
}

pub fn load_table(path: &Path, schema: &Schema) -> Result<Table, CliError> {
    load_csv(path, schema).map_err(|e| CliError::input("data", path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

pub fn save_table(path: &Path, schema: &Schema, table: &Table) -> Result<(), CliError> {
    let mut w = create(path)?;
    write_csv(&mut w, schema, table).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes pretty JSON to `path`, or to stdout when no path is given.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable report");
    match path {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{text}").and_then(|_| w.flush()).map_err(|e| CliError::io(p, e))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
