//! Delimiter-separated tables: the export format shared by all reports and
//! the reader that parses it back.

use crate::error::{Error, Result};
use serde::Serialize;
use std::io::{Read, Write};

/// Writes a header row then one row per record.
pub fn write_rows<T: Serialize>(out: impl Write, rows: &[T], delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed table; every row has as many fields as the header.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&str> {
        let c = self.column(name)?;
        self.rows.get(row).map(|r| r[c].as_str())
    }
}

/// Parses a table written by `write_rows` or any export of the toolkit.
pub fn read_table(input: impl Read, delimiter: u8) -> Result<Table> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_reader(input);
    let header = r.headers()?.iter().map(str::to_string).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line: rows.len() + 2,
                msg: format!("{} fields, expected {}", rec.len(), header.len()),
            });
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}
