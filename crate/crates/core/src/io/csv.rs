//! CSV output with lossless float rendering.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Int(i64),
    Float(f64),
    Text(String),
    /// Rendered as `NA`.
    Missing,
}

impl From<usize> for Field {
    fn from(v: usize) -> Self {
        Field::Int(v as i64)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::Text(v.to_string())
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Text(v.to_string())
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Text(v)
    }
}

impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(v: Option<T>) -> Self {
        v.map_or(Field::Missing, Into::into)
    }
}

/// 17 significant digits in scientific notation; parses back to the same bits.
/// Non-finite values render as `NA`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NA".to_string()
    }
}

impl Field {
    pub fn render(&self) -> String {
        match self {
            Field::Int(i) => i.to_string(),
            Field::Float(f) => format_float(*f),
            Field::Text(s) => s.clone(),
            Field::Missing => "NA".to_string(),
        }
    }
}

/// Header row then data rows, `\n` line endings.
pub fn write_csv_to<W: Write>(out: W, header: &[&str], rows: &[Vec<Field>]) -> Result<()> {
    let mut w = ::csv::WriterBuilder::new()
        .terminator(::csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != header.len() {
            return Err(Error::arg(format!(
                "row {i} has {} fields, schema has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(Field::render))?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<Field>]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(file, header, rows)
}
