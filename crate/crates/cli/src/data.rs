//! Dataset CSV: an optional `# transform: neglog` line, the header `x,y`, then
//! one point per row with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use rjpt_core::model::{SpectralDataset, Transform};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub fn to_csv(data: &SpectralDataset) -> String {
    let mut s = String::with_capacity(48 * data.len() + 32);
    if data.transform() == Transform::NegativeLog {
        s.push_str("# transform: neglog\n");
    }
    s.push_str("x,y\n");
    for (x, y) in data.x().iter().zip(data.raw_y()) {
        writeln!(s, "{x:.16e},{y:.16e}").unwrap();
    }
    s
}

pub fn parse_csv(text: &str) -> Result<SpectralDataset> {
    let mut transform = Transform::Identity;
    for (i, line) in text.lines().enumerate() {
        let Some(c) = line.trim().strip_prefix('#') else { continue };
        if let Some(t) = c.trim().strip_prefix("transform:") {
            transform = match t.trim() {
                "neglog" => Transform::NegativeLog,
                "identity" => Transform::Identity,
                other => return Err(CliError::Data(format!("line {}: unknown transform {other:?}", i + 1))),
            };
        }
    }
    let mut reader = csv_reader(text);
    let header = reader.headers().map_err(csv_error)?;
    if header.iter().collect::<Vec<_>>() != ["x", "y"] {
        return Err(CliError::Data(format!("expected header `x,y`, got {:?}", header.as_slice())));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        x.push(csv_field(&rec, 0)?);
        y.push(csv_field(&rec, 1)?);
    }
    Ok(match transform {
        Transform::Identity => SpectralDataset::new(x, y)?,
        Transform::NegativeLog => SpectralDataset::from_reflectance(x, y)?,
    })
}

/// Comma-separated, trimmed, `#` comments, every row as wide as the header.
pub(crate) fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

pub(crate) fn csv_error(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}

pub(crate) fn csv_field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let line = rec.position().map_or(0, |p| p.line());
    let v = rec
        .get(i)
        .ok_or_else(|| CliError::Data(format!("line {line}: missing column {i}")))?;
    v.parse::<T>()
        .map_err(|e| CliError::Data(format!("line {line}: {v:?}: {e}")))
}

/// Reads a dataset and the sha256 of the file bytes.
pub fn read(path: &Path) -> Result<(SpectralDataset, String)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::read(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::read(path, e))?;
    let data = parse_csv(text).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok((data, sha256_hex(&bytes)))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
